#pragma once

// Image and flow file I/O. Frames travel as binary PPM (P6, 8-bit) or PFM;
// single-channel maps as binary PGM (P5, 8-bit) or grayscale PFM; flows as
// Middlebury .flo. PPM/PGM pixel values map to [0,1] for frames but PGM
// occlusion maps keep their raw [0,255] scale (the curation stage consumes
// them that way).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "xvfi/common.hpp"
#include "xvfi/flow_ops.hpp"
#include "xvfi/tensor.hpp"

namespace xvfi {

namespace detail {

// Reads one whitespace-delimited PNM header token, skipping '#' comments.
inline std::string pnm_token(std::istream& is, const std::string& path) {
    std::string tok;
    int c;
    while ((c = is.get()) != EOF) {
        if (c == '#') {
            while ((c = is.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    if (tok.empty()) throw FormatError("'" + path + "': truncated header");
    return tok;
}

inline int pnm_int(std::istream& is, const std::string& path, const char* what) {
    const std::string tok = pnm_token(is, path);
    try {
        size_t used = 0;
        const int v = std::stoi(tok, &used);
        if (used != tok.size() || v <= 0) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw FormatError("'" + path + "': bad " + std::string(what) + " '" + tok + "'");
    }
}

inline std::vector<unsigned char> read_pnm_payload(const std::string& path, const char* magic, int channels,
                                                   int& w, int& h) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path + "' for reading");
    if (pnm_token(is, path) != magic) throw FormatError("'" + path + "': expected " + std::string(magic) + " magic");
    w = pnm_int(is, path, "width");
    h = pnm_int(is, path, "height");
    const int maxval = pnm_int(is, path, "maxval");
    if (maxval != 255) throw FormatError("'" + path + "': only 8-bit (maxval 255) supported, got " + std::to_string(maxval));
    // exactly one whitespace byte separates header and payload; pnm_int
    // already consumed it as the delimiter of the maxval token
    std::vector<unsigned char> buf(static_cast<size_t>(w) * h * channels);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<size_t>(is.gcount()) != buf.size()) throw FormatError("'" + path + "': truncated pixel data");
    return buf;
}

inline unsigned char to_byte(float v, float scale) {
    const float s = std::clamp(v * scale, 0.0f, 255.0f);
    return static_cast<unsigned char>(std::lround(s));
}

}  // namespace detail

// P6 -> 3 x H x W with values in [0,1].
inline Tensor read_ppm(const std::string& path) {
    int w = 0, h = 0;
    auto buf = detail::read_pnm_payload(path, "P6", 3, w, h);
    Tensor t(3, h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const size_t i = (static_cast<size_t>(y) * w + x) * 3;
            t.at(0, y, x) = buf[i] * (1.0f / 255.0f);
            t.at(1, y, x) = buf[i + 1] * (1.0f / 255.0f);
            t.at(2, y, x) = buf[i + 2] * (1.0f / 255.0f);
        }
    }
    return t;
}

// 3-channel [0,1] tensor -> P6, round-to-nearest.
inline void write_ppm(const std::string& path, const Tensor& t) {
    if (t.channels() != 3) throw ShapeError("write_ppm: expected 3 channels, got " + t.shape());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os << "P6\n" << t.width() << " " << t.height() << "\n255\n";
    std::vector<unsigned char> buf(static_cast<size_t>(t.width()) * t.height() * 3);
    for (int y = 0; y < t.height(); ++y) {
        for (int x = 0; x < t.width(); ++x) {
            const size_t i = (static_cast<size_t>(y) * t.width() + x) * 3;
            buf[i] = detail::to_byte(t.at(0, y, x), 255.0f);
            buf[i + 1] = detail::to_byte(t.at(1, y, x), 255.0f);
            buf[i + 2] = detail::to_byte(t.at(2, y, x), 255.0f);
        }
    }
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!os) throw IoError("short write to '" + path + "'");
}

// P5 -> 1 x H x W keeping raw byte values (0..255) as floats.
inline Tensor read_pgm(const std::string& path) {
    int w = 0, h = 0;
    auto buf = detail::read_pnm_payload(path, "P5", 1, w, h);
    Tensor t(1, h, w);
    for (size_t i = 0; i < buf.size(); ++i) t.data()[i] = static_cast<float>(buf[i]);
    return t;
}

// 1-channel tensor with values in [0,255] -> P5.
inline void write_pgm(const std::string& path, const Tensor& t) {
    if (t.channels() != 1) throw ShapeError("write_pgm: expected 1 channel, got " + t.shape());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os << "P5\n" << t.width() << " " << t.height() << "\n255\n";
    std::vector<unsigned char> buf(t.size());
    for (size_t i = 0; i < buf.size(); ++i) buf[i] = detail::to_byte(t.data()[i], 1.0f);
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!os) throw IoError("short write to '" + path + "'");
}

// PFM, color ("PF", 3ch) or grayscale ("Pf", 1ch). Rows are stored bottom
// to top; a negative scale marks little-endian data (always written that
// way here; big-endian files are byte-swapped on read).
inline Tensor read_pfm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path + "' for reading");
    const std::string magic = detail::pnm_token(is, path);
    int channels;
    if (magic == "PF") {
        channels = 3;
    } else if (magic == "Pf") {
        channels = 1;
    } else {
        throw FormatError("'" + path + "': expected PF or Pf magic, got '" + magic + "'");
    }
    const int w = detail::pnm_int(is, path, "width");
    const int h = detail::pnm_int(is, path, "height");
    const std::string scale_tok = detail::pnm_token(is, path);
    double scale;
    try {
        scale = std::stod(scale_tok);
    } catch (const std::exception&) {
        throw FormatError("'" + path + "': bad scale '" + scale_tok + "'");
    }
    if (scale == 0.0) throw FormatError("'" + path + "': zero scale");
    std::vector<float> buf(static_cast<size_t>(w) * h * channels);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (static_cast<size_t>(is.gcount()) != buf.size() * sizeof(float)) {
        throw FormatError("'" + path + "': truncated pixel data");
    }
    if (scale > 0.0) {  // big-endian payload
        for (float& v : buf) {
            std::uint32_t u;
            std::memcpy(&u, &v, 4);
            u = ((u & 0xFF000000u) >> 24) | ((u & 0x00FF0000u) >> 8) | ((u & 0x0000FF00u) << 8) |
                ((u & 0x000000FFu) << 24);
            std::memcpy(&v, &u, 4);
        }
    }
    Tensor t(channels, h, w);
    for (int y = 0; y < h; ++y) {
        const int src_y = h - 1 - y;
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < channels; ++c) {
                t.at(c, y, x) = buf[(static_cast<size_t>(src_y) * w + x) * channels + c];
            }
        }
    }
    return t;
}

inline void write_pfm(const std::string& path, const Tensor& t) {
    if (t.channels() != 1 && t.channels() != 3) {
        throw ShapeError("write_pfm: expected 1 or 3 channels, got " + t.shape());
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os << (t.channels() == 3 ? "PF" : "Pf") << "\n" << t.width() << " " << t.height() << "\n-1.0\n";
    std::vector<float> buf(t.size());
    for (int y = 0; y < t.height(); ++y) {
        const int dst_y = t.height() - 1 - y;
        for (int x = 0; x < t.width(); ++x) {
            for (int c = 0; c < t.channels(); ++c) {
                buf[(static_cast<size_t>(dst_y) * t.width() + x) * t.channels() + c] = t.at(c, y, x);
            }
        }
    }
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!os) throw IoError("short write to '" + path + "'");
}

inline constexpr float kFloMagic = 202021.25f;

// Middlebury .flo: magic float, i32 width, i32 height, then row-major
// interleaved (u, v) pairs.
inline FlowField read_flo(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path + "' for reading");
    float magic = 0.0f;
    std::int32_t w = 0, h = 0;
    is.read(reinterpret_cast<char*>(&magic), 4);
    is.read(reinterpret_cast<char*>(&w), 4);
    is.read(reinterpret_cast<char*>(&h), 4);
    if (!is || magic != kFloMagic) throw FormatError("'" + path + "': not a .flo file (bad magic)");
    if (w <= 0 || h <= 0 || w > 1 << 16 || h > 1 << 16) {
        throw FormatError("'" + path + "': implausible dims " + std::to_string(w) + "x" + std::to_string(h));
    }
    std::vector<float> buf(static_cast<size_t>(w) * h * 2);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (static_cast<size_t>(is.gcount()) != buf.size() * sizeof(float)) {
        throw FormatError("'" + path + "': truncated flow data");
    }
    FlowField f(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            f.u(y, x) = buf[(static_cast<size_t>(y) * w + x) * 2];
            f.v(y, x) = buf[(static_cast<size_t>(y) * w + x) * 2 + 1];
        }
    }
    return f;
}

inline void write_flo(const std::string& path, const FlowField& f) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    const float magic = kFloMagic;
    const std::int32_t w = f.width(), h = f.height();
    os.write(reinterpret_cast<const char*>(&magic), 4);
    os.write(reinterpret_cast<const char*>(&w), 4);
    os.write(reinterpret_cast<const char*>(&h), 4);
    std::vector<float> buf(static_cast<size_t>(w) * h * 2);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            buf[(static_cast<size_t>(y) * w + x) * 2] = f.u(y, x);
            buf[(static_cast<size_t>(y) * w + x) * 2 + 1] = f.v(y, x);
        }
    }
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!os) throw IoError("short write to '" + path + "'");
}

// Loads a frame by extension: .ppm -> P6, .pfm -> color PFM.
inline Tensor read_frame(const std::string& path) {
    auto dot = path.find_last_of('.');
    const std::string ext = dot == std::string::npos ? "" : path.substr(dot);
    if (ext == ".ppm") return read_ppm(path);
    if (ext == ".pfm") {
        Tensor t = read_pfm(path);
        if (t.channels() != 3) throw FormatError("'" + path + "': expected a color PFM frame");
        return t;
    }
    throw ValueError("unsupported frame format '" + ext + "' (use .ppm or .pfm): " + path);
}

}  // namespace xvfi
