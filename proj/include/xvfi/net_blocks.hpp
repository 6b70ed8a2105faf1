#pragma once

// The learned parts of the interpolator: parameter container with file I/O
// and Xavier init, shared feature extractor with its recursive pyramid, the
// two bidirectional-flow networks (lowest scale + scale-shared), the
// time-conditioned flow network, and the refinement U-Net.
//
// Layer naming is canonical and fixed by model_layers(): it defines the
// init draw order and the weight-file layout, so it must not be reordered.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "xvfi/common.hpp"
#include "xvfi/flow_ops.hpp"
#include "xvfi/tensor.hpp"

namespace xvfi {

struct LayerSpec {
    std::string name;
    ConvSpec spec;
};

// Full layer table for a given module scale factor M (2 or 4) and feature
// width. Order is canonical: feature extractor, lowest-scale bidirectional
// flow net, scale-shared bidirectional flow net, time flow net, refinement.
inline std::vector<LayerSpec> model_layers(int M, int width) {
    if (M != 2 && M != 4) throw ValueError("model_layers: module scale factor must be 2 or 4, got " + std::to_string(M));
    if (width < 4 || width % 4 != 0) {
        throw ValueError("model_layers: feature width must be a positive multiple of 4, got " + std::to_string(width));
    }
    const int w = width;
    std::vector<LayerSpec> L;
    L.push_back({"feat/conv1", {3, w, 3}});
    L.push_back({"feat/conv2", {w, w, 4}});
    if (M == 4) L.push_back({"feat/conv3", {w, w, 4}});
    L.push_back({"feat/rb1/conv1", {w, w, 3}});
    L.push_back({"feat/rb1/conv2", {w, w, 3}});
    L.push_back({"feat/rb2/conv1", {w, w, 3}});
    L.push_back({"feat/rb2/conv2", {w, w, 3}});
    L.push_back({"feat/pyr", {w, w, 4}});

    L.push_back({"biflow_lowest/enc1", {2 * w, 2 * w, 4}});
    L.push_back({"biflow_lowest/enc2", {2 * w, 4 * w, 4}});
    L.push_back({"biflow_lowest/dec1", {4 * w, 2 * w, 3}});
    L.push_back({"biflow_lowest/dec2", {2 * w, w, 3}});
    L.push_back({"biflow_lowest/head", {w, 6, 3}});

    L.push_back({"biflow/fuse", {2 * w, w, 3}});
    L.push_back({"biflow/enc1", {2 * w + 4, 2 * w, 4}});
    L.push_back({"biflow/enc2", {2 * w, 4 * w, 4}});
    L.push_back({"biflow/dec1", {4 * w, 2 * w, 3}});
    L.push_back({"biflow/dec2", {2 * w, w, 3}});
    L.push_back({"biflow/head", {w, 6, 3}});

    L.push_back({"tflow/entry", {4 * w + 4, w, 1}});
    L.push_back({"tflow/enc1", {w, 2 * w, 4}});
    L.push_back({"tflow/enc2", {2 * w, 4 * w, 4}});
    L.push_back({"tflow/dec1", {4 * w, 2 * w, 3}});
    L.push_back({"tflow/dec2", {2 * w, w, 3}});
    L.push_back({"tflow/head", {w, 5, 3}});

    const int shuffled = 4 * w / (M * M);  // four feature maps through depth-to-space
    L.push_back({"refine/enc1", {shuffled + 16, w, 4}});  // + 2 flows (4ch) + 4 images (12ch)
    L.push_back({"refine/enc2", {w, 2 * w, 4}});
    L.push_back({"refine/enc3", {2 * w, 4 * w, 4}});
    L.push_back({"refine/mid", {4 * w, 4 * w, 3}});
    L.push_back({"refine/dec2", {6 * w, 2 * w, 3}});
    L.push_back({"refine/dec1", {3 * w, w, 3}});
    L.push_back({"refine/head", {w, 4, 3}});
    return L;
}

// Immutable-after-setup parameter container. Lookup is by canonical layer
// name; blocks pull spans from here so sharing a layer across scales or
// directions is literal (same storage).
class WeightStore {
public:
    WeightStore() = default;

    static WeightStore zeros(int M = 4, int width = 64) {
        WeightStore s(M, width);
        return s;
    }

    // Xavier-uniform init: one mt19937 stream over the canonical layer
    // order, U(-a, a) with a = sqrt(6 / (fan_in + fan_out)) where the fans
    // include the kernel area. Biases stay zero. mt19937 output is fixed by
    // the standard, so a seed fully determines every parameter on every
    // platform.
    static WeightStore xavier(std::uint32_t seed, int M = 4, int width = 64) {
        WeightStore s(M, width);
        std::mt19937 gen(seed);
        for (size_t li = 0; li < s.layers_.size(); ++li) {
            const ConvSpec& sp = s.layers_[li].spec;
            const double fan_in = static_cast<double>(sp.in_channels) * sp.kernel * sp.kernel;
            const double fan_out = static_cast<double>(sp.out_channels) * sp.kernel * sp.kernel;
            const double a = std::sqrt(6.0 / (fan_in + fan_out));
            for (float& v : s.w_[li]) {
                const double u = gen() * (1.0 / 4294967296.0);  // [0, 1)
                v = static_cast<float>((2.0 * u - 1.0) * a);
            }
        }
        return s;
    }

    int module_scale() const { return m_; }
    int feature_width() const { return width_; }
    const std::vector<LayerSpec>& layers() const { return layers_; }

    const std::vector<float>& weights(const std::string& layer) const { return w_[index(layer)]; }
    const std::vector<float>& bias(const std::string& layer) const { return b_[index(layer)]; }
    const ConvSpec& spec(const std::string& layer) const { return layers_[index(layer)].spec; }

    size_t parameter_count() const {
        size_t n = 0;
        for (size_t i = 0; i < layers_.size(); ++i) n += w_[i].size() + b_[i].size();
        return n;
    }

    // Replacement keeps shapes fixed; meant for setup and experiments
    // (e.g. zeroing prediction heads), not for mutation mid-inference.
    void replace_weights(const std::string& layer, std::vector<float> w) {
        const size_t i = index(layer);
        if (w.size() != w_[i].size()) {
            throw WeightError("replace_weights: " + layer + " expects " + std::to_string(w_[i].size()) +
                              " values, got " + std::to_string(w.size()));
        }
        w_[i] = std::move(w);
    }
    void replace_bias(const std::string& layer, std::vector<float> b) {
        const size_t i = index(layer);
        if (b.size() != b_[i].size()) {
            throw WeightError("replace_bias: " + layer + " expects " + std::to_string(b_[i].size()) +
                              " values, got " + std::to_string(b.size()));
        }
        b_[i] = std::move(b);
    }

private:
    WeightStore(int M, int width) : m_(M), width_(width), layers_(model_layers(M, width)) {
        w_.resize(layers_.size());
        b_.resize(layers_.size());
        for (size_t i = 0; i < layers_.size(); ++i) {
            w_[i].assign(layers_[i].spec.weight_count(), 0.0f);
            b_[i].assign(static_cast<size_t>(layers_[i].spec.out_channels), 0.0f);
            index_[layers_[i].name] = i;
        }
    }
    size_t index(const std::string& layer) const {
        auto it = index_.find(layer);
        if (it == index_.end()) throw WeightError("unknown layer '" + layer + "'");
        return it->second;
    }

    int m_ = 4, width_ = 64;
    std::vector<LayerSpec> layers_;
    std::unordered_map<std::string, size_t> index_;
    std::vector<std::vector<float>> w_, b_;

    friend WeightStore load_weights(const std::string& path);
};

inline WeightStore xavier_init(std::uint32_t seed, int M = 4, int width = 64) {
    return WeightStore::xavier(seed, M, width);
}

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& is, const char* what) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw FormatError(std::string("weight file truncated reading ") + what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace detail

// Binary weight container. Little-endian throughout:
//   "XVFI" | u32 version=1 | u32 M | u32 feature_width | u32 tensor_count
//   then per tensor: u32 name_len | name | u8 dtype (0 = f32) | u8 rank |
//   u32 dims[rank] | payload.
// Tensors are written in canonical order, "<layer>/weight" with dims
// (out, in, k, k) then "<layer>/bias" with dims (out).
inline void save_weights(const WeightStore& store, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os.write("XVFI", 4);
    detail::put_u32(os, 1);
    detail::put_u32(os, static_cast<std::uint32_t>(store.module_scale()));
    detail::put_u32(os, static_cast<std::uint32_t>(store.feature_width()));
    detail::put_u32(os, static_cast<std::uint32_t>(store.layers().size() * 2));
    auto put_tensor = [&](const std::string& name, std::span<const std::uint32_t> dims,
                          std::span<const float> data) {
        detail::put_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        os.put(static_cast<char>(0));  // dtype f32
        os.put(static_cast<char>(dims.size()));
        for (std::uint32_t d : dims) detail::put_u32(os, d);
        os.write(reinterpret_cast<const char*>(data.data()),
                 static_cast<std::streamsize>(data.size() * sizeof(float)));
    };
    for (const LayerSpec& l : store.layers()) {
        const ConvSpec& sp = l.spec;
        const std::uint32_t wd[4] = {static_cast<std::uint32_t>(sp.out_channels),
                                     static_cast<std::uint32_t>(sp.in_channels),
                                     static_cast<std::uint32_t>(sp.kernel),
                                     static_cast<std::uint32_t>(sp.kernel)};
        put_tensor(l.name + "/weight", std::span<const std::uint32_t>(wd, 4), store.weights(l.name));
        const std::uint32_t bd[1] = {static_cast<std::uint32_t>(sp.out_channels)};
        put_tensor(l.name + "/bias", std::span<const std::uint32_t>(bd, 1), store.bias(l.name));
    }
    if (!os) throw IoError("short write to '" + path + "'");
}

inline WeightStore load_weights(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path + "' for reading");
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "XVFI", 4) != 0) {
        throw FormatError("'" + path + "' is not a weight file (bad magic)");
    }
    const std::uint32_t version = detail::get_u32(is, "version");
    if (version != 1) throw FormatError("unsupported weight file version " + std::to_string(version));
    const std::uint32_t m = detail::get_u32(is, "module scale");
    const std::uint32_t width = detail::get_u32(is, "feature width");
    if ((m != 2 && m != 4) || width == 0 || width > 4096) {
        throw WeightError("implausible hyperparams in '" + path + "': M=" + std::to_string(m) +
                          " width=" + std::to_string(width));
    }
    const std::uint32_t count = detail::get_u32(is, "tensor count");

    struct Entry {
        std::vector<std::uint32_t> dims;
        std::vector<float> data;
    };
    std::unordered_map<std::string, Entry> entries;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = detail::get_u32(is, "name length");
        if (name_len > 4096) throw FormatError("implausible tensor name length " + std::to_string(name_len));
        std::string name(name_len, '\0');
        if (!is.read(name.data(), name_len)) throw FormatError("weight file truncated reading tensor name");
        int dtype = is.get();
        int rank = is.get();
        if (dtype == EOF || rank == EOF) throw FormatError("weight file truncated reading tensor header");
        if (dtype != 0) throw FormatError("tensor '" + name + "' has unsupported dtype " + std::to_string(dtype));
        if (rank < 1 || rank > 4) throw FormatError("tensor '" + name + "' has unsupported rank " + std::to_string(rank));
        Entry e;
        std::uint64_t n = 1;
        for (int d = 0; d < rank; ++d) {
            e.dims.push_back(detail::get_u32(is, "tensor dims"));
            n *= e.dims.back();
        }
        if (n == 0 || n > (1ull << 28)) throw FormatError("tensor '" + name + "' has implausible element count");
        e.data.resize(n);
        if (!is.read(reinterpret_cast<char*>(e.data.data()), static_cast<std::streamsize>(n * sizeof(float)))) {
            throw FormatError("weight file truncated reading payload of '" + name + "'");
        }
        if (!entries.emplace(std::move(name), std::move(e)).second) {
            throw WeightError("duplicate tensor in '" + path + "'");
        }
    }

    WeightStore store(static_cast<int>(m), static_cast<int>(width));
    size_t consumed = 0;
    for (size_t li = 0; li < store.layers_.size(); ++li) {
        const LayerSpec& l = store.layers_[li];
        const ConvSpec& sp = l.spec;
        auto wit = entries.find(l.name + "/weight");
        if (wit == entries.end()) throw WeightError("missing tensor '" + l.name + "/weight' in '" + path + "'");
        const std::vector<std::uint32_t> want_w = {static_cast<std::uint32_t>(sp.out_channels),
                                                   static_cast<std::uint32_t>(sp.in_channels),
                                                   static_cast<std::uint32_t>(sp.kernel),
                                                   static_cast<std::uint32_t>(sp.kernel)};
        if (wit->second.dims != want_w) {
            throw WeightError("tensor '" + l.name + "/weight' has wrong shape in '" + path + "'");
        }
        store.w_[li] = std::move(wit->second.data);
        auto bit = entries.find(l.name + "/bias");
        if (bit == entries.end()) throw WeightError("missing tensor '" + l.name + "/bias' in '" + path + "'");
        if (bit->second.dims != std::vector<std::uint32_t>{static_cast<std::uint32_t>(sp.out_channels)}) {
            throw WeightError("tensor '" + l.name + "/bias' has wrong shape in '" + path + "'");
        }
        store.b_[li] = std::move(bit->second.data);
        consumed += 2;
    }
    if (consumed != entries.size()) {
        for (const auto& [name, e] : entries) {
            bool known = false;
            for (const LayerSpec& l : store.layers_) {
                if (name == l.name + "/weight" || name == l.name + "/bias") {
                    known = true;
                    break;
                }
            }
            if (!known) throw WeightError("unknown tensor '" + name + "' in '" + path + "'");
        }
    }
    return store;
}

namespace detail {

inline Tensor conv_layer(const WeightStore& w, const std::string& name, std::span<const ConvIn> ins) {
    return conv2d_multi(ins, w.weights(name), w.bias(name), w.spec(name));
}

inline Tensor conv_layer(const WeightStore& w, const std::string& name, const Tensor& in) {
    ConvIn ci{&in, false, 0};
    return conv_layer(w, name, std::span<const ConvIn>(&ci, 1));
}

// enc(x2 stride) x2 -> nn-up + conv x2 -> head. Shared spine of all three
// flow networks; enc1 input is a virtual concat. Upsampling is fused into
// the decoder convs (bitwise equal to materializing nn_upscale2 first).
inline Tensor flow_autoencoder(std::span<const ConvIn> enc1_in, const WeightStore& w,
                               const std::string& prefix) {
    Tensor e1 = relu(conv_layer(w, prefix + "/enc1", enc1_in));
    Tensor e2 = relu(conv_layer(w, prefix + "/enc2", e1));
    e1.release();
    ConvIn up1{&e2, true, 0};
    Tensor d1 = relu(conv_layer(w, prefix + "/dec1", std::span<const ConvIn>(&up1, 1)));
    e2.release();
    ConvIn up2{&d1, true, 0};
    Tensor d2 = relu(conv_layer(w, prefix + "/dec2", std::span<const ConvIn>(&up2, 1)));
    d1.release();
    return conv_layer(w, prefix + "/head", d2);
}

}  // namespace detail

// Shared feature extractor: reduces a 3-channel frame by the module scale
// factor into `width` channels. The stride-1 front conv is evaluated in
// row strips fused with the first stride-2 conv so its full-resolution
// activation never materializes.
inline Tensor feature_extract(const Tensor& frame, const WeightStore& w) {
    if (frame.channels() != 3) throw ShapeError("feature_extract: expected 3-channel frame, got " + frame.shape());
    const int M = w.module_scale();
    if (frame.height() % M != 0 || frame.width() % M != 0) {
        throw ShapeError("feature_extract: dims " + frame.shape() + " not divisible by module scale " +
                         std::to_string(M));
    }
    const ConvSpec& s1 = w.spec("feat/conv1");
    const ConvSpec& s2 = w.spec("feat/conv2");
    const int h = frame.height(), wd = frame.width();
    const int h2 = h / 2, w2 = wd / 2;

    Tensor front(s2.out_channels, h2, w2);
    const int strip = 64;  // conv2 output rows per chunk
    Tensor buf(s1.out_channels, std::min(h, 2 * strip + 3), wd);
    for (int oa = 0; oa < h2; oa += strip) {
        const int ob = std::min(h2, oa + strip);
        const int ra = std::max(0, 2 * oa - 1);
        const int rb = std::min(h, 2 * (ob - 1) + 3);
        detail::ConvIn src{&frame, false, 0};
        detail::conv2d_core(std::span<const detail::ConvIn>(&src, 1), h, wd, w.weights("feat/conv1"),
                            w.bias("feat/conv1"), s1, buf, ra, rb, ra);
        // relu only the rows just written
        parallel_for(static_cast<std::int64_t>(s1.out_channels) * (rb - ra), 8, [&](std::int64_t i) {
            const int c = static_cast<int>(i / (rb - ra));
            float* r = buf.row(c, static_cast<int>(i % (rb - ra)));
            for (int x = 0; x < wd; ++x) r[x] = r[x] > 0.0f ? r[x] : 0.0f;
        });
        detail::ConvIn mid{&buf, false, ra};
        detail::conv2d_core(std::span<const detail::ConvIn>(&mid, 1), h, wd, w.weights("feat/conv2"),
                            w.bias("feat/conv2"), s2, front, oa, ob, 0);
    }
    buf.release();

    Tensor feat;
    if (M == 4) {
        relu_inplace(front);
        feat = detail::conv_layer(w, "feat/conv3", front);
        front.release();
    } else {
        feat = std::move(front);  // the last strided conv stays pre-activation
    }

    Tensor r = resblock(feat, w.weights("feat/rb1/conv1"), w.bias("feat/rb1/conv1"),
                        w.weights("feat/rb1/conv2"), w.bias("feat/rb1/conv2"), w.spec("feat/rb1/conv1"));
    r = resblock(r, w.weights("feat/rb2/conv1"), w.bias("feat/rb2/conv1"), w.weights("feat/rb2/conv2"),
                 w.bias("feat/rb2/conv2"), w.spec("feat/rb2/conv1"));
    // outer skip around both residual blocks
    float* dst = r.data().data();
    const float* src = feat.data().data();
    parallel_for(static_cast<std::int64_t>(r.size()), 1 << 20, [&](std::int64_t i) { dst[i] += src[i]; });
    return r;
}

// Builds the feature pyramid: level 0 is the extractor output, each deeper
// level applies the single shared stride-2 conv once more (recursive, no
// activation). Returns S+1 levels.
inline std::vector<Tensor> pyramid_extend(Tensor c0, int levels_beyond, const WeightStore& w) {
    if (levels_beyond < 0) throw ValueError("pyramid_extend: negative level count");
    std::vector<Tensor> levels;
    levels.reserve(static_cast<size_t>(levels_beyond) + 1);
    levels.push_back(std::move(c0));
    for (int s = 1; s <= levels_beyond; ++s) {
        levels.push_back(detail::conv_layer(w, "feat/pyr", levels.back()));
    }
    return levels;
}

// Output bundle of the bidirectional flow networks: both directions plus
// their importance logits (raw, pre-exp).
struct BiFlowOut {
    FlowField f01, f10;
    Tensor z01, z10;  // 1 x H x W each
};

namespace detail {

inline BiFlowOut split_biflow_head(Tensor head6) {
    BiFlowOut out;
    out.f01 = FlowField(take_channels(head6, 0, 2));
    out.f10 = FlowField(take_channels(head6, 2, 2));
    out.z01 = take_channels(head6, 4, 1);
    out.z10 = take_channels(head6, 5, 1);
    return out;
}

}  // namespace detail

// Bidirectional flow estimation at the coarsest pyramid level, from
// scratch (no incoming flows).
inline BiFlowOut biflownet_lowest(const Tensor& c0, const Tensor& c1, const WeightStore& w) {
    if (!c0.same_shape(c1)) throw ShapeError("biflownet_lowest: feature shapes differ: " + c0.shape() + " vs " + c1.shape());
    if (c0.height() % 4 != 0 || c0.width() % 4 != 0) {
        throw ShapeError("biflownet_lowest: dims " + c0.shape() + " must be divisible by 4");
    }
    detail::ConvIn ins[2] = {{&c0, false, 0}, {&c1, false, 0}};
    Tensor head = detail::flow_autoencoder(std::span<const detail::ConvIn>(ins, 2), w, "biflow_lowest");
    return detail::split_biflow_head(std::move(head));
}

// Scale-shared bidirectional flow refinement: warps each feature map by the
// incoming flow of the other direction, fuses, and predicts residual flows
// plus fresh logits. The same parameters serve every scale (and both
// directions of the fuse conv).
inline BiFlowOut biflownet_shared(const Tensor& c0, const Tensor& c1, const FlowField& f01_init,
                                  const FlowField& f10_init, const WeightStore& w) {
    if (!c0.same_shape(c1)) throw ShapeError("biflownet_shared: feature shapes differ");
    if (f01_init.height() != c0.height() || f01_init.width() != c0.width()) {
        throw ShapeError("biflownet_shared: flow " + std::to_string(f01_init.height()) + "x" +
                         std::to_string(f01_init.width()) + " vs features " + c0.shape());
    }
    if (c0.height() % 4 != 0 || c0.width() % 4 != 0) {
        throw ShapeError("biflownet_shared: dims " + c0.shape() + " must be divisible by 4");
    }
    Tensor warped1 = backward_warp(c1, f01_init);
    Tensor warped0 = backward_warp(c0, f10_init);
    detail::ConvIn in01[2] = {{&c0, false, 0}, {&warped1, false, 0}};
    Tensor fused01 = detail::conv_layer(w, "biflow/fuse", std::span<const detail::ConvIn>(in01, 2));
    warped1.release();
    detail::ConvIn in10[2] = {{&c1, false, 0}, {&warped0, false, 0}};
    Tensor fused10 = detail::conv_layer(w, "biflow/fuse", std::span<const detail::ConvIn>(in10, 2));
    warped0.release();

    detail::ConvIn ae_in[4] = {{&fused01, false, 0},
                               {&fused10, false, 0},
                               {&f01_init.tensor(), false, 0},
                               {&f10_init.tensor(), false, 0}};
    Tensor head = detail::flow_autoencoder(std::span<const detail::ConvIn>(ae_in, 4), w, "biflow");
    fused01.release();
    fused10.release();
    BiFlowOut out = detail::split_biflow_head(std::move(head));
    // heads are residuals on the incoming flows; logits stay raw
    float* u0 = out.f01.tensor().data().data();
    const float* i0 = f01_init.tensor().data().data();
    for (size_t i = 0; i < out.f01.tensor().size(); ++i) u0[i] += i0[i];
    float* u1 = out.f10.tensor().data().data();
    const float* i1 = f10_init.tensor().data().data();
    for (size_t i = 0; i < out.f10.tensor().size(); ++i) u1[i] += i1[i];
    return out;
}

struct TFlowOut {
    FlowField ft0, ft1;
    Tensor aux;  // 5th head channel; reserved by the architecture, unused downstream
};

// Time-conditioned flow network: refines the reversal-derived flows from
// time t toward both inputs, conditioning on the features and their
// t-aligned warps. Runs at feature resolution.
inline TFlowOut tflownet(const Tensor& c0, const Tensor& c1, const FlowField& ft0_init,
                         const FlowField& ft1_init, const WeightStore& w) {
    if (!c0.same_shape(c1)) throw ShapeError("tflownet: feature shapes differ");
    if (ft0_init.height() != c0.height() || ft0_init.width() != c0.width()) {
        throw ShapeError("tflownet: flow dims do not match features " + c0.shape());
    }
    if (c0.height() % 4 != 0 || c0.width() % 4 != 0) {
        throw ShapeError("tflownet: dims " + c0.shape() + " must be divisible by 4");
    }
    Tensor ct0 = backward_warp(c0, ft0_init);
    Tensor ct1 = backward_warp(c1, ft1_init);
    detail::ConvIn entry_in[6] = {{&c0, false, 0},
                                  {&c1, false, 0},
                                  {&ct0, false, 0},
                                  {&ct1, false, 0},
                                  {&ft0_init.tensor(), false, 0},
                                  {&ft1_init.tensor(), false, 0}};
    Tensor entry = relu(detail::conv_layer(w, "tflow/entry", std::span<const detail::ConvIn>(entry_in, 6)));
    ct0.release();
    ct1.release();
    detail::ConvIn ae_in{&entry, false, 0};
    Tensor head = detail::flow_autoencoder(std::span<const detail::ConvIn>(&ae_in, 1), w, "tflow");
    entry.release();

    TFlowOut out;
    out.ft0 = FlowField(take_channels(head, 0, 2));
    out.ft1 = FlowField(take_channels(head, 2, 2));
    out.aux = take_channels(head, 4, 1);
    float* u0 = out.ft0.tensor().data().data();
    const float* i0 = ft0_init.tensor().data().data();
    for (size_t i = 0; i < out.ft0.tensor().size(); ++i) u0[i] += i0[i];
    float* u1 = out.ft1.tensor().data().data();
    const float* i1 = ft1_init.tensor().data().data();
    for (size_t i = 0; i < out.ft1.tensor().size(); ++i) u1[i] += i1[i];
    return out;
}

struct RefineOut {
    Tensor mask;      // 1 x H x W, sigmoid applied
    Tensor residual;  // 3 x H x W, raw
};

// Refinement U-Net at image resolution. Feature context enters through
// depth-to-space of [C0, C1, warp(C0, ft0), warp(C1, ft1)]; the head yields
// the occlusion blend mask (sigmoid) and an image-space residual.
inline RefineOut refine(const Tensor& c0, const Tensor& c1, const FlowField& ft0, const FlowField& ft1,
                        const FlowField& ft0_full, const FlowField& ft1_full, const Tensor& i0,
                        const Tensor& i1, const Tensor& it0, const Tensor& it1, const WeightStore& w) {
    const int M = w.module_scale();
    if (i0.channels() != 3 || !i0.same_shape(i1) || !i0.same_shape(it0) || !i0.same_shape(it1)) {
        throw ShapeError("refine: frames must be matching 3-channel tensors");
    }
    if (c0.height() * M != i0.height() || c0.width() * M != i0.width()) {
        throw ShapeError("refine: features " + c0.shape() + " do not match frames " + i0.shape() +
                         " at module scale " + std::to_string(M));
    }
    if (ft0_full.height() != i0.height() || ft0_full.width() != i0.width()) {
        throw ShapeError("refine: full-resolution flows must match frames");
    }
    if (i0.height() % 8 != 0 || i0.width() % 8 != 0) {
        throw ShapeError("refine: frame dims " + i0.shape() + " must be divisible by 8");
    }

    Tensor ct0 = backward_warp(c0, ft0);
    Tensor ct1 = backward_warp(c1, ft1);
    const Tensor* ps_parts[4] = {&c0, &c1, &ct0, &ct1};
    Tensor ps = detail::pixel_shuffle_multi(std::span<const Tensor* const>(ps_parts, 4), M);
    ct0.release();
    ct1.release();

    detail::ConvIn e1_in[7] = {{&ps, false, 0},
                               {&ft0_full.tensor(), false, 0},
                               {&ft1_full.tensor(), false, 0},
                               {&i0, false, 0},
                               {&i1, false, 0},
                               {&it0, false, 0},
                               {&it1, false, 0}};
    Tensor e1 = relu(detail::conv_layer(w, "refine/enc1", std::span<const detail::ConvIn>(e1_in, 7)));
    ps.release();
    Tensor e2 = relu(detail::conv_layer(w, "refine/enc2", e1));
    Tensor e3 = relu(detail::conv_layer(w, "refine/enc3", e2));
    Tensor mid = relu(detail::conv_layer(w, "refine/mid", e3));
    e3.release();
    detail::ConvIn d2_in[2] = {{&mid, true, 0}, {&e2, false, 0}};
    Tensor d2 = relu(detail::conv_layer(w, "refine/dec2", std::span<const detail::ConvIn>(d2_in, 2)));
    mid.release();
    e2.release();
    detail::ConvIn d1_in[2] = {{&d2, true, 0}, {&e1, false, 0}};
    Tensor d1 = relu(detail::conv_layer(w, "refine/dec1", std::span<const detail::ConvIn>(d1_in, 2)));
    d2.release();
    e1.release();
    detail::ConvIn head_in{&d1, true, 0};
    Tensor head = detail::conv_layer(w, "refine/head", std::span<const detail::ConvIn>(&head_in, 1));
    d1.release();

    RefineOut out;
    out.mask = take_channels(head, 0, 1);
    sigmoid_inplace(out.mask);
    out.residual = take_channels(head, 1, 3);
    return out;
}

}  // namespace xvfi
