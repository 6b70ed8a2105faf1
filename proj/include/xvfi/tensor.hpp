#pragma once

// Dense CHW float tensor plus the image-processing kernels the networks are
// built from: zero-padded convolution, nearest/bilinear/bicubic resampling,
// pixel shuffle, channel concat.
//
// Determinism contract: every output element is produced by one fixed
// serial reduction (double accumulator where values are summed), so results
// are identical for any thread count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "xvfi/common.hpp"

namespace xvfi {

class Tensor {
public:
    Tensor() = default;
    Tensor(int channels, int height, int width, float fill = 0.0f)
        : c_(channels), h_(height), w_(width) {
        if (channels <= 0 || height <= 0 || width <= 0) {
            throw ShapeError("Tensor: dims must be positive, got " + shape_str(channels, height, width));
        }
        data_.assign(static_cast<size_t>(channels) * height * width, fill);
    }
    static Tensor from_data(int channels, int height, int width, std::vector<float> data) {
        Tensor t(channels, height, width);
        if (data.size() != t.data_.size()) {
            throw ShapeError("Tensor::from_data: " + std::to_string(data.size()) + " values for shape " +
                             t.shape());
        }
        t.data_ = std::move(data);
        return t;
    }

    int channels() const { return c_; }
    int height() const { return h_; }
    int width() const { return w_; }
    bool empty() const { return data_.empty(); }
    size_t size() const { return data_.size(); }
    std::string shape() const { return shape_str(c_, h_, w_); }

    float& at(int c, int y, int x) { return data_[idx(c, y, x)]; }
    float at(int c, int y, int x) const { return data_[idx(c, y, x)]; }
    float* row(int c, int y) { return data_.data() + idx(c, y, 0); }
    const float* row(int c, int y) const { return data_.data() + idx(c, y, 0); }
    float* plane(int c) { return data_.data() + idx(c, 0, 0); }
    const float* plane(int c) const { return data_.data() + idx(c, 0, 0); }
    std::span<float> data() { return data_; }
    std::span<const float> data() const { return data_; }

    // Frees the storage. Long pipelines drop large intermediates eagerly.
    void release() {
        data_.clear();
        data_.shrink_to_fit();
        c_ = h_ = w_ = 0;
    }

    bool same_shape(const Tensor& o) const { return c_ == o.c_ && h_ == o.h_ && w_ == o.w_; }

    static std::string shape_str(int c, int h, int w) {
        return std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
    }

private:
    size_t idx(int c, int y, int x) const {
        return (static_cast<size_t>(c) * h_ + y) * w_ + x;
    }
    int c_ = 0, h_ = 0, w_ = 0;
    std::vector<float> data_;
};

// Geometry of one conv layer. Kernel size fixes stride and padding:
// 1 -> stride 1 pad 0, 3 -> stride 1 pad 1, 4 -> stride 2 pad 1.
struct ConvSpec {
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 3;
    bool has_bias = true;

    int stride() const { return kernel == 4 ? 2 : 1; }
    int padding() const { return kernel == 1 ? 0 : 1; }
    size_t weight_count() const {
        return static_cast<size_t>(out_channels) * in_channels * kernel * kernel;
    }
    void validate() const {
        if (kernel != 1 && kernel != 3 && kernel != 4) {
            throw ValueError("ConvSpec: kernel must be 1, 3 or 4, got " + std::to_string(kernel));
        }
        if (in_channels <= 0 || out_channels <= 0) {
            throw ShapeError("ConvSpec: channels must be positive, got in=" + std::to_string(in_channels) +
                             " out=" + std::to_string(out_channels));
        }
    }
};

namespace detail {

// One logical input of a convolution. A conv can read a virtual channel-
// concatenation of several tensors, optionally viewing a tensor through a
// nearest-neighbor x2 upscale (up2), and a tensor may hold only a horizontal
// strip of the logical plane (row_offset = logical row of its first stored
// row). This lets the big decoder/fused stages run without materializing
// concatenated or upscaled inputs.
struct ConvIn {
    const Tensor* t = nullptr;
    bool up2 = false;
    int row_offset = 0;

    int logical_width() const { return up2 ? t->width() * 2 : t->width(); }
    // Physical row index backing logical row iy, or -1 if not stored.
    int phys_row(int iy) const {
        int r = (up2 ? iy / 2 : iy) - row_offset;
        return (r >= 0 && r < t->height()) ? r : -1;
    }
};

// Core convolution: writes output rows [oy_begin, oy_end) of `out`, stored
// at out rows [oy_begin - out_row_base, ...). Logical input is the channel-
// concat of `ins` with logical size in_h x in_w; zero padding outside. Per
// output element the reduction order is fixed: bias, then channels in
// concat order, kernel rows, kernel columns — independent of threading
// (rows are independent work items).
inline void conv2d_core(std::span<const ConvIn> ins, int in_h, int in_w,
                        std::span<const float> weights, std::span<const float> bias,
                        const ConvSpec& spec, Tensor& out, int oy_begin, int oy_end,
                        int out_row_base = 0) {
    const int k = spec.kernel, s = spec.stride(), p = spec.padding();
    const int w_out = out.width();
    const int c_out = spec.out_channels;
    const int c_in = spec.in_channels;

    parallel_for(oy_end - oy_begin, 1, [&](std::int64_t task) {
        const int oy = oy_begin + static_cast<int>(task);
        std::vector<double> acc(static_cast<size_t>(c_out) * w_out);
        for (int oc = 0; oc < c_out; ++oc) {
            double b = spec.has_bias ? static_cast<double>(bias[oc]) : 0.0;
            std::fill_n(acc.begin() + static_cast<size_t>(oc) * w_out, w_out, b);
        }
        // Scratch for up2 row expansion and stride-2 deinterleaving.
        std::vector<float> scratch(static_cast<size_t>(in_w) + 2);
        std::vector<float> even(static_cast<size_t>(in_w) / 2 + 1), odd(static_cast<size_t>(in_w) / 2 + 1);

        int ic = 0;  // global input channel in concat order
        for (const ConvIn& in : ins) {
            for (int lc = 0; lc < in.t->channels(); ++lc, ++ic) {
                for (int ky = 0; ky < k; ++ky) {
                    const int iy = oy * s + ky - p;
                    if (iy < 0 || iy >= in_h) continue;  // zero padding contributes nothing
                    const int pr = in.phys_row(iy);
                    if (pr < 0) throw ShapeError("conv2d: input strip does not cover logical row " + std::to_string(iy));
                    const float* row;
                    if (in.up2) {
                        const float* src = in.t->row(lc, pr);
                        for (int x = 0; x < in_w; ++x) scratch[x] = src[x >> 1];
                        row = scratch.data();
                    } else {
                        row = in.t->row(lc, pr);
                    }
                    const size_t wbase0 = (static_cast<size_t>(ic) * k + ky) * k;
                    if (s == 2) {
                        // Deinterleave once; every kx tap then walks unit-stride.
                        const int half = in_w / 2;
                        for (int j = 0; j < half; ++j) {
                            even[j] = row[2 * j];
                            odd[j] = row[2 * j + 1];
                        }
                        for (int oc = 0; oc < c_out; ++oc) {
                            const float* wp = weights.data() + (static_cast<size_t>(oc) * c_in * k * k + wbase0);
                            double* a = acc.data() + static_cast<size_t>(oc) * w_out;
                            // x = 2*ox + kx - 1 for kx = 0..3 maps to
                            // odd[ox-1], even[ox], odd[ox], even[ox+1].
                            {
                                const double w = wp[0];
                                for (int ox = 1; ox < w_out; ++ox) a[ox] += w * odd[ox - 1];
                            }
                            {
                                const double w = wp[1];
                                for (int ox = 0; ox < w_out; ++ox) a[ox] += w * even[ox];
                            }
                            {
                                const double w = wp[2];
                                const int hi = std::min(w_out, half);
                                for (int ox = 0; ox < hi; ++ox) a[ox] += w * odd[ox];
                            }
                            {
                                const double w = wp[3];
                                const int hi = std::min(w_out, half - 1);
                                for (int ox = 0; ox < hi; ++ox) a[ox] += w * even[ox + 1];
                            }
                        }
                    } else {
                        for (int oc = 0; oc < c_out; ++oc) {
                            const float* wp = weights.data() + (static_cast<size_t>(oc) * c_in * k * k + wbase0);
                            double* a = acc.data() + static_cast<size_t>(oc) * w_out;
                            for (int kx = 0; kx < k; ++kx) {
                                const double w = wp[kx];
                                const int off = kx - p;  // x = ox + off
                                const int lo = std::max(0, -off);
                                const int hi = std::min(w_out, in_w - off);
                                const float* r = row + off;
                                for (int ox = lo; ox < hi; ++ox) a[ox] += w * r[ox];
                            }
                        }
                    }
                }
            }
        }
        for (int oc = 0; oc < c_out; ++oc) {
            float* dst = out.row(oc, oy - out_row_base);
            const double* a = acc.data() + static_cast<size_t>(oc) * w_out;
            for (int ox = 0; ox < w_out; ++ox) dst[ox] = static_cast<float>(a[ox]);
        }
    });
}

inline void validate_conv_args(std::span<const ConvIn> ins, int in_h, int in_w,
                               std::span<const float> weights, std::span<const float> bias,
                               const ConvSpec& spec) {
    spec.validate();
    int total_c = 0;
    for (const ConvIn& in : ins) {
        if (!in.t || in.t->empty()) throw ShapeError("conv2d: empty input tensor");
        if (in.logical_width() != in_w) {
            throw ShapeError("conv2d: input width " + std::to_string(in.logical_width()) +
                             " does not match first input width " + std::to_string(in_w));
        }
        total_c += in.t->channels();
    }
    if (total_c != spec.in_channels) {
        throw ShapeError("conv2d: input has " + std::to_string(total_c) + " channels (" +
                         std::to_string(in_h) + "x" + std::to_string(in_w) + ") but spec expects " +
                         std::to_string(spec.in_channels) + " (weights " +
                         std::to_string(spec.out_channels) + "x" + std::to_string(spec.in_channels) + "x" +
                         std::to_string(spec.kernel) + "x" + std::to_string(spec.kernel) + ")");
    }
    if (weights.size() != spec.weight_count()) {
        throw ShapeError("conv2d: weight count " + std::to_string(weights.size()) + " does not match spec " +
                         std::to_string(spec.weight_count()));
    }
    if (spec.has_bias && bias.size() != static_cast<size_t>(spec.out_channels)) {
        throw ShapeError("conv2d: bias count " + std::to_string(bias.size()) + " does not match out channels " +
                         std::to_string(spec.out_channels));
    }
    if (spec.stride() == 2 && (in_h % 2 != 0 || in_w % 2 != 0)) {
        throw ShapeError("conv2d: stride-2 conv needs even input dims, got " + std::to_string(in_h) + "x" +
                         std::to_string(in_w));
    }
}

inline std::pair<int, int> conv_out_dims(int in_h, int in_w, const ConvSpec& spec) {
    const int k = spec.kernel, s = spec.stride(), p = spec.padding();
    return {(in_h + 2 * p - k) / s + 1, (in_w + 2 * p - k) / s + 1};
}

inline Tensor conv2d_multi(std::span<const ConvIn> ins, std::span<const float> weights,
                           std::span<const float> bias, const ConvSpec& spec) {
    const int in_h = ins[0].up2 ? ins[0].t->height() * 2 : ins[0].t->height();
    const int in_w = ins[0].logical_width();
    validate_conv_args(ins, in_h, in_w, weights, bias, spec);
    auto [h_out, w_out] = conv_out_dims(in_h, in_w, spec);
    Tensor out(spec.out_channels, h_out, w_out);
    conv2d_core(ins, in_h, in_w, weights, bias, spec, out, 0, h_out);
    return out;
}

}  // namespace detail

// Zero-padded 2D convolution, f32 data with f64 accumulation.
inline Tensor conv2d(const Tensor& input, std::span<const float> weights,
                     std::span<const float> bias, const ConvSpec& spec) {
    detail::ConvIn in{&input, false, 0};
    return detail::conv2d_multi(std::span<const detail::ConvIn>(&in, 1), weights, bias, spec);
}

inline void relu_inplace(Tensor& t) {
    float* d = t.data().data();
    const std::int64_t n = static_cast<std::int64_t>(t.size());
    parallel_for(n, 1 << 20, [&](std::int64_t i) { d[i] = d[i] > 0.0f ? d[i] : 0.0f; });
}

inline Tensor relu(Tensor t) {
    relu_inplace(t);
    return t;
}

// conv -> relu -> conv -> skip add. Both convs must preserve shape.
inline Tensor resblock(const Tensor& input, std::span<const float> w1, std::span<const float> b1,
                       std::span<const float> w2, std::span<const float> b2, const ConvSpec& spec) {
    if (spec.in_channels != spec.out_channels || spec.kernel != 3) {
        throw ShapeError("resblock: needs a shape-preserving 3x3 spec, got kernel " +
                         std::to_string(spec.kernel) + " " + std::to_string(spec.in_channels) + "->" +
                         std::to_string(spec.out_channels));
    }
    Tensor h = relu(conv2d(input, w1, b1, spec));
    Tensor out = conv2d(h, w2, b2, spec);
    h.release();
    const float* src = input.data().data();
    float* dst = out.data().data();
    const std::int64_t n = static_cast<std::int64_t>(out.size());
    parallel_for(n, 1 << 20, [&](std::int64_t i) { dst[i] += src[i]; });
    return out;
}

// Nearest-neighbor x2: out(c,y,x) = in(c, y/2, x/2).
inline Tensor nn_upscale2(const Tensor& t) {
    Tensor out(t.channels(), t.height() * 2, t.width() * 2);
    parallel_for(static_cast<std::int64_t>(t.channels()) * out.height(), 4, [&](std::int64_t i) {
        const int c = static_cast<int>(i / out.height());
        const int y = static_cast<int>(i % out.height());
        const float* src = t.row(c, y / 2);
        float* dst = out.row(c, y);
        for (int x = 0; x < out.width(); ++x) dst[x] = src[x >> 1];
    });
    return out;
}

namespace detail {

// Depth-to-space over a virtual channel concat (avoids materializing the
// concatenated input). All parts must share spatial dims.
inline Tensor pixel_shuffle_multi(std::span<const Tensor* const> parts, int r) {
    if (r < 1) throw ValueError("pixel_shuffle: factor must be >= 1, got " + std::to_string(r));
    int c_total = 0;
    for (const Tensor* p : parts) {
        if (p->height() != parts[0]->height() || p->width() != parts[0]->width()) {
            throw ShapeError("pixel_shuffle: input " + p->shape() + " does not match " + parts[0]->shape());
        }
        c_total += p->channels();
    }
    if (c_total % (r * r) != 0) {
        throw ShapeError("pixel_shuffle: channels " + std::to_string(c_total) +
                         " not divisible by r^2 = " + std::to_string(r * r));
    }
    // global channel index -> owning tensor + local channel
    std::vector<std::pair<const Tensor*, int>> chan(static_cast<size_t>(c_total));
    {
        int at = 0;
        for (const Tensor* p : parts)
            for (int lc = 0; lc < p->channels(); ++lc) chan[at++] = {p, lc};
    }
    Tensor out(c_total / (r * r), parts[0]->height() * r, parts[0]->width() * r);
    parallel_for(static_cast<std::int64_t>(out.channels()) * out.height(), 4, [&](std::int64_t i) {
        const int oc = static_cast<int>(i / out.height());
        const int oy = static_cast<int>(i % out.height());
        const int dy = oy % r, sy = oy / r;
        float* dst = out.row(oc, oy);
        for (int dx = 0; dx < r; ++dx) {
            auto [src_t, lc] = chan[static_cast<size_t>(oc) * r * r + dy * r + dx];
            const float* src = src_t->row(lc, sy);
            for (int sx = 0; sx * r + dx < out.width(); ++sx) dst[sx * r + dx] = src[sx];
        }
    });
    return out;
}

}  // namespace detail

// Depth-to-space: (C, H, W) -> (C/r^2, rH, rW). Channel index encodes the
// r x r sub-position row-major: in channel c -> (c/r^2, dy=c%r^2/r, dx=c%r).
inline Tensor pixel_shuffle(const Tensor& t, int r) {
    const Tensor* one = &t;
    return detail::pixel_shuffle_multi(std::span<const Tensor* const>(&one, 1), r);
}

// The networks always shuffle by the module scale factor; 4 is the default.
inline Tensor pixel_shuffle4(const Tensor& t) { return pixel_shuffle(t, 4); }

namespace detail {

// Catmull-Rom weights (a = -0.5) for fractional offset f in [0,1), taps at
// floor(src)-1 .. floor(src)+2.
inline void catmull_rom(double f, double w[4]) {
    const double f2 = f * f, f3 = f2 * f;
    w[0] = -0.5 * f3 + f2 - 0.5 * f;
    w[1] = 1.5 * f3 - 2.5 * f2 + 1.0;
    w[2] = -1.5 * f3 + 2.0 * f2 + 0.5 * f;
    w[3] = 0.5 * f3 - 0.5 * f2;
}

}  // namespace detail

// Integer-factor bicubic (Catmull-Rom) downscale with edge clamp, output
// clamped to [0,1]. Sample centers: src = (dst + 0.5) * factor - 0.5.
// Separable, horizontal pass first.
inline Tensor bicubic_downscale(const Tensor& t, int factor) {
    if (factor < 1) throw ValueError("bicubic_downscale: factor must be >= 1, got " + std::to_string(factor));
    if (t.height() % factor != 0 || t.width() % factor != 0) {
        throw ShapeError("bicubic_downscale: dims " + t.shape() + " not divisible by factor " +
                         std::to_string(factor));
    }
    const int oh = t.height() / factor, ow = t.width() / factor;

    // Tap positions/weights depend only on the output coordinate.
    auto make_taps = [&](int n_out, int n_in, std::vector<int>& base, std::vector<double>& wts) {
        base.resize(n_out);
        wts.resize(static_cast<size_t>(n_out) * 4);
        for (int o = 0; o < n_out; ++o) {
            const double src = (o + 0.5) * factor - 0.5;
            const double fl = std::floor(src);
            base[o] = static_cast<int>(fl);
            detail::catmull_rom(src - fl, &wts[static_cast<size_t>(o) * 4]);
            (void)n_in;
        }
    };
    std::vector<int> xbase, ybase;
    std::vector<double> xw, yw;
    make_taps(ow, t.width(), xbase, xw);
    make_taps(oh, t.height(), ybase, yw);

    Tensor mid(t.channels(), t.height(), ow);  // horizontal pass, unclamped
    parallel_for(static_cast<std::int64_t>(t.channels()) * t.height(), 4, [&](std::int64_t i) {
        const int c = static_cast<int>(i / t.height());
        const int y = static_cast<int>(i % t.height());
        const float* src = t.row(c, y);
        float* dst = mid.row(c, y);
        for (int ox = 0; ox < ow; ++ox) {
            const double* w = &xw[static_cast<size_t>(ox) * 4];
            double v = 0.0;
            for (int tap = 0; tap < 4; ++tap) {
                const int x = std::clamp(xbase[ox] - 1 + tap, 0, t.width() - 1);
                v += w[tap] * src[x];
            }
            dst[ox] = static_cast<float>(v);
        }
    });
    Tensor out(t.channels(), oh, ow);
    parallel_for(static_cast<std::int64_t>(t.channels()) * oh, 4, [&](std::int64_t i) {
        const int c = static_cast<int>(i / oh);
        const int oy = static_cast<int>(i % oh);
        const double* w = &yw[static_cast<size_t>(oy) * 4];
        float* dst = out.row(c, oy);
        for (int ox = 0; ox < ow; ++ox) {
            double v = 0.0;
            for (int tap = 0; tap < 4; ++tap) {
                const int y = std::clamp(ybase[oy] - 1 + tap, 0, t.height() - 1);
                v += w[tap] * mid.at(c, y, ox);
            }
            dst[ox] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    });
    return out;
}

// Bilinear resize by an integer factor (upscale), align-corners-false:
// src = (dst + 0.5) / factor - 0.5, edge-clamped. Values are not scaled.
inline Tensor bilinear_resize(const Tensor& t, int factor) {
    if (factor < 1) throw ValueError("bilinear_resize: factor must be >= 1, got " + std::to_string(factor));
    const int oh = t.height() * factor, ow = t.width() * factor;
    std::vector<int> x0(ow), x1(ow);
    std::vector<float> fx(ow);
    for (int ox = 0; ox < ow; ++ox) {
        const double sx = std::clamp((ox + 0.5) / factor - 0.5, 0.0, static_cast<double>(t.width() - 1));
        x0[ox] = static_cast<int>(std::floor(sx));
        x1[ox] = std::min(x0[ox] + 1, t.width() - 1);
        fx[ox] = static_cast<float>(sx - x0[ox]);
    }
    Tensor out(t.channels(), oh, ow);
    parallel_for(static_cast<std::int64_t>(t.channels()) * oh, 4, [&](std::int64_t i) {
        const int c = static_cast<int>(i / oh);
        const int oy = static_cast<int>(i % oh);
        const double sy = std::clamp((oy + 0.5) / factor - 0.5, 0.0, static_cast<double>(t.height() - 1));
        const int y0 = static_cast<int>(std::floor(sy));
        const int y1 = std::min(y0 + 1, t.height() - 1);
        const float fy = static_cast<float>(sy - y0);
        const float* r0 = t.row(c, y0);
        const float* r1 = t.row(c, y1);
        float* dst = out.row(c, oy);
        for (int ox = 0; ox < ow; ++ox) {
            const float a = r0[x0[ox]] + fx[ox] * (r0[x1[ox]] - r0[x0[ox]]);
            const float b = r1[x0[ox]] + fx[ox] * (r1[x1[ox]] - r1[x0[ox]]);
            dst[ox] = a + fy * (b - a);
        }
    });
    return out;
}

// Channel concat; all inputs must share H and W.
inline Tensor concat(std::span<const Tensor* const> parts) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const int h = parts[0]->height(), w = parts[0]->width();
    int c = 0;
    for (const Tensor* p : parts) {
        if (p->height() != h || p->width() != w) {
            throw ShapeError("concat: input " + p->shape() + " does not match " + parts[0]->shape());
        }
        c += p->channels();
    }
    Tensor out(c, h, w);
    int at = 0;
    for (const Tensor* p : parts) {
        std::copy_n(p->data().data(), p->size(), out.plane(at));
        at += p->channels();
    }
    return out;
}

inline Tensor concat(std::initializer_list<const Tensor*> parts) {
    return concat(std::span<const Tensor* const>(parts.begin(), parts.size()));
}

inline void sigmoid_inplace(Tensor& t) {
    float* d = t.data().data();
    parallel_for(static_cast<std::int64_t>(t.size()), 1 << 18,
                 [&](std::int64_t i) { d[i] = 1.0f / (1.0f + std::exp(-d[i])); });
}

inline void clamp01_inplace(Tensor& t) {
    float* d = t.data().data();
    parallel_for(static_cast<std::int64_t>(t.size()), 1 << 20,
                 [&](std::int64_t i) { d[i] = std::clamp(d[i], 0.0f, 1.0f); });
}

// Copies channels [c0, c0+n) into a new tensor.
inline Tensor take_channels(const Tensor& t, int c0, int n) {
    if (c0 < 0 || n <= 0 || c0 + n > t.channels()) {
        throw ShapeError("take_channels: [" + std::to_string(c0) + ", " + std::to_string(c0 + n) +
                         ") out of range for " + t.shape());
    }
    Tensor out(n, t.height(), t.width());
    std::copy_n(t.plane(c0), out.size(), out.plane(0));
    return out;
}

}  // namespace xvfi
