#pragma once

// Optical-flow containers and the flow algebra of the interpolator:
// backward warping, forward splatting, and the three ways to get a flow
// from an intermediate time t out of the two inter-frame flows
// (complementary reversal, plain reversal, linear combination).
//
// Conventions. Flow fields are 2-channel tensors, channel 0 = u
// (horizontal, +x right), channel 1 = v (vertical, +y down), in pixels at
// their own resolution. F01 maps frame-0 coords toward frame 1:
// frame0[x] corresponds to frame1[x + F01[x]].

#include <algorithm>
#include <cmath>
#include <utility>

#include "xvfi/common.hpp"
#include "xvfi/tensor.hpp"

namespace xvfi {

class FlowField {
public:
    FlowField() = default;
    FlowField(int height, int width, float u = 0.0f, float v = 0.0f) : t_(2, height, width) {
        if (u != 0.0f) std::fill_n(t_.plane(0), static_cast<size_t>(height) * width, u);
        if (v != 0.0f) std::fill_n(t_.plane(1), static_cast<size_t>(height) * width, v);
    }
    explicit FlowField(Tensor t) : t_(std::move(t)) {
        if (t_.channels() != 2) {
            throw ShapeError("FlowField: expected 2 channels, got " + t_.shape());
        }
    }

    int height() const { return t_.height(); }
    int width() const { return t_.width(); }
    bool empty() const { return t_.empty(); }
    float u(int y, int x) const { return t_.at(0, y, x); }
    float v(int y, int x) const { return t_.at(1, y, x); }
    float& u(int y, int x) { return t_.at(0, y, x); }
    float& v(int y, int x) { return t_.at(1, y, x); }
    Tensor& tensor() { return t_; }
    const Tensor& tensor() const { return t_; }

private:
    Tensor t_;
};

// Importance logits are a single-channel tensor, exponentiated inside the
// splat weight; using a plain alias keeps call sites honest about shape.
using ImportanceLogits = Tensor;

// Samples source at x + flow[x] with bilinear interpolation; sample
// coordinates are clamped to the source rectangle. Flow and source share
// spatial dims. Zero flow reproduces the source bitwise.
inline Tensor backward_warp(const Tensor& source, const FlowField& flow) {
    if (source.height() != flow.height() || source.width() != flow.width()) {
        throw ShapeError("backward_warp: source " + source.shape() + " vs flow " +
                         Tensor::shape_str(2, flow.height(), flow.width()));
    }
    const int h = source.height(), w = source.width(), c = source.channels();
    Tensor out(c, h, w);
    parallel_for(h, 1, [&](std::int64_t yy) {
        const int y = static_cast<int>(yy);
        std::vector<int> x0(w), x1(w), y0(w), y1(w);
        std::vector<float> fx(w), fy(w);
        for (int x = 0; x < w; ++x) {
            const float sx = std::clamp(static_cast<float>(x) + flow.u(y, x), 0.0f, static_cast<float>(w - 1));
            const float sy = std::clamp(static_cast<float>(y) + flow.v(y, x), 0.0f, static_cast<float>(h - 1));
            x0[x] = static_cast<int>(std::floor(sx));
            y0[x] = static_cast<int>(std::floor(sy));
            x1[x] = std::min(x0[x] + 1, w - 1);
            y1[x] = std::min(y0[x] + 1, h - 1);
            fx[x] = sx - static_cast<float>(x0[x]);
            fy[x] = sy - static_cast<float>(y0[x]);
        }
        for (int ch = 0; ch < c; ++ch) {
            float* dst = out.row(ch, y);
            const float* plane = source.plane(ch);
            for (int x = 0; x < w; ++x) {
                const float* r0 = plane + static_cast<size_t>(y0[x]) * w;
                const float* r1 = plane + static_cast<size_t>(y1[x]) * w;
                const float a = r0[x0[x]] + fx[x] * (r0[x1[x]] - r0[x0[x]]);
                const float b = r1[x0[x]] + fx[x] * (r1[x1[x]] - r1[x0[x]]);
                dst[x] = a + fy[x] * (b - a);
            }
        }
    });
    return out;
}

// Anchor flows from the two inputs toward time t: (F0t, F1t) = (t*F01, (1-t)*F10).
inline std::pair<FlowField, FlowField> anchor_flows(const FlowField& f01, const FlowField& f10, float t) {
    if (t < 0.0f || t > 1.0f) throw ValueError("anchor_flows: t must be in [0,1], got " + std::to_string(t));
    if (f01.height() != f10.height() || f01.width() != f10.width()) {
        throw ShapeError("anchor_flows: flow shapes differ");
    }
    FlowField f0t(f01.height(), f01.width()), f1t(f01.height(), f01.width());
    const size_t n = f01.tensor().size();
    for (size_t i = 0; i < n; ++i) f0t.tensor().data()[i] = t * f01.tensor().data()[i];
    for (size_t i = 0; i < n; ++i) f1t.tensor().data()[i] = (1.0f - t) * f10.tensor().data()[i];
    return {std::move(f0t), std::move(f1t)};
}

// Complementary payloads carried to the *other* endpoint: a frame-0 source
// proposes t*F10-scaled motion for the t->0 map's sibling and vice versa.
// Returns (t*F10, (1-t)*F01) = (payload toward map t->0 from frame-1
// sources, payload toward map t->1 from frame-0 sources).
inline std::pair<FlowField, FlowField> complementary_flows(const FlowField& f01, const FlowField& f10, float t) {
    if (t < 0.0f || t > 1.0f) throw ValueError("complementary_flows: t must be in [0,1], got " + std::to_string(t));
    if (f01.height() != f10.height() || f01.width() != f10.width()) {
        throw ShapeError("complementary_flows: flow shapes differ");
    }
    FlowField c0(f01.height(), f01.width()), c1(f01.height(), f01.width());
    const size_t n = f01.tensor().size();
    for (size_t i = 0; i < n; ++i) c0.tensor().data()[i] = t * f10.tensor().data()[i];
    for (size_t i = 0; i < n; ++i) c1.tensor().data()[i] = (1.0f - t) * f01.tensor().data()[i];
    return {std::move(c0), std::move(c1)};
}

// Gathers forward-splat contributions: 2-channel payload numerator plus a
// shared scalar denominator.
struct SplatAccumulator {
    Tensor numerator;    // 2 x H x W, sum of weight * payload
    Tensor denominator;  // 1 x H x W, sum of weights

    SplatAccumulator() = default;
    SplatAccumulator(int height, int width)
        : numerator(2, height, width, 0.0f), denominator(1, height, width, 0.0f) {}
};

namespace detail {

// Splat target: each source pixel y lands on round(y + anchor[y]) with
// rounding half toward +infinity per axis; G is a Gaussian in the rounding
// residual with sigma = 0.5.
inline bool splat_target(float fx, float fy, int w, int h, int& tx, int& ty, float& g) {
    tx = static_cast<int>(std::floor(fx + 0.5f));
    ty = static_cast<int>(std::floor(fy + 0.5f));
    if (tx < 0 || tx >= w || ty < 0 || ty >= h) return false;
    const float dx = fx - static_cast<float>(tx);
    const float dy = fy - static_cast<float>(ty);
    g = std::exp(-(dx * dx + dy * dy) * 2.0f);  // 1/(2*sigma^2) with sigma 0.5
    return true;
}

}  // namespace detail

// Forward-splats payload along anchor into acc. Weight per source pixel is
// global_weight * exp(logits[y]) * G(rounding distance). Accumulation runs
// in a fixed row-major source order on one thread, so repeated runs are
// bitwise identical regardless of thread caps.
inline void splat(const FlowField& anchor, const FlowField& payload, const ImportanceLogits& logits,
                  SplatAccumulator& acc, float global_weight) {
    const int h = anchor.height(), w = anchor.width();
    if (payload.height() != h || payload.width() != w) throw ShapeError("splat: payload shape mismatch");
    if (logits.channels() != 1 || logits.height() != h || logits.width() != w) {
        throw ShapeError("splat: logits must be 1x" + std::to_string(h) + "x" + std::to_string(w) + ", got " +
                         logits.shape());
    }
    if (acc.denominator.height() != h || acc.denominator.width() != w) {
        throw ShapeError("splat: accumulator shape mismatch");
    }
    float* nu = acc.numerator.plane(0);
    float* nv = acc.numerator.plane(1);
    float* den = acc.denominator.plane(0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const float fx = static_cast<float>(x) + anchor.u(y, x);
            const float fy = static_cast<float>(y) + anchor.v(y, x);
            int tx, ty;
            float g;
            if (!detail::splat_target(fx, fy, w, h, tx, ty, g)) continue;
            const float wgt = global_weight * std::exp(logits.at(0, y, x)) * g;
            const size_t ti = static_cast<size_t>(ty) * w + tx;
            nu[ti] += wgt * payload.u(y, x);
            nv[ti] += wgt * payload.v(y, x);
            den[ti] += wgt;
        }
    }
}

// Result of estimating the two time-t flows. holes_* mark pixels (value 1)
// that received no splat weight; their flow value depends on the method
// (complementary reversal falls back to the linear combination, plain
// reversal leaves zeros, the linear method has no holes).
struct FlowApprox {
    FlowField t0;     // flow from time t toward frame 0
    FlowField t1;     // flow from time t toward frame 1
    Tensor holes_t0;  // 1 x H x W, 0/1
    Tensor holes_t1;
};

// Weight below or at this threshold counts as uncovered.
inline constexpr double kSplatHoleEps = 1e-12;

// Linear combination of the two inter-frame flows under a locally-linear
// motion assumption; defined everywhere (no holes).
inline FlowApprox linear_approx(const FlowField& f01, const FlowField& f10, float t) {
    if (t < 0.0f || t > 1.0f) throw ValueError("linear_approx: t must be in [0,1], got " + std::to_string(t));
    if (f01.height() != f10.height() || f01.width() != f10.width()) {
        throw ShapeError("linear_approx: flow shapes differ");
    }
    const int h = f01.height(), w = f01.width();
    FlowApprox out;
    out.t0 = FlowField(h, w);
    out.t1 = FlowField(h, w);
    out.holes_t0 = Tensor(1, h, w, 0.0f);
    out.holes_t1 = Tensor(1, h, w, 0.0f);
    const float* a = f01.tensor().data().data();
    const float* b = f10.tensor().data().data();
    float* o0 = out.t0.tensor().data().data();
    float* o1 = out.t1.tensor().data().data();
    const size_t n = f01.tensor().size();
    for (size_t i = 0; i < n; ++i) {
        o0[i] = -(1.0f - t) * t * a[i] + t * t * b[i];
        o1[i] = (1.0f - t) * (1.0f - t) * a[i] - t * (1.0f - t) * b[i];
    }
    return out;
}

// Complementary flow reversal. Every source pixel of both input frames
// splats toward its anchor target at time t; each landing contributes its
// reversed anchor to the same-endpoint map and its complementary flow to
// the opposite-endpoint map, all under one shared weight. Pixels with no
// coverage are marked in the hole maps and filled from linear_approx.
inline FlowApprox cfr(const FlowField& f01, const FlowField& f10, const ImportanceLogits& z01,
                      const ImportanceLogits& z10, float t) {
    if (t < 0.0f || t > 1.0f) throw ValueError("cfr: t must be in [0,1], got " + std::to_string(t));
    if (f01.height() != f10.height() || f01.width() != f10.width()) {
        throw ShapeError("cfr: flow shapes differ");
    }
    const int h = f01.height(), w = f01.width();
    auto [f0t, f1t] = anchor_flows(f01, f10, t);
    auto [c0, c1] = complementary_flows(f01, f10, t);

    // Reversed anchors are the own-endpoint payloads.
    FlowField r0(h, w), r1(h, w);
    for (size_t i = 0; i < f0t.tensor().size(); ++i) r0.tensor().data()[i] = -f0t.tensor().data()[i];
    for (size_t i = 0; i < f1t.tensor().size(); ++i) r1.tensor().data()[i] = -f1t.tensor().data()[i];

    SplatAccumulator acc_t0(h, w), acc_t1(h, w);
    // Frame-0 sources (anchor f0t, global weight 1-t), then frame-1 sources
    // (anchor f1t, global weight t); same order into both accumulators so
    // the two denominators are bitwise identical.
    splat(f0t, r0, z01, acc_t0, 1.0f - t);
    splat(f1t, c0, z10, acc_t0, t);
    splat(f0t, c1, z01, acc_t1, 1.0f - t);
    splat(f1t, r1, z10, acc_t1, t);

    FlowApprox lin = linear_approx(f01, f10, t);
    FlowApprox out;
    out.t0 = FlowField(h, w);
    out.t1 = FlowField(h, w);
    out.holes_t0 = Tensor(1, h, w, 0.0f);
    out.holes_t1 = Tensor(1, h, w, 0.0f);
    auto resolve = [&](SplatAccumulator& acc, FlowField& dst, Tensor& holes, FlowField& fallback) {
        const float* nu = acc.numerator.plane(0);
        const float* nv = acc.numerator.plane(1);
        const float* den = acc.denominator.plane(0);
        float* hm = holes.plane(0);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const size_t i = static_cast<size_t>(y) * w + x;
                if (static_cast<double>(den[i]) <= kSplatHoleEps) {
                    hm[i] = 1.0f;
                    dst.u(y, x) = fallback.u(y, x);
                    dst.v(y, x) = fallback.v(y, x);
                } else {
                    dst.u(y, x) = nu[i] / den[i];
                    dst.v(y, x) = nv[i] / den[i];
                }
            }
        }
    };
    resolve(acc_t0, out.t0, out.holes_t0, lin.t0);
    resolve(acc_t1, out.t1, out.holes_t1, lin.t1);
    return out;
}

// Plain flow reversal: like cfr but each endpoint map only receives the
// reversed anchors of its own frame (no complementary payloads, no
// importance weighting). Holes stay zero vectors.
inline FlowApprox flow_reversal(const FlowField& f01, const FlowField& f10, float t) {
    if (t < 0.0f || t > 1.0f) throw ValueError("flow_reversal: t must be in [0,1], got " + std::to_string(t));
    if (f01.height() != f10.height() || f01.width() != f10.width()) {
        throw ShapeError("flow_reversal: flow shapes differ");
    }
    const int h = f01.height(), w = f01.width();
    auto [f0t, f1t] = anchor_flows(f01, f10, t);
    FlowField r0(h, w), r1(h, w);
    for (size_t i = 0; i < f0t.tensor().size(); ++i) r0.tensor().data()[i] = -f0t.tensor().data()[i];
    for (size_t i = 0; i < f1t.tensor().size(); ++i) r1.tensor().data()[i] = -f1t.tensor().data()[i];

    ImportanceLogits zeros(1, h, w, 0.0f);
    SplatAccumulator acc_t0(h, w), acc_t1(h, w);
    splat(f0t, r0, zeros, acc_t0, 1.0f);
    splat(f1t, r1, zeros, acc_t1, 1.0f);

    FlowApprox out;
    out.t0 = FlowField(h, w);
    out.t1 = FlowField(h, w);
    out.holes_t0 = Tensor(1, h, w, 0.0f);
    out.holes_t1 = Tensor(1, h, w, 0.0f);
    auto resolve = [&](SplatAccumulator& acc, FlowField& dst, Tensor& holes) {
        const float* nu = acc.numerator.plane(0);
        const float* nv = acc.numerator.plane(1);
        const float* den = acc.denominator.plane(0);
        float* hm = holes.plane(0);
        for (size_t i = 0; i < static_cast<size_t>(h) * w; ++i) {
            if (static_cast<double>(den[i]) <= kSplatHoleEps) {
                hm[i] = 1.0f;
            } else {
                dst.tensor().plane(0)[i] = nu[i] / den[i];
                dst.tensor().plane(1)[i] = nv[i] / den[i];
            }
        }
    };
    resolve(acc_t0, out.t0, out.holes_t0);
    resolve(acc_t1, out.t1, out.holes_t1);
    return out;
}

// Bilinearly resizes a flow by an integer factor and scales its vectors by
// the same factor so displacements stay in output-pixel units.
inline FlowField upscale_flow(const FlowField& flow, int factor) {
    Tensor up = bilinear_resize(flow.tensor(), factor);
    if (factor != 1) {
        float* d = up.data().data();
        const float s = static_cast<float>(factor);
        parallel_for(static_cast<std::int64_t>(up.size()), 1 << 20, [&](std::int64_t i) { d[i] *= s; });
    }
    return FlowField(std::move(up));
}

// Mean endpoint error between two flow fields (mean Euclidean distance).
inline double epe(const FlowField& a, const FlowField& b) {
    if (a.height() != b.height() || a.width() != b.width()) throw ShapeError("epe: flow shapes differ");
    double sum = 0.0;
    for (int y = 0; y < a.height(); ++y) {
        for (int x = 0; x < a.width(); ++x) {
            const double du = static_cast<double>(a.u(y, x)) - b.u(y, x);
            const double dv = static_cast<double>(a.v(y, x)) - b.v(y, x);
            sum += std::sqrt(du * du + dv * dv);
        }
    }
    return sum / (static_cast<double>(a.height()) * a.width());
}

}  // namespace xvfi
