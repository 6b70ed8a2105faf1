#pragma once

// End-to-end interpolation: pad, extract shared features once, estimate
// bidirectional flows coarse-to-fine (phase I), then per requested time t
// derive, refine and apply the time-t flows (phase II). Phase II runs only
// at the finest scale for inference; training mode evaluates it at every
// scale on bicubic-downscaled frames so per-scale losses can be formed.

#include <chrono>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "xvfi/common.hpp"
#include "xvfi/flow_ops.hpp"
#include "xvfi/net_blocks.hpp"
#include "xvfi/tensor.hpp"

namespace xvfi {

struct PipelineConfig {
    int scale_depth = 3;               // coarsest pyramid level used (adjustable at test time)
    std::vector<float> times = {0.5f};  // interpolation instants, each in [0,1]
    bool training_mode = false;         // also produce outputs at scales 1..scale_depth

    void validate() const {
        if (scale_depth < 0 || scale_depth > 8) {
            throw ValueError("scale depth must be in [0, 8], got " + std::to_string(scale_depth));
        }
        if (times.empty()) throw ValueError("no interpolation times given");
        for (float t : times) {
            if (!(t >= 0.0f && t <= 1.0f)) {
                throw ValueError("interpolation time must be in [0, 1], got " + std::to_string(t));
            }
        }
    }
};

struct PadResult {
    Tensor padded;
    int orig_h = 0, orig_w = 0;
};

// Pads right/bottom to the next multiple with reflect-101 (mirror about the
// edge pixel, no duplication), so the network never sees a hard border.
inline PadResult pad_to_stride(const Tensor& frame, int multiple) {
    if (multiple < 1) throw ValueError("pad_to_stride: multiple must be >= 1");
    const int h = frame.height(), w = frame.width();
    const int ph = (h + multiple - 1) / multiple * multiple;
    const int pw = (w + multiple - 1) / multiple * multiple;
    if (ph - h >= h || pw - w >= w) {
        throw ShapeError("pad_to_stride: frame " + frame.shape() + " too small to pad to a multiple of " +
                         std::to_string(multiple) + " (lower the scale depth)");
    }
    PadResult out;
    out.orig_h = h;
    out.orig_w = w;
    if (ph == h && pw == w) {
        out.padded = frame;
        return out;
    }
    out.padded = Tensor(frame.channels(), ph, pw);
    parallel_for(static_cast<std::int64_t>(frame.channels()) * ph, 8, [&](std::int64_t i) {
        const int c = static_cast<int>(i / ph);
        const int y = static_cast<int>(i % ph);
        const int sy = y < h ? y : 2 * h - 2 - y;
        const float* src = frame.row(c, sy);
        float* dst = out.padded.row(c, y);
        std::copy_n(src, w, dst);
        for (int x = w; x < pw; ++x) dst[x] = src[2 * w - 2 - x];
    });
    return out;
}

// Crops the top-left h x w region (inverse of pad_to_stride).
inline Tensor crop(const Tensor& t, int h, int w) {
    if (h > t.height() || w > t.width() || h < 1 || w < 1) {
        throw ShapeError("crop: " + std::to_string(h) + "x" + std::to_string(w) + " out of " + t.shape());
    }
    if (h == t.height() && w == t.width()) return t;
    Tensor out(t.channels(), h, w);
    for (int c = 0; c < t.channels(); ++c) {
        for (int y = 0; y < h; ++y) std::copy_n(t.row(c, y), w, out.row(c, y));
    }
    return out;
}

// Everything phase I produces at one pyramid level.
struct ScaleState {
    Tensor c0, c1;        // features of both frames
    FlowField f01, f10;   // bidirectional flows at this level
    Tensor z01, z10;      // importance logits
};

struct BiofIResult {
    std::vector<ScaleState> levels;  // index = scale, 0 is finest
};

// Phase I: shared feature pyramids for both frames, flows from scratch at
// the coarsest level, then the scale-shared refinement walking to the
// finest level with x2-upscaled flows as initialization.
inline BiofIResult biof_i(const Tensor& i0_padded, const Tensor& i1_padded, const PipelineConfig& cfg,
                          const WeightStore& w) {
    cfg.validate();
    if (!i0_padded.same_shape(i1_padded)) {
        throw ShapeError("biof_i: frames differ: " + i0_padded.shape() + " vs " + i1_padded.shape());
    }
    const int S = cfg.scale_depth;
    BiofIResult out;
    out.levels.resize(static_cast<size_t>(S) + 1);
    {
        auto pyr0 = pyramid_extend(feature_extract(i0_padded, w), S, w);
        for (int s = 0; s <= S; ++s) out.levels[s].c0 = std::move(pyr0[s]);
    }
    {
        auto pyr1 = pyramid_extend(feature_extract(i1_padded, w), S, w);
        for (int s = 0; s <= S; ++s) out.levels[s].c1 = std::move(pyr1[s]);
    }

    BiFlowOut lowest = biflownet_lowest(out.levels[S].c0, out.levels[S].c1, w);
    out.levels[S].f01 = std::move(lowest.f01);
    out.levels[S].f10 = std::move(lowest.f10);
    out.levels[S].z01 = std::move(lowest.z01);
    out.levels[S].z10 = std::move(lowest.z10);
    for (int s = S - 1; s >= 0; --s) {
        FlowField f01_up = upscale_flow(out.levels[s + 1].f01, 2);
        FlowField f10_up = upscale_flow(out.levels[s + 1].f10, 2);
        BiFlowOut ref = biflownet_shared(out.levels[s].c0, out.levels[s].c1, f01_up, f10_up, w);
        out.levels[s].f01 = std::move(ref.f01);
        out.levels[s].f10 = std::move(ref.f10);
        out.levels[s].z01 = std::move(ref.z01);
        out.levels[s].z10 = std::move(ref.z10);
    }
    return out;
}

// Occlusion-weighted two-frame blend plus residual, clamped to [0,1].
// Weights: (1-t)*m for the warp from frame 0 and t*(1-m) for frame 1,
// normalized by their sum. A zero sum (saturated mask at an endpoint)
// falls back to the plain (1-t, t) blend.
inline Tensor blend_frames(const Tensor& it0, const Tensor& it1, const Tensor& mask, const Tensor& residual,
                           float t) {
    if (!it0.same_shape(it1) || !it0.same_shape(residual) || it0.channels() != 3) {
        throw ShapeError("blend_frames: frame shapes differ");
    }
    if (mask.channels() != 1 || mask.height() != it0.height() || mask.width() != it0.width()) {
        throw ShapeError("blend_frames: mask must be 1x" + std::to_string(it0.height()) + "x" +
                         std::to_string(it0.width()) + ", got " + mask.shape());
    }
    if (!(t >= 0.0f && t <= 1.0f)) throw ValueError("blend_frames: t must be in [0, 1]");
    const int h = it0.height(), wd = it0.width();
    Tensor out(3, h, wd);
    parallel_for(h, 4, [&](std::int64_t yy) {
        const int y = static_cast<int>(yy);
        const float* m = mask.row(0, y);
        for (int c = 0; c < 3; ++c) {
            const float* a = it0.row(c, y);
            const float* b = it1.row(c, y);
            const float* r = residual.row(c, y);
            float* dst = out.row(c, y);
            for (int x = 0; x < wd; ++x) {
                const float w0 = (1.0f - t) * m[x];
                const float w1 = t * (1.0f - m[x]);
                const float den = w0 + w1;
                float v;
                if (den > 0.0f) {
                    v = (w0 * a[x] + w1 * b[x]) / den;
                } else {
                    v = (1.0f - t) * a[x] + t * b[x];
                }
                dst[x] = std::clamp(v + r[x], 0.0f, 1.0f);
            }
        }
    });
    return out;
}

// Phase II output for one (scale, t) evaluation, at that scale's padded size.
struct BiofTResult {
    Tensor frame;               // 3 x H x W in [0,1]
    FlowField ft0, ft1;         // image-resolution flows actually used
    Tensor mask;                // blend mask, image resolution
    Tensor holes_t0, holes_t1;  // reversal coverage diagnostics, feature resolution
};

// Phase II at one pyramid level: complementary flow reversal seeds the
// time-t flows, the time flow net refines them at feature resolution, and
// after x(module scale) upscaling the frames are warped, masked, blended
// and residual-corrected.
inline BiofTResult biof_t(const ScaleState& state, const Tensor& i0s, const Tensor& i1s, float t,
                          const WeightStore& w) {
    const int M = w.module_scale();
    if (state.c0.height() * M != i0s.height() || state.c0.width() * M != i0s.width()) {
        throw ShapeError("biof_t: features " + state.c0.shape() + " do not match frames " + i0s.shape());
    }
    FlowApprox approx = cfr(state.f01, state.f10, state.z01, state.z10, t);
    TFlowOut tf = tflownet(state.c0, state.c1, approx.t0, approx.t1, w);

    BiofTResult out;
    out.holes_t0 = std::move(approx.holes_t0);
    out.holes_t1 = std::move(approx.holes_t1);
    out.ft0 = upscale_flow(tf.ft0, M);
    out.ft1 = upscale_flow(tf.ft1, M);
    Tensor it0 = backward_warp(i0s, out.ft0);
    Tensor it1 = backward_warp(i1s, out.ft1);
    RefineOut ref = refine(state.c0, state.c1, tf.ft0, tf.ft1, out.ft0, out.ft1, i0s, i1s, it0, it1, w);
    out.frame = blend_frames(it0, it1, ref.mask, ref.residual, t);
    out.mask = std::move(ref.mask);
    return out;
}

// Results for one requested time.
struct TimeOutput {
    float t = 0.0f;
    Tensor frame;               // original (unpadded) dims
    FlowField ft0, ft1;         // original dims
    Tensor mask;                // original dims
    Tensor holes_t0, holes_t1;  // feature resolution of the finest scale
    // training mode: outputs at scales 1..S, index 0 = scale 1, at the
    // padded dims of that scale (no crop; coarse scales are loss inputs,
    // not deliverable frames)
    std::vector<Tensor> scale_frames;
};

struct InterpolationResult {
    std::vector<TimeOutput> outputs;                            // one per requested t
    std::vector<std::pair<FlowField, FlowField>> scale_flows;   // phase-I flows per scale
    int biof_i_runs = 0;                                        // instrumentation: must stay 1 per call
    int padded_h = 0, padded_w = 0;
    double biof_i_ms = 0.0, biof_t_ms = 0.0;
};

// Full pipeline over all configured times. Phase I runs exactly once no
// matter how many times are requested.
inline InterpolationResult interpolate(const Tensor& i0, const Tensor& i1, const PipelineConfig& cfg,
                                       const WeightStore& w) {
    cfg.validate();
    if (i0.channels() != 3 || !i0.same_shape(i1)) {
        throw ShapeError("interpolate: need two matching 3-channel frames, got " + i0.shape() + " and " +
                         i1.shape());
    }
    const int M = w.module_scale();
    const int S = cfg.scale_depth;
    const int multiple = M * (1 << S) * 4;
    using clock = std::chrono::steady_clock;

    PadResult p0 = pad_to_stride(i0, multiple);
    PadResult p1 = pad_to_stride(i1, multiple);

    InterpolationResult res;
    res.padded_h = p0.padded.height();
    res.padded_w = p0.padded.width();

    const auto t_i0 = clock::now();
    BiofIResult phase1 = biof_i(p0.padded, p1.padded, cfg, w);
    res.biof_i_runs += 1;
    res.biof_i_ms = std::chrono::duration<double, std::milli>(clock::now() - t_i0).count();

    for (const ScaleState& st : phase1.levels) {
        res.scale_flows.emplace_back(st.f01, st.f10);
    }

    // training mode needs the frames at every scale; cache them across t
    std::vector<Tensor> i0_scales, i1_scales;
    if (cfg.training_mode) {
        for (int s = 1; s <= S; ++s) {
            i0_scales.push_back(bicubic_downscale(p0.padded, 1 << s));
            i1_scales.push_back(bicubic_downscale(p1.padded, 1 << s));
        }
    }

    const auto t_t0 = clock::now();
    for (float t : cfg.times) {
        TimeOutput to;
        to.t = t;
        BiofTResult fine = biof_t(phase1.levels[0], p0.padded, p1.padded, t, w);
        to.frame = crop(fine.frame, p0.orig_h, p0.orig_w);
        to.ft0 = FlowField(crop(fine.ft0.tensor(), p0.orig_h, p0.orig_w));
        to.ft1 = FlowField(crop(fine.ft1.tensor(), p0.orig_h, p0.orig_w));
        to.mask = crop(fine.mask, p0.orig_h, p0.orig_w);
        to.holes_t0 = std::move(fine.holes_t0);
        to.holes_t1 = std::move(fine.holes_t1);
        if (cfg.training_mode) {
            for (int s = 1; s <= S; ++s) {
                BiofTResult coarse = biof_t(phase1.levels[s], i0_scales[s - 1], i1_scales[s - 1], t, w);
                to.scale_frames.push_back(std::move(coarse.frame));
            }
        }
        res.outputs.push_back(std::move(to));
    }
    res.biof_t_ms = std::chrono::duration<double, std::milli>(clock::now() - t_t0).count();
    return res;
}

// Convenience wrapper emphasizing the shared phase I across many times.
inline InterpolationResult multi_interpolate(const Tensor& i0, const Tensor& i1,
                                             std::span<const float> times, PipelineConfig cfg,
                                             const WeightStore& w) {
    cfg.times.assign(times.begin(), times.end());
    return interpolate(i0, i1, cfg, w);
}

}  // namespace xvfi
