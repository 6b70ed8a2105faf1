#pragma once

// Training losses (reconstruction + edge-aware flow smoothness) and the
// evaluation metrics: PSNR, single-scale SSIM, temporal motion consistency
// (tOF) with its companion endpoint error, and the integer block matcher
// used as the default motion source for tOF.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xvfi/common.hpp"
#include "xvfi/flow_ops.hpp"
#include "xvfi/tensor.hpp"

namespace xvfi {

struct LossConfig {
    float lambda_s = 0.5f;  // smoothness weight
    float edge_e = 150.0f;  // edge sensitivity of the smoothness weighting
    int scale_depth = 3;    // scales participating in the reconstruction sum

    void validate() const {
        if (lambda_s < 0.0f) throw ValueError("lambda_s must be >= 0");
        if (!(edge_e > 0.0f)) throw ValueError("edge factor e must be > 0");
        if (scale_depth < 0) throw ValueError("scale depth must be >= 0");
    }
};

// Sum over scales of the mean absolute difference at that scale.
inline double recon_loss(std::span<const Tensor> predictions, std::span<const Tensor> targets) {
    if (predictions.size() != targets.size()) {
        throw ShapeError("recon_loss: " + std::to_string(predictions.size()) + " predictions vs " +
                         std::to_string(targets.size()) + " targets");
    }
    if (predictions.empty()) throw ValueError("recon_loss: no scales given");
    double total = 0.0;
    for (size_t s = 0; s < predictions.size(); ++s) {
        const Tensor& p = predictions[s];
        const Tensor& g = targets[s];
        if (!p.same_shape(g)) {
            throw ShapeError("recon_loss: scale " + std::to_string(s) + " shapes differ: " + p.shape() +
                             " vs " + g.shape());
        }
        double acc = 0.0;
        for (size_t i = 0; i < p.data().size(); ++i) acc += std::fabs(double(p.data()[i]) - double(g.data()[i]));
        total += acc / double(p.data().size());
    }
    return total;
}

// Edge-aware first-order smoothness: forward differences in x and y, each
// position weighted by exp(-e^2 * sum_c |forward diff of the frame|) along
// the same axis, averaged over both flows, both flow channels and all
// valid positions of both axes.
inline double smoothness_loss(const FlowField& ft0, const FlowField& ft1, const Tensor& frame, float e) {
    if (ft0.height() != frame.height() || ft0.width() != frame.width() || ft1.height() != frame.height() ||
        ft1.width() != frame.width()) {
        throw ShapeError("smoothness_loss: flows must match the frame " + frame.shape());
    }
    if (!(e > 0.0f)) throw ValueError("smoothness_loss: e must be > 0");
    const int h = frame.height(), w = frame.width();
    const double e2 = double(e) * double(e);
    const Tensor* flows[2] = {&ft0.tensor(), &ft1.tensor()};

    double acc = 0.0;
    std::int64_t terms = 0;
    // x axis: positions with a right neighbor
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x + 1 < w; ++x) {
            double g = 0.0;
            for (int c = 0; c < frame.channels(); ++c) {
                g += std::fabs(double(frame.at(c, y, x + 1)) - double(frame.at(c, y, x)));
            }
            const double weight = std::exp(-e2 * g);
            for (const Tensor* f : flows) {
                for (int q = 0; q < 2; ++q) {
                    acc += weight * std::fabs(double(f->at(q, y, x + 1)) - double(f->at(q, y, x)));
                    ++terms;
                }
            }
        }
    }
    // y axis: positions with a lower neighbor
    for (int y = 0; y + 1 < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double g = 0.0;
            for (int c = 0; c < frame.channels(); ++c) {
                g += std::fabs(double(frame.at(c, y + 1, x)) - double(frame.at(c, y, x)));
            }
            const double weight = std::exp(-e2 * g);
            for (const Tensor* f : flows) {
                for (int q = 0; q < 2; ++q) {
                    acc += weight * std::fabs(double(f->at(q, y + 1, x)) - double(f->at(q, y, x)));
                    ++terms;
                }
            }
        }
    }
    if (terms == 0) return 0.0;  // degenerate 1x1 frame
    return acc / double(terms);
}

inline double total_loss(double recon, double smooth, const LossConfig& cfg) {
    cfg.validate();
    return recon + double(cfg.lambda_s) * smooth;
}

// Peak signal-to-noise ratio for frames in [0,1]; identical frames are
// capped at 100 dB so reports stay finite.
inline double psnr(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw ShapeError("psnr: shapes differ: " + a.shape() + " vs " + b.shape());
    double acc = 0.0;
    for (size_t i = 0; i < a.data().size(); ++i) {
        const double d = double(a.data()[i]) - double(b.data()[i]);
        acc += d * d;
    }
    const double mse = acc / double(a.data().size());
    if (mse <= 0.0) return 100.0;
    return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

namespace detail {

inline std::vector<double> gaussian_window_11() {
    std::vector<double> k(11);
    const double sigma = 1.5;
    double sum = 0.0;
    for (int i = 0; i < 11; ++i) {
        const double d = i - 5;
        k[i] = std::exp(-(d * d) / (2.0 * sigma * sigma));
        sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Separable valid-window Gaussian blur of one channel into a
// (h-10) x (w-10) double grid.
inline std::vector<double> blur_valid(const Tensor& t, int c, const std::vector<double>& k) {
    const int h = t.height(), w = t.width();
    const int oh = h - 10, ow = w - 10;
    std::vector<double> horiz(static_cast<size_t>(h) * ow);
    for (int y = 0; y < h; ++y) {
        const float* row = t.row(c, y);
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < 11; ++i) acc += k[i] * row[x + i];
            horiz[static_cast<size_t>(y) * ow + x] = acc;
        }
    }
    std::vector<double> out(static_cast<size_t>(oh) * ow);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < 11; ++i) acc += k[i] * horiz[static_cast<size_t>(y + i) * ow + x];
            out[static_cast<size_t>(y) * ow + x] = acc;
        }
    }
    return out;
}

}  // namespace detail

// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
// dynamic range 1, valid windows only, channels averaged.
inline double ssim(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw ShapeError("ssim: shapes differ: " + a.shape() + " vs " + b.shape());
    if (a.height() < 11 || a.width() < 11) {
        throw ShapeError("ssim: frame " + a.shape() + " smaller than the 11x11 window");
    }
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    const std::vector<double> k = detail::gaussian_window_11();
    const size_t n = static_cast<size_t>(a.height() - 10) * (a.width() - 10);

    // E[x^2] and E[xy] need squared/product planes at full resolution
    auto to_plane = [&](const Tensor& t, int c) {
        std::vector<float> p(static_cast<size_t>(t.height()) * t.width());
        std::copy_n(t.plane(c), p.size(), p.begin());
        return Tensor::from_data(1, t.height(), t.width(), std::move(p));
    };
    double channel_sum = 0.0;
    for (int c = 0; c < a.channels(); ++c) {
        Tensor pa = to_plane(a, c), pb = to_plane(b, c);
        Tensor paa(1, a.height(), a.width()), pbb(1, a.height(), a.width()), pab(1, a.height(), a.width());
        for (size_t i = 0; i < pa.data().size(); ++i) {
            paa.data()[i] = pa.data()[i] * pa.data()[i];
            pbb.data()[i] = pb.data()[i] * pb.data()[i];
            pab.data()[i] = pa.data()[i] * pb.data()[i];
        }
        const auto mu_a = detail::blur_valid(pa, 0, k);
        const auto mu_b = detail::blur_valid(pb, 0, k);
        const auto e_aa = detail::blur_valid(paa, 0, k);
        const auto e_bb = detail::blur_valid(pbb, 0, k);
        const auto e_ab = detail::blur_valid(pab, 0, k);
        double acc = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const double ma = mu_a[i], mb = mu_b[i];
            const double va = e_aa[i] - ma * ma;
            const double vb = e_bb[i] - mb * mb;
            const double cov = e_ab[i] - ma * mb;
            acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
        channel_sum += acc / double(n);
    }
    return channel_sum / a.channels();
}

namespace detail {

inline Tensor to_luma(const Tensor& t) {
    if (t.channels() == 1) return t;
    if (t.channels() != 3) throw ShapeError("block_match_flow: frames must have 1 or 3 channels");
    Tensor out(1, t.height(), t.width());
    for (int y = 0; y < t.height(); ++y) {
        const float* r = t.row(0, y);
        const float* g = t.row(1, y);
        const float* b = t.row(2, y);
        float* dst = out.row(0, y);
        for (int x = 0; x < t.width(); ++x) dst[x] = 0.299f * r[x] + 0.587f * g[x] + 0.114f * b[x];
    }
    return out;
}

inline Tensor halve_mean(const Tensor& t) {
    const int oh = t.height() / 2, ow = t.width() / 2;
    Tensor out(1, oh, ow);
    for (int y = 0; y < oh; ++y) {
        const float* r0 = t.row(0, 2 * y);
        const float* r1 = t.row(0, 2 * y + 1);
        float* dst = out.row(0, y);
        for (int x = 0; x < ow; ++x) {
            dst[x] = 0.25f * (r0[2 * x] + r0[2 * x + 1] + r1[2 * x] + r1[2 * x + 1]);
        }
    }
    return out;
}

struct BlockGrid {
    int rows = 0, cols = 0;
    std::vector<int> dy, dx;  // per block, row-major
};

// SAD of an 8x8 (or block^2) patch anchored at (y0,x0) in `from` against
// `to` displaced by (dy,dx); target reads clamp at the frame border.
inline float block_sad(const Tensor& from, const Tensor& to, int y0, int x0, int dy, int dx, int block) {
    const int h = to.height(), w = to.width();
    float acc = 0.0f;
    for (int i = 0; i < block; ++i) {
        const float* src = from.row(0, y0 + i);
        const float* dst = to.row(0, std::clamp(y0 + dy + i, 0, h - 1));
        for (int j = 0; j < block; ++j) {
            acc += std::fabs(src[x0 + j] - dst[std::clamp(x0 + dx + j, 0, w - 1)]);
        }
    }
    return acc;
}

inline BlockGrid match_level(const Tensor& from, const Tensor& to, const BlockGrid* parent, int block,
                             int radius) {
    const int h = from.height(), w = from.width();
    BlockGrid g;
    g.rows = (h + block - 1) / block;
    g.cols = (w + block - 1) / block;
    g.dy.resize(static_cast<size_t>(g.rows) * g.cols);
    g.dx.resize(g.dy.size());
    for (int by = 0; by < g.rows; ++by) {
        const int y0 = std::min(by * block, h - block);
        for (int bx = 0; bx < g.cols; ++bx) {
            const int x0 = std::min(bx * block, w - block);
            int init_dy = 0, init_dx = 0;
            if (parent) {
                const int py = std::min(by / 2, parent->rows - 1);
                const int px = std::min(bx / 2, parent->cols - 1);
                init_dy = 2 * parent->dy[static_cast<size_t>(py) * parent->cols + px];
                init_dx = 2 * parent->dx[static_cast<size_t>(py) * parent->cols + px];
            }
            float best_sad = 0.0f;
            int best_d2 = 0, best_dy = 0, best_dx = 0;
            bool first = true;
            for (int dy = init_dy - radius; dy <= init_dy + radius; ++dy) {
                for (int dx = init_dx - radius; dx <= init_dx + radius; ++dx) {
                    const float sad = block_sad(from, to, y0, x0, dy, dx, block);
                    const int d2 = dy * dy + dx * dx;
                    if (first || sad < best_sad || (sad == best_sad && d2 < best_d2)) {
                        first = false;
                        best_sad = sad;
                        best_d2 = d2;
                        best_dy = dy;
                        best_dx = dx;
                    }
                }
            }
            g.dy[static_cast<size_t>(by) * g.cols + bx] = best_dy;
            g.dx[static_cast<size_t>(by) * g.cols + bx] = best_dx;
        }
    }
    return g;
}

}  // namespace detail

// Coarse-to-fine integer block matching on Rec.601 luma. The result assigns
// every pixel the motion of its block; ties prefer the smaller displacement,
// then the lexicographically smaller (dy,dx). Returned flow maps `from`
// positions to `to` positions (content shifted +2 px in x gives u = +2).
inline FlowField block_match_flow(const Tensor& from, const Tensor& to, int block = 8, int radius = 4,
                                  int levels = 3) {
    if (!from.same_shape(to)) {
        throw ShapeError("block_match_flow: shapes differ: " + from.shape() + " vs " + to.shape());
    }
    if (block < 1 || radius < 0 || levels < 1) throw ValueError("block_match_flow: bad parameters");
    if (from.height() < block || from.width() < block) {
        throw ShapeError("block_match_flow: frame " + from.shape() + " smaller than the matching block");
    }
    std::vector<Tensor> pyr_a, pyr_b;
    pyr_a.push_back(detail::to_luma(from));
    pyr_b.push_back(detail::to_luma(to));
    while (static_cast<int>(pyr_a.size()) < levels &&
           std::min(pyr_a.back().height(), pyr_a.back().width()) / 2 >= block) {
        pyr_a.push_back(detail::halve_mean(pyr_a.back()));
        pyr_b.push_back(detail::halve_mean(pyr_b.back()));
    }
    detail::BlockGrid grid;
    for (int l = static_cast<int>(pyr_a.size()) - 1; l >= 0; --l) {
        const detail::BlockGrid* parent = (l == static_cast<int>(pyr_a.size()) - 1) ? nullptr : &grid;
        grid = detail::match_level(pyr_a[l], pyr_b[l], parent, block, radius);
    }
    FlowField out(from.height(), from.width());
    for (int y = 0; y < from.height(); ++y) {
        const int by = std::min(y / block, grid.rows - 1);
        for (int x = 0; x < from.width(); ++x) {
            const int bx = std::min(x / block, grid.cols - 1);
            out.u(y, x) = float(grid.dx[static_cast<size_t>(by) * grid.cols + bx]);
            out.v(y, x) = float(grid.dy[static_cast<size_t>(by) * grid.cols + bx]);
        }
    }
    return out;
}

struct TofResult {
    double tof = 0.0;  // mean over pairs of the per-pixel |du|+|dv| mean
    double epe = 0.0;  // mean over pairs of the endpoint error
    std::vector<double> pair_tof, pair_epe;
};

// Temporal motion consistency from explicit motion fields: gt_flows[i] and
// pred_flows[i] describe frame i -> i+1 of the respective sequences.
inline TofResult tof(std::span<const FlowField> gt_flows, std::span<const FlowField> pred_flows) {
    if (gt_flows.size() != pred_flows.size()) {
        throw ValueError("tof: " + std::to_string(gt_flows.size()) + " reference flows vs " +
                         std::to_string(pred_flows.size()) + " predicted flows");
    }
    if (gt_flows.empty()) throw ValueError("tof: need at least one frame pair");
    TofResult res;
    for (size_t i = 0; i < gt_flows.size(); ++i) {
        const FlowField& g = gt_flows[i];
        const FlowField& p = pred_flows[i];
        if (g.height() != p.height() || g.width() != p.width()) {
            throw ShapeError("tof: flow pair " + std::to_string(i) + " shapes differ");
        }
        double acc = 0.0;
        for (int y = 0; y < g.height(); ++y) {
            for (int x = 0; x < g.width(); ++x) {
                acc += std::fabs(double(g.u(y, x)) - double(p.u(y, x))) +
                       std::fabs(double(g.v(y, x)) - double(p.v(y, x)));
            }
        }
        res.pair_tof.push_back(acc / (double(g.height()) * g.width()));
        res.pair_epe.push_back(epe(g, p));
    }
    for (double v : res.pair_tof) res.tof += v;
    for (double v : res.pair_epe) res.epe += v;
    res.tof /= double(res.pair_tof.size());
    res.epe /= double(res.pair_epe.size());
    return res;
}

// Same metric with motion estimated by the built-in block matcher on each
// consecutive pair of both sequences.
inline TofResult tof(std::span<const Tensor> gt_frames, std::span<const Tensor> pred_frames) {
    if (gt_frames.size() != pred_frames.size()) {
        throw ValueError("tof: " + std::to_string(gt_frames.size()) + " reference frames vs " +
                         std::to_string(pred_frames.size()) + " predicted frames");
    }
    if (gt_frames.size() < 2) throw ValueError("tof: need sequences of at least 2 frames");
    std::vector<FlowField> gt_flows, pred_flows;
    for (size_t i = 0; i + 1 < gt_frames.size(); ++i) {
        gt_flows.push_back(block_match_flow(gt_frames[i], gt_frames[i + 1]));
        pred_flows.push_back(block_match_flow(pred_frames[i], pred_frames[i + 1]));
    }
    return tof(gt_flows, pred_flows);
}

struct MetricsReport {
    double psnr = 0.0;  // mean over frames
    double ssim = 0.0;  // mean over frames
    std::optional<double> tof, epe;
    std::vector<double> frame_psnr, frame_ssim;
    bool used_block_matcher = false;
};

// Frame-set metrics. External flows, when given, must hold the
// ground-truth pair motions first and the predicted pair motions second
// (n-1 each); otherwise sequences of length >= 2 fall back to the block
// matcher, and single frames leave tof/epe unset.
inline MetricsReport compute_metrics(std::span<const Tensor> gt, std::span<const Tensor> pred,
                                     std::span<const FlowField> external_flows = {}) {
    if (gt.size() != pred.size()) {
        throw ValueError("compute_metrics: " + std::to_string(gt.size()) + " reference frames vs " +
                         std::to_string(pred.size()) + " predicted frames");
    }
    if (gt.empty()) throw ValueError("compute_metrics: no frames");
    MetricsReport rep;
    for (size_t i = 0; i < gt.size(); ++i) {
        rep.frame_psnr.push_back(psnr(gt[i], pred[i]));
        rep.frame_ssim.push_back(ssim(gt[i], pred[i]));
        rep.psnr += rep.frame_psnr.back();
        rep.ssim += rep.frame_ssim.back();
    }
    rep.psnr /= double(gt.size());
    rep.ssim /= double(gt.size());
    if (!external_flows.empty()) {
        const size_t pairs = gt.size() - 1;
        if (external_flows.size() != 2 * pairs) {
            throw ValueError("compute_metrics: expected " + std::to_string(2 * pairs) +
                             " external flows (reference pairs then predicted pairs), got " +
                             std::to_string(external_flows.size()));
        }
        TofResult t = tof(external_flows.subspan(0, pairs), external_flows.subspan(pairs, pairs));
        rep.tof = t.tof;
        rep.epe = t.epe;
    } else if (gt.size() >= 2) {
        TofResult t = tof(gt, pred);
        rep.tof = t.tof;
        rep.epe = t.epe;
        rep.used_block_matcher = true;
    }
    return rep;
}

}  // namespace xvfi
