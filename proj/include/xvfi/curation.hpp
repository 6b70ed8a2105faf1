#pragma once

// Dataset curation: scenes carry occlusion and flow-magnitude maps sampled
// every N frames. Candidate clips are enumerated on a boundary-excluded
// spatial grid crossed with temporal windows, scored by mean occlusion via
// integral images, and the top fraction is kept greedily without
// spatiotemporal overlap. Percentile statistics summarize a dataset.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "xvfi/common.hpp"
#include "xvfi/io.hpp"
#include "xvfi/tensor.hpp"

namespace xvfi {

struct SceneMaps {
    std::string scene_id;
    std::vector<int> frame_indices;      // strictly increasing
    std::vector<Tensor> occlusion;       // 1 x H x W, values in [0,255]
    std::vector<Tensor> flow_magnitude;  // 1 x H x W, values >= 0

    void validate() const {
        if (scene_id.empty()) throw ValueError("scene without an id");
        if (frame_indices.empty()) throw ValueError("scene '" + scene_id + "' has no sampled frames");
        if (occlusion.size() != frame_indices.size() || flow_magnitude.size() != frame_indices.size()) {
            throw ValueError("scene '" + scene_id + "': map counts do not match the frame index list");
        }
        for (size_t i = 1; i < frame_indices.size(); ++i) {
            if (frame_indices[i] <= frame_indices[i - 1]) {
                throw ValueError("scene '" + scene_id + "': frame indices must increase, got " +
                                 std::to_string(frame_indices[i - 1]) + " then " +
                                 std::to_string(frame_indices[i]));
            }
        }
        for (size_t i = 0; i < occlusion.size(); ++i) {
            const Tensor& o = occlusion[i];
            const Tensor& f = flow_magnitude[i];
            if (o.channels() != 1 || f.channels() != 1 || !o.same_shape(occlusion[0]) ||
                f.height() != o.height() || f.width() != o.width()) {
                throw ShapeError("scene '" + scene_id + "': maps must be single-channel and equally sized");
            }
            for (float v : o.data()) {
                if (!(v >= 0.0f && v <= 255.0f)) {
                    throw ValueError("scene '" + scene_id + "': occlusion values must lie in [0,255]");
                }
            }
            for (float v : f.data()) {
                if (!(v >= 0.0f)) {
                    throw ValueError("scene '" + scene_id + "': flow magnitudes must be non-negative");
                }
            }
        }
    }
};

struct ClipRecord {
    std::string scene_id;
    int x = 0, y = 0;     // patch origin in analysis coordinates
    int patch = 0;        // patch side length
    int start_frame = 0;  // first frame of the clip
    int length = 0;       // clip length in frames
    double score = 0.0;   // mean occlusion over the patch and sampled frames
};

struct CurationConfig {
    int patch_size = 768;
    int stride_x = 41;  // (4096-768)/41 -> 81 grid columns on 4K footage
    int stride_y = 44;  // (2160-768)/44 -> 31 grid rows
    int clip_len = 65;
    int temporal_stride = 32;
    double top_fraction = 0.10;
    bool enforce_non_overlap = true;

    void validate() const {
        if (patch_size < 1) throw ValueError("patch size must be >= 1");
        if (stride_x < 1 || stride_y < 1 || temporal_stride < 1) throw ValueError("strides must be >= 1");
        if (clip_len < 2) throw ValueError("clip length must be >= 2");
        if (!(top_fraction > 0.0 && top_fraction <= 1.0)) throw ValueError("top fraction must be in (0,1]");
    }
};

// Patch origins along one axis: k*stride for k >= 1 while the patch still
// fits; the boundary cell at 0 is excluded.
inline std::vector<int> axis_origins(int extent, int patch, int stride) {
    if (patch < 1 || stride < 1) throw ValueError("axis_origins: patch and stride must be >= 1");
    if (patch > extent) {
        throw ShapeError("axis_origins: patch " + std::to_string(patch) + " exceeds extent " +
                         std::to_string(extent));
    }
    std::vector<int> out;
    for (int k = 1; k * stride + patch <= extent; ++k) out.push_back(k * stride);
    return out;
}

// Clip start frames: first + k*stride for k >= 1 while the clip still fits
// inside the sampled frame span (same boundary exclusion as the grid).
inline std::vector<int> temporal_origins(int first_frame, int last_frame, int clip_len, int stride) {
    if (clip_len < 2 || stride < 1) throw ValueError("temporal_origins: bad length or stride");
    const int extent = last_frame - first_frame + 1;
    std::vector<int> out;
    for (int k = 1; k * stride + clip_len <= extent; ++k) out.push_back(first_frame + k * stride);
    return out;
}

// Linear-interpolation percentiles (inclusive endpoints) of an unsorted
// value list; `percentiles` are on the [0,100] scale.
inline std::vector<double> percentile_stats(std::span<const double> values,
                                            std::span<const double> percentiles) {
    if (values.empty()) throw ValueError("percentile_stats: empty value list");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> out;
    for (double p : percentiles) {
        if (!(p >= 0.0 && p <= 100.0)) {
            throw ValueError("percentile_stats: percentile " + std::to_string(p) + " outside [0,100]");
        }
        const double rank = p / 100.0 * double(sorted.size() - 1);
        const size_t lo = static_cast<size_t>(std::floor(rank));
        const size_t hi = std::min(lo + 1, sorted.size() - 1);
        out.push_back(sorted[lo] + (rank - double(lo)) * (sorted[hi] - sorted[lo]));
    }
    return out;
}

namespace detail {

// (h+1) x (w+1) summed-area table of one map.
inline std::vector<double> integral_image(const Tensor& t) {
    const int h = t.height(), w = t.width();
    std::vector<double> ii(static_cast<size_t>(h + 1) * (w + 1), 0.0);
    for (int y = 0; y < h; ++y) {
        const float* row = t.row(0, y);
        double run = 0.0;
        for (int x = 0; x < w; ++x) {
            run += row[x];
            ii[static_cast<size_t>(y + 1) * (w + 1) + (x + 1)] =
                ii[static_cast<size_t>(y) * (w + 1) + (x + 1)] + run;
        }
    }
    return ii;
}

inline double rect_sum(const std::vector<double>& ii, int w, int y, int x, int patch) {
    const int stride = w + 1;
    return ii[static_cast<size_t>(y + patch) * stride + (x + patch)] -
           ii[static_cast<size_t>(y) * stride + (x + patch)] -
           ii[static_cast<size_t>(y + patch) * stride + x] + ii[static_cast<size_t>(y) * stride + x];
}

}  // namespace detail

// Enumerates the spatial grid x temporal windows of one scene and scores
// each clip by the mean occlusion inside its patch across the sampled
// frames of its window. Record count is exactly cells_x * cells_y * windows.
inline std::vector<ClipRecord> score_clips(const SceneMaps& scene, const CurationConfig& cfg) {
    cfg.validate();
    scene.validate();
    const Tensor& first_map = scene.occlusion[0];
    if (cfg.patch_size > first_map.height() || cfg.patch_size > first_map.width()) {
        throw ShapeError("score_clips: patch " + std::to_string(cfg.patch_size) + " exceeds maps sized " +
                         first_map.shape());
    }
    const std::vector<int> xs = axis_origins(first_map.width(), cfg.patch_size, cfg.stride_x);
    const std::vector<int> ys = axis_origins(first_map.height(), cfg.patch_size, cfg.stride_y);
    const std::vector<int> starts = temporal_origins(scene.frame_indices.front(),
                                                     scene.frame_indices.back(), cfg.clip_len,
                                                     cfg.temporal_stride);
    std::vector<std::vector<double>> integrals;
    integrals.reserve(scene.occlusion.size());
    for (const Tensor& m : scene.occlusion) integrals.push_back(detail::integral_image(m));

    std::vector<ClipRecord> out;
    out.reserve(xs.size() * ys.size() * starts.size());
    const double patch_area = double(cfg.patch_size) * double(cfg.patch_size);
    for (int start : starts) {
        std::vector<size_t> in_window;
        for (size_t i = 0; i < scene.frame_indices.size(); ++i) {
            if (scene.frame_indices[i] >= start && scene.frame_indices[i] <= start + cfg.clip_len - 1) {
                in_window.push_back(i);
            }
        }
        if (in_window.empty()) {
            throw ValueError("score_clips: scene '" + scene.scene_id + "' has no sampled maps in clip [" +
                             std::to_string(start) + ", " + std::to_string(start + cfg.clip_len - 1) + "]");
        }
        for (int y : ys) {
            for (int x : xs) {
                double acc = 0.0;
                for (size_t i : in_window) {
                    acc += detail::rect_sum(integrals[i], first_map.width(), y, x, cfg.patch_size);
                }
                ClipRecord r;
                r.scene_id = scene.scene_id;
                r.x = x;
                r.y = y;
                r.patch = cfg.patch_size;
                r.start_frame = start;
                r.length = cfg.clip_len;
                r.score = acc / (patch_area * double(in_window.size()));
                out.push_back(std::move(r));
            }
        }
    }
    return out;
}

inline bool clips_overlap(const ClipRecord& a, const ClipRecord& b) {
    if (a.scene_id != b.scene_id) return false;
    const bool spatial = a.x < b.x + b.patch && b.x < a.x + a.patch && a.y < b.y + b.patch &&
                         b.y < a.y + a.patch;
    const bool temporal =
        a.start_frame < b.start_frame + b.length && b.start_frame < a.start_frame + a.length;
    return spatial && temporal;
}

// Keeps the best ceil(fraction * N) records: sorted by score descending
// (ties by scene id, then origin x, y, then start frame), greedily
// skipping anything that overlaps an already-kept clip.
inline std::vector<ClipRecord> select_top(std::vector<ClipRecord> records, const CurationConfig& cfg) {
    cfg.validate();
    if (records.empty()) return {};
    std::sort(records.begin(), records.end(), [](const ClipRecord& a, const ClipRecord& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.scene_id != b.scene_id) return a.scene_id < b.scene_id;
        if (a.x != b.x) return a.x < b.x;
        if (a.y != b.y) return a.y < b.y;
        return a.start_frame < b.start_frame;
    });
    const size_t target = static_cast<size_t>(std::ceil(cfg.top_fraction * double(records.size())));
    std::vector<ClipRecord> kept;
    for (const ClipRecord& r : records) {
        if (kept.size() >= target) break;
        if (cfg.enforce_non_overlap) {
            bool clash = false;
            for (const ClipRecord& k : kept) {
                if (clips_overlap(k, r)) {
                    clash = true;
                    break;
                }
            }
            if (clash) continue;
        }
        kept.push_back(r);
    }
    return kept;
}

struct DatasetStats {
    // 25th/50th/75th percentiles of per-map means
    double occ_p25 = 0, occ_p50 = 0, occ_p75 = 0;
    double flow_p25 = 0, flow_p50 = 0, flow_p75 = 0;
    size_t sample_count = 0;
};

// Pools the per-sampled-map mean occlusion and mean flow magnitude over
// all scenes, then reports quartiles of each pool.
inline DatasetStats dataset_stats(std::span<const SceneMaps> scenes) {
    if (scenes.empty()) throw ValueError("dataset_stats: no scenes");
    std::vector<double> occ_means, flow_means;
    for (const SceneMaps& s : scenes) {
        s.validate();
        for (size_t i = 0; i < s.occlusion.size(); ++i) {
            double oa = 0.0, fa = 0.0;
            for (float v : s.occlusion[i].data()) oa += v;
            for (float v : s.flow_magnitude[i].data()) fa += v;
            occ_means.push_back(oa / double(s.occlusion[i].data().size()));
            flow_means.push_back(fa / double(s.flow_magnitude[i].data().size()));
        }
    }
    const std::vector<double> ps = {25.0, 50.0, 75.0};
    const auto oq = percentile_stats(occ_means, ps);
    const auto fq = percentile_stats(flow_means, ps);
    DatasetStats st;
    st.occ_p25 = oq[0];
    st.occ_p50 = oq[1];
    st.occ_p75 = oq[2];
    st.flow_p25 = fq[0];
    st.flow_p50 = fq[1];
    st.flow_p75 = fq[2];
    st.sample_count = occ_means.size();
    return st;
}

// One header plus one row per dataset, aligned columns.
inline std::string format_stats_table(const DatasetStats& st, const std::string& name) {
    char buf[256];
    std::string out =
        "dataset            occ p25   occ p50   occ p75  flow p25  flow p50  flow p75   samples\n";
    std::snprintf(buf, sizeof(buf), "%-16s %9.2f %9.2f %9.2f %9.2f %9.2f %9.2f %9zu\n", name.c_str(),
                  st.occ_p25, st.occ_p50, st.occ_p75, st.flow_p25, st.flow_p50, st.flow_p75,
                  st.sample_count);
    out += buf;
    return out;
}

// Loads a scene manifest: one record per line, tab-separated
// "scene-id<TAB>frame-index<TAB>occlusion.pgm<TAB>flow.flo", '#' comments
// and blank lines skipped, paths resolved relative to the manifest.
// Scenes keep first-appearance order; flow files become magnitude maps.
inline std::vector<SceneMaps> load_scene_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open manifest '" + path + "'");
    const std::filesystem::path base = std::filesystem::path(path).parent_path();

    std::vector<SceneMaps> scenes;
    std::map<std::string, size_t> index;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        size_t pos = 0;
        while (true) {
            const size_t tab = line.find('\t', pos);
            fields.push_back(line.substr(pos, tab == std::string::npos ? tab : tab - pos));
            if (tab == std::string::npos) break;
            pos = tab + 1;
        }
        if (fields.size() != 4) {
            throw FormatError("'" + path + "' line " + std::to_string(line_no) +
                              ": expected 4 tab-separated fields, got " + std::to_string(fields.size()));
        }
        int frame = 0;
        try {
            size_t used = 0;
            frame = std::stoi(fields[1], &used);
            if (used != fields[1].size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw FormatError("'" + path + "' line " + std::to_string(line_no) + ": bad frame index '" +
                              fields[1] + "'");
        }
        auto resolve = [&](const std::string& p) {
            std::filesystem::path fp(p);
            return fp.is_absolute() ? fp.string() : (base / fp).string();
        };
        Tensor occ = read_pgm(resolve(fields[2]));
        FlowField flow = read_flo(resolve(fields[3]));
        Tensor mag(1, flow.height(), flow.width());
        for (int y = 0; y < flow.height(); ++y) {
            for (int x = 0; x < flow.width(); ++x) {
                mag.at(0, y, x) = std::hypot(flow.u(y, x), flow.v(y, x));
            }
        }
        auto it = index.find(fields[0]);
        if (it == index.end()) {
            index.emplace(fields[0], scenes.size());
            scenes.push_back(SceneMaps{});
            scenes.back().scene_id = fields[0];
            it = index.find(fields[0]);
        }
        SceneMaps& s = scenes[it->second];
        s.frame_indices.push_back(frame);
        s.occlusion.push_back(std::move(occ));
        s.flow_magnitude.push_back(std::move(mag));
    }
    if (scenes.empty()) throw ValueError("manifest '" + path + "' lists no scenes");
    for (const SceneMaps& s : scenes) s.validate();
    return scenes;
}

}  // namespace xvfi
