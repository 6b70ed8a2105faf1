// Command-line front end: interpolation, flow approximation, metrics,
// dataset curation and weight-file management over the xvfi library.
//
// Exit codes: 0 success, 2 bad arguments or values, 3 file I/O or format
// problems, 4 shape or weight mismatches.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "xvfi/curation.hpp"
#include "xvfi/eval.hpp"
#include "xvfi/io.hpp"
#include "xvfi/pipeline.hpp"

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr const char* kToolVersion = "1.0.0";

// Round to six significant digits so reports are stable and readable.
double sig6(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return std::strtod(buf, nullptr);
}

ordered_json base_manifest(const std::string& command) {
    ordered_json m;
    m["command"] = command;
    m["version"] = kToolVersion;
    return m;
}

void write_json(const std::string& path, const ordered_json& j) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw xvfi::IoError("cannot open '" + path + "' for writing");
    os << j.dump(2) << "\n";
    if (!os) throw xvfi::IoError("failed writing '" + path + "'");
}

void write_text(const std::string& path, const std::string& body) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw xvfi::IoError("cannot open '" + path + "' for writing");
    os << body;
    if (!os) throw xvfi::IoError("failed writing '" + path + "'");
}

std::filesystem::path ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw xvfi::IoError("cannot create output directory '" + dir + "': " + ec.message());
    return std::filesystem::path(dir);
}

float parse_float_strict(const std::string& s, const std::string& what) {
    size_t idx = 0;
    float v = 0.0f;
    try {
        v = std::stof(s, &idx);
    } catch (const std::exception&) {
        throw xvfi::ValueError(what + ": '" + s + "' is not a number");
    }
    if (idx != s.size()) throw xvfi::ValueError(what + ": '" + s + "' is not a number");
    return v;
}

// "--t" accepts either a comma-separated list of instants or the literal
// "x8", which expands to the seven eighths between the frames.
std::vector<float> parse_times(const std::string& spec) {
    std::vector<float> times;
    if (spec == "x8") {
        for (int i = 1; i <= 7; ++i) times.push_back(float(i) / 8.0f);
        return times;
    }
    size_t pos = 0;
    while (pos <= spec.size()) {
        const size_t comma = spec.find(',', pos);
        const std::string item = spec.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        if (item.empty()) throw xvfi::ValueError("--t: empty entry in '" + spec + "'");
        const float t = parse_float_strict(item, "--t");
        if (!(t > 0.0f && t < 1.0f)) {
            throw xvfi::ValueError("--t: " + item + " must lie strictly between 0 and 1");
        }
        times.push_back(t);
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (times.empty()) throw xvfi::ValueError("--t: no instants given");
    return times;
}

std::string frame_name(float t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "out_t%04d.ppm", int(std::lround(double(t) * 1000.0)));
    return buf;
}

std::string tag_for(float t) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "t%04d", int(std::lround(double(t) * 1000.0)));
    return buf;
}

size_t count_holes(const xvfi::Tensor& mask) {
    size_t n = 0;
    const float* p = mask.plane(0);
    const size_t total = size_t(mask.height()) * mask.width();
    for (size_t i = 0; i < total; ++i) n += p[i] > 0.5f ? 1 : 0;
    return n;
}

// ---------------------------------------------------------------- interpolate

struct InterpolateArgs {
    std::string frame0, frame1, t_spec, weights, out_dir, mode = "inference", report;
    int scale_depth = 3;
    bool dump_flows = false;
};

int cmd_interpolate(const InterpolateArgs& a) {
    const auto wall0 = std::chrono::steady_clock::now();
    const std::vector<float> times = parse_times(a.t_spec);
    if (a.mode != "inference" && a.mode != "training") {
        throw xvfi::ValueError("--mode must be 'inference' or 'training', got '" + a.mode + "'");
    }
    if (!a.report.empty() && a.report != "json") {
        throw xvfi::ValueError("--report: unsupported format '" + a.report + "' (only 'json')");
    }
    {
        std::vector<std::string> names;
        for (float t : times) names.push_back(frame_name(t));
        std::sort(names.begin(), names.end());
        if (std::adjacent_find(names.begin(), names.end()) != names.end()) {
            throw xvfi::ValueError("--t: two instants map to the same output name; keep them >= 0.001 apart");
        }
    }

    const xvfi::Tensor i0 = xvfi::read_frame(a.frame0);
    const xvfi::Tensor i1 = xvfi::read_frame(a.frame1);
    const xvfi::WeightStore store = xvfi::load_weights(a.weights);

    xvfi::PipelineConfig cfg;
    cfg.scale_depth = a.scale_depth;
    cfg.times = times;
    cfg.training_mode = (a.mode == "training");

    const auto dir = ensure_out_dir(a.out_dir);
    const xvfi::InterpolationResult res = xvfi::interpolate(i0, i1, cfg, store);

    ordered_json manifest = base_manifest("interpolate");
    manifest["config"] = {{"frame0", a.frame0},
                          {"frame1", a.frame1},
                          {"weights", a.weights},
                          {"module_scale", store.module_scale()},
                          {"feature_width", store.feature_width()},
                          {"scale_depth", a.scale_depth},
                          {"mode", a.mode},
                          {"times", times},
                          {"threads", xvfi::thread_count()}};
    manifest["frame"] = {{"height", i0.height()},
                         {"width", i0.width()},
                         {"padded_height", res.padded_h},
                         {"padded_width", res.padded_w}};

    ordered_json outputs = ordered_json::array();
    for (const xvfi::TimeOutput& out : res.outputs) {
        const std::string name = frame_name(out.t);
        xvfi::write_ppm((dir / name).string(), out.frame);
        ordered_json entry;
        entry["t"] = sig6(out.t);
        entry["file"] = name;
        entry["holes_t0"] = count_holes(out.holes_t0);
        entry["holes_t1"] = count_holes(out.holes_t1);
        if (a.dump_flows) {
            const std::string tag = tag_for(out.t);
            const std::string f0 = "flow_" + tag + "_to0.flo";
            const std::string f1 = "flow_" + tag + "_to1.flo";
            xvfi::write_flo((dir / f0).string(), out.ft0);
            xvfi::write_flo((dir / f1).string(), out.ft1);
            xvfi::Tensor h0 = out.holes_t0;
            xvfi::Tensor h1 = out.holes_t1;
            for (float& v : h0.data()) v *= 255.0f;
            for (float& v : h1.data()) v *= 255.0f;
            const std::string p0 = "holes_" + tag + "_to0.pgm";
            const std::string p1 = "holes_" + tag + "_to1.pgm";
            xvfi::write_pgm((dir / p0).string(), h0);
            xvfi::write_pgm((dir / p1).string(), h1);
            entry["diagnostics"] = {f0, f1, p0, p1};
        }
        outputs.push_back(entry);
        std::cout << "wrote " << (dir / name).string() << "\n";
    }
    manifest["outputs"] = outputs;

    const double total_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - wall0).count();
    manifest["timings_ms"] = {{"flow_estimation", sig6(res.biof_i_ms)},
                              {"frame_synthesis", sig6(res.biof_t_ms)},
                              {"total", sig6(total_ms)}};

    write_json((dir / "manifest.json").string(), manifest);
    if (!a.report.empty()) write_json((dir / "report.json").string(), manifest);
    return 0;
}

// ---------------------------------------------------------------------- flows

struct FlowsArgs {
    std::string f01, f10, z01, z10, method, out_dir;
    float t = 0.5f;
};

int cmd_flows(const FlowsArgs& a) {
    const xvfi::FlowField f01 = xvfi::read_flo(a.f01);
    const xvfi::FlowField f10 = xvfi::read_flo(a.f10);

    auto load_logits = [&](const std::string& path) {
        if (path.empty()) return xvfi::Tensor(1, f01.height(), f01.width(), 0.0f);
        const xvfi::Tensor z = xvfi::read_pfm(path);
        if (z.channels() != 1) {
            throw xvfi::ValueError("importance logits '" + path + "' must be single-channel");
        }
        return z;
    };

    xvfi::FlowApprox approx = [&] {
        if (a.method == "linear") return xvfi::linear_approx(f01, f10, a.t);
        if (a.method == "reversal") return xvfi::flow_reversal(f01, f10, a.t);
        if (a.method == "cfr") return xvfi::cfr(f01, f10, load_logits(a.z01), load_logits(a.z10), a.t);
        throw xvfi::ValueError("--method must be cfr, reversal or linear, got '" + a.method + "'");
    }();

    const auto dir = ensure_out_dir(a.out_dir);
    xvfi::write_flo((dir / "ft0.flo").string(), approx.t0);
    xvfi::write_flo((dir / "ft1.flo").string(), approx.t1);

    const size_t h0 = count_holes(approx.holes_t0);
    const size_t h1 = count_holes(approx.holes_t1);
    std::cout << "holes ft0=" << h0 << " ft1=" << h1 << "\n";

    ordered_json manifest = base_manifest("flows");
    manifest["config"] = {{"f01", a.f01}, {"f10", a.f10},     {"z01", a.z01},
                          {"z10", a.z10}, {"method", a.method}, {"t", sig6(a.t)}};
    manifest["holes"] = {{"ft0", h0}, {"ft1", h1}};
    manifest["outputs"] = {"ft0.flo", "ft1.flo"};
    write_json((dir / "manifest.json").string(), manifest);
    return 0;
}

// -------------------------------------------------------------------- metrics

struct MetricsArgs {
    std::vector<std::string> gt, pred, flows;
    std::string out;
};

int cmd_metrics(const MetricsArgs& a) {
    if (a.gt.size() != a.pred.size()) {
        throw xvfi::ValueError("--gt and --pred counts differ (" + std::to_string(a.gt.size()) + " vs " +
                               std::to_string(a.pred.size()) + ")");
    }
    if (a.gt.empty()) throw xvfi::ValueError("--gt: at least one frame required");

    std::vector<xvfi::Tensor> gt, pred;
    for (const std::string& p : a.gt) gt.push_back(xvfi::read_frame(p));
    for (const std::string& p : a.pred) pred.push_back(xvfi::read_frame(p));
    std::vector<xvfi::FlowField> flows;
    for (const std::string& p : a.flows) flows.push_back(xvfi::read_flo(p));

    const xvfi::MetricsReport rep = xvfi::compute_metrics(gt, pred, flows);

    ordered_json j;
    j["psnr"] = sig6(rep.psnr);
    j["ssim"] = sig6(rep.ssim);
    j["tof"] = rep.tof ? ordered_json(sig6(*rep.tof)) : ordered_json(nullptr);
    j["epe"] = rep.epe ? ordered_json(sig6(*rep.epe)) : ordered_json(nullptr);
    if (rep.used_block_matcher) j["estimator"] = "block";
    ordered_json frames = ordered_json::array();
    for (size_t i = 0; i < gt.size(); ++i) {
        frames.push_back({{"gt", a.gt[i]},
                          {"pred", a.pred[i]},
                          {"psnr", sig6(rep.frame_psnr[i])},
                          {"ssim", sig6(rep.frame_ssim[i])}});
    }
    j["frames"] = frames;

    ordered_json manifest = base_manifest("metrics");
    manifest["config"] = {{"gt", a.gt}, {"pred", a.pred}, {"flows", a.flows}};
    j["manifest"] = manifest;
    write_json(a.out, j);
    std::cout << "psnr " << sig6(rep.psnr) << " dB, ssim " << sig6(rep.ssim) << "\n";
    return 0;
}

// ------------------------------------------------------------- curate / stats

struct CurateArgs {
    std::string manifest_path, out;
    xvfi::CurationConfig cfg;
    bool allow_overlap = false;
};

int cmd_curate(const CurateArgs& a) {
    xvfi::CurationConfig cfg = a.cfg;
    cfg.enforce_non_overlap = !a.allow_overlap;
    cfg.validate();

    const std::vector<xvfi::SceneMaps> scenes = xvfi::load_scene_manifest(a.manifest_path);
    std::vector<xvfi::ClipRecord> records;
    for (const xvfi::SceneMaps& s : scenes) {
        const auto scored = xvfi::score_clips(s, cfg);
        records.insert(records.end(), scored.begin(), scored.end());
    }
    const std::vector<xvfi::ClipRecord> kept = xvfi::select_top(records, cfg);

    ordered_json j;
    ordered_json clips = ordered_json::array();
    for (const xvfi::ClipRecord& r : kept) {
        clips.push_back({{"scene", r.scene_id},
                         {"x", r.x},
                         {"y", r.y},
                         {"patch", r.patch},
                         {"start_frame", r.start_frame},
                         {"length", r.length},
                         {"score", sig6(r.score)}});
    }
    j["clips"] = clips;
    j["scored"] = records.size();
    j["selected"] = kept.size();

    ordered_json manifest = base_manifest("curate");
    manifest["config"] = {{"manifest", a.manifest_path},
                          {"patch", cfg.patch_size},
                          {"stride_x", cfg.stride_x},
                          {"stride_y", cfg.stride_y},
                          {"clip_len", cfg.clip_len},
                          {"temporal_stride", cfg.temporal_stride},
                          {"top", cfg.top_fraction},
                          {"non_overlap", cfg.enforce_non_overlap}};
    j["manifest"] = manifest;
    write_json(a.out, j);
    std::cout << "selected " << kept.size() << " of " << records.size() << " clips\n";
    return 0;
}

struct StatsArgs {
    std::string manifest_path, out;
};

int cmd_stats(const StatsArgs& a) {
    const std::vector<xvfi::SceneMaps> scenes = xvfi::load_scene_manifest(a.manifest_path);
    const xvfi::DatasetStats st = xvfi::dataset_stats(scenes);
    const std::string name = std::filesystem::path(a.manifest_path).stem().string();
    const std::string table = xvfi::format_stats_table(st, name);

    ordered_json manifest = base_manifest("stats");
    manifest["config"] = {{"manifest", a.manifest_path}, {"scenes", scenes.size()}};
    write_text(a.out, table + "# manifest " + manifest.dump() + "\n");
    std::cout << table;
    return 0;
}

// ------------------------------------------------------------------- weights

struct InitWeightsArgs {
    std::string out;
    unsigned seed = 0;
    int module_scale = 4;
    int width = 64;
};

int cmd_init_weights(const InitWeightsArgs& a) {
    const xvfi::WeightStore store = xvfi::xavier_init(a.seed, a.module_scale, a.width);
    xvfi::save_weights(store, a.out);
    std::cout << "wrote " << a.out << ": M=" << store.module_scale() << " width=" << store.feature_width()
              << " layers=" << store.layers().size() << " params=" << store.parameter_count() << "\n";
    return 0;
}

int cmd_inspect_weights(const std::string& path) {
    const xvfi::WeightStore store = xvfi::load_weights(path);
    std::cout << "M=" << store.module_scale() << " width=" << store.feature_width() << "\n";
    for (const xvfi::LayerSpec& l : store.layers()) {
        std::cout << l.name << "  " << l.spec.in_channels << "->" << l.spec.out_channels << "  " << l.spec.kernel
                  << "x" << l.spec.kernel << (l.spec.stride() != 1 ? " /" + std::to_string(l.spec.stride()) : "")
                  << "\n";
    }
    std::cout << "layers " << store.layers().size() << ", parameters " << store.parameter_count() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"xvfi: scale-recursive video frame interpolation and dataset tooling"};
    app.require_subcommand(1);

    InterpolateArgs ia;
    CLI::App* interp = app.add_subcommand("interpolate", "synthesize frames between two inputs");
    interp->add_option("--frame0", ia.frame0, "first input frame (ppm or pfm)")->required();
    interp->add_option("--frame1", ia.frame1, "second input frame")->required();
    interp->add_option("--t", ia.t_spec, "comma-separated instants in (0,1), or 'x8'")->required();
    interp->add_option("--weights", ia.weights, "weight file")->required();
    interp->add_option("--scale-depth", ia.scale_depth, "recursion depth below full resolution");
    interp->add_option("--mode", ia.mode, "inference or training");
    interp->add_option("--report", ia.report, "also write report.json ('json')");
    interp->add_flag("--dump-flows", ia.dump_flows, "write flow fields and hole maps per instant");
    interp->add_option("--out-dir", ia.out_dir, "output directory")->required();

    FlowsArgs fa;
    CLI::App* flows = app.add_subcommand("flows", "approximate flows from time t out of a bidirectional pair");
    flows->add_option("--f01", fa.f01, "forward flow (.flo)")->required();
    flows->add_option("--f10", fa.f10, "backward flow (.flo)")->required();
    flows->add_option("--z01", fa.z01, "importance logits for f01 (single-channel pfm)");
    flows->add_option("--z10", fa.z10, "importance logits for f10");
    flows->add_option("--t", fa.t, "time in [0,1]")->required();
    flows->add_option("--method", fa.method, "cfr, reversal or linear")->required();
    flows->add_option("--out", fa.out_dir, "output directory")->required();

    MetricsArgs ma;
    CLI::App* metrics = app.add_subcommand("metrics", "score predictions against ground truth");
    metrics->add_option("--gt", ma.gt, "ground-truth frames")->required()->expected(-1);
    metrics->add_option("--pred", ma.pred, "predicted frames")->required()->expected(-1);
    metrics->add_option("--flows", ma.flows, "precomputed flows, gt pairs then pred pairs")->expected(-1);
    metrics->add_option("--out", ma.out, "report path (json)")->required();

    CurateArgs ca;
    CLI::App* curate = app.add_subcommand("curate", "select high-occlusion clips from a scene manifest");
    curate->add_option("--manifest", ca.manifest_path, "tab-separated scene index")->required();
    curate->add_option("--patch", ca.cfg.patch_size, "patch side length");
    curate->add_option("--stride-x", ca.cfg.stride_x, "horizontal grid stride");
    curate->add_option("--stride-y", ca.cfg.stride_y, "vertical grid stride");
    curate->add_option("--clip-len", ca.cfg.clip_len, "frames per clip");
    curate->add_option("--temporal-stride", ca.cfg.temporal_stride, "frames between window starts");
    curate->add_option("--top", ca.cfg.top_fraction, "fraction of clips to keep");
    curate->add_flag("--allow-overlap", ca.allow_overlap, "keep overlapping clips");
    curate->add_option("--out", ca.out, "selection output (json)")->required();

    StatsArgs sa;
    CLI::App* stats = app.add_subcommand("stats", "occlusion/flow percentile table for a manifest");
    stats->add_option("--manifest", sa.manifest_path, "tab-separated scene index")->required();
    stats->add_option("--out", sa.out, "table output (text)")->required();

    InitWeightsArgs wa;
    CLI::App* initw = app.add_subcommand("init-weights", "create a deterministic random weight file");
    initw->add_option("--seed", wa.seed, "rng seed");
    initw->add_option("--M", wa.module_scale, "module scale factor (2 or 4)");
    initw->add_option("--width", wa.width, "feature channel width");
    initw->add_option("--out", wa.out, "weight file to write")->required();

    std::string inspect_path;
    CLI::App* inspect = app.add_subcommand("inspect-weights", "print the layer table of a weight file");
    inspect->add_option("--in", inspect_path, "weight file to read")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (interp->parsed()) return cmd_interpolate(ia);
        if (flows->parsed()) return cmd_flows(fa);
        if (metrics->parsed()) return cmd_metrics(ma);
        if (curate->parsed()) return cmd_curate(ca);
        if (stats->parsed()) return cmd_stats(sa);
        if (initw->parsed()) return cmd_init_weights(wa);
        if (inspect->parsed()) return cmd_inspect_weights(inspect_path);
    } catch (const xvfi::ValueError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const xvfi::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const xvfi::FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const xvfi::ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const xvfi::WeightError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 2;
}
