#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "syncmapv2/pipeline.hpp"
#include "syncmapv2/serial.hpp"

namespace fs = std::filesystem;
using namespace syncmap;

namespace {

// every flat config key doubles as a long option (underscores -> dashes)
const char* const kConfigKeys[] = {
    "resize", "grid_rows", "grid_cols", "repetitions", "list_size", "tau",
    "n_min", "n_max", "linkage", "double_tau", "seed", "esn_neurons",
    "esn_spectral_radius", "esn_sparsity", "esn_leak", "esn_input_scaling",
    "esn_weight_scaling", "k", "beta", "l_movmean", "lr_smoothing",
    "alpha_pos_floor", "alpha_neg_cap", "neg_amp_a", "neg_amp_b",
    "alpha_neg_constant", "adaptive_lr", "symmetrical", "space_norm",
    "moving_average", "leaking", "trace", "trace_probability", "mem_budget_mb",
    "threads", "output_dir", "cache_dir", "overlays"};

struct CommonOpts {
    std::string config_file;
    bool desk_profile = false;
    bool alpha_neg_constant = false;
    std::string ablation;
    std::vector<std::pair<std::string, std::string>> overrides;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_file, "flat key=value configuration file");
    cmd->add_flag("--desk-profile", o.desk_profile,
                  "reduced profile: 24x24 grid, tau 20000, readout window 500");
    cmd->add_flag("--alpha-neg-constant", o.alpha_neg_constant,
                  "hold the repulsion rate at the constant 1.0");
    cmd->add_option("--ablation", o.ablation,
                    "comma-separated components to disable: adaptive_lr, "
                    "symmetrical, space_norm, moving_average, leaking");
    for (const char* key : kConfigKeys) {
        if (std::string(key) == "alpha_neg_constant") continue;  // explicit flag above
        std::string name = "--";
        for (const char* p = key; *p; ++p) name += *p == '_' ? '-' : *p;
        cmd->add_option_function<std::string>(
            name,
            [key, &o](const std::string& v) { o.overrides.emplace_back(key, v); },
            std::string("config key ") + key);
    }
}

PipelineConfig build_config(const CommonOpts& o) {
    PipelineConfig cfg;
    if (!o.config_file.empty()) cfg = load_config(o.config_file);
    if (o.desk_profile) cfg.apply_desk_profile();
    for (const auto& [key, value] : o.overrides) apply_config_entry(cfg, key, value);
    if (!o.ablation.empty()) {
        std::size_t pos = 0;
        while (pos <= o.ablation.size()) {
            const std::size_t comma = o.ablation.find(',', pos);
            const std::string flag =
                o.ablation.substr(pos, comma == std::string::npos ? std::string::npos
                                                                  : comma - pos);
            if (flag == "adaptive_lr") cfg.dynamics.adaptive_lr = false;
            else if (flag == "symmetrical") cfg.dynamics.symmetrical = false;
            else if (flag == "space_norm") cfg.dynamics.space_norm = false;
            else if (flag == "moving_average") cfg.dynamics.moving_average = false;
            else if (flag == "leaking") cfg.dynamics.leaking = false;
            else if (!flag.empty()) throw ConfigError("unknown ablation flag: " + flag);
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
    }
    if (o.alpha_neg_constant) cfg.dynamics.alpha_neg_constant = true;
    cfg.finalize();
    cfg.validate();
    return cfg;
}

int cmd_segment(const CommonOpts& common, const std::string& image_path,
                const std::string& gt_path, bool save_map) {
    const PipelineConfig cfg = build_config(common);
    const ImageTensor img = load_image(image_path);
    const EsnWeights esn = init_esn(cfg.esn);
    MapState map = init_map(cfg.n_patches(), cfg.dynamics);
    std::mt19937_64 input_rng(cfg.input_seed());
    const SegmentResult res =
        segment_image(img, cfg, esn, map, input_rng, cfg.tau, image_path);

    const fs::path out(cfg.output_dir);
    fs::create_directories(out / "labels");
    ScoreTable scores;
    LabelMap gt;
    if (!gt_path.empty()) gt = load_label_map(gt_path);
    for (std::size_t i = 0; i < res.n_values.size(); ++i) {
        const int n = res.n_values[i];
        char name[32];
        std::snprintf(name, sizeof(name), "n%02d.png", n);
        const LabelMap pixels =
            labels_to_pixels(res.grid_labels[i], img.height, img.width, cfg.resize);
        save_label_map_png(pixels, out / "labels" / name);
        if (cfg.emit_overlays) {
            fs::create_directories(out / "overlays");
            emit_overlay(img, pixels, out / "overlays" / name);
        }
        if (!gt_path.empty()) {
            const LabelMap pred =
                labels_to_pixels(res.grid_labels[i], gt.height, gt.width, cfg.resize);
            scores.rows.push_back(
                {image_path, "clean", n, unsupervised_miou(pred, gt)});
        }
    }
    if (cfg.dynamics.trace_enabled && !map.trace.empty()) {
        fs::create_directories(out / "traces");
        std::ofstream os = open_output(out / "traces" / "dpos.csv");
        os << "step,d_pos\n";
        for (const auto& [s, d] : map.trace) os << s << "," << d << "\n";
    }
    if (save_map) {
        fs::create_directories(out / "checkpoints");
        save_map_state(map, out / "checkpoints" / "final.map");
    }
    if (!gt_path.empty()) {
        save_scores_csv(scores, out / "scores.csv");
        const auto [n_star, best] = ods(scores);
        std::printf("ods n=%d miou=%.6f\n", n_star, best);
        std::printf("ois miou=%.6f\n", ois(scores));
    }
    if (res.degenerate)
        std::printf("degenerate input: segment labels are arbitrary\n");
    std::printf("wrote %s\n", out.generic_string().c_str());
    return 0;
}

int cmd_bench_standard(const CommonOpts& common, const std::string& manifest_path) {
    const PipelineConfig cfg = build_config(common);
    const auto manifest = load_manifest(manifest_path);
    const StandardReport rep = run_standard(manifest, cfg);
    std::size_t failed = 0;
    for (const auto& rec : rep.records)
        if (rec.failed) ++failed;
    std::printf("images=%zu failed=%zu\n", manifest.size(), failed);
    std::printf("ods n=%d miou=%.6f\n", rep.ods_n, rep.ods_miou);
    std::printf("ois miou=%.6f\n", rep.ois_miou);
    std::printf("baseline random=%.6f kmeans=%.6f\n", rep.random_baseline_miou,
                rep.kmeans_baseline_miou);
    std::printf("wrote %s\n", cfg.output_dir.c_str());
    return 0;
}

int cmd_bench_robustness(const CommonOpts& common, const std::string& manifest_path,
                         bool identity_hook) {
    const PipelineConfig cfg = build_config(common);
    const auto manifest = load_manifest(manifest_path);
    const RobustnessReport rep = run_robustness(manifest, cfg, identity_hook);
    std::printf("clean ois=%.6f (ods n=%d miou=%.6f)\n", rep.clean_ois,
                rep.clean_ods_n, rep.clean_ods_miou);
    for (const auto& rk : rep.kinds) {
        std::printf("%-14s mean_ois=%.6f drop=%.2f%%", to_string(rk.kind).c_str(),
                    rk.mean_ois, 100.0 * rk.relative_drop);
        if (rk.clean_vs_corrupted)
            std::printf(" p=%.6g", rk.clean_vs_corrupted->p);
        std::printf("\n");
    }
    std::printf("wrote %s\n", cfg.output_dir.c_str());
    return 0;
}

int cmd_bench_adaptability(const CommonOpts& common, const std::string& manifest_path) {
    const PipelineConfig cfg = build_config(common);
    const auto manifest = load_manifest(manifest_path);
    const AdaptabilityReport rep = run_adaptability(manifest, cfg);
    double no_mean = 0.0, re_mean = 0.0;
    for (double v : rep.noreinit_ois) no_mean += v;
    for (double v : rep.reinit_ois) re_mean += v;
    if (!rep.noreinit_ois.empty()) {
        no_mean /= static_cast<double>(rep.noreinit_ois.size());
        re_mean /= static_cast<double>(rep.reinit_ois.size());
    }
    std::printf("noreinit mean ois=%.6f reinit mean ois=%.6f\n", no_mean, re_mean);
    if (rep.paired)
        std::printf("paired t=%.6f dof=%.0f p=%.6g\n", rep.paired->t,
                    rep.paired->dof, rep.paired->p);
    std::printf("wrote %s\n", cfg.output_dir.c_str());
    return 0;
}

int cmd_corrupt(const std::string& in_path, const std::string& out_path,
                const std::string& kind_name, int severity,
                const std::optional<std::uint64_t>& seed) {
    CorruptionSpec spec;
    spec.kind = corruption_kind_from_string(kind_name);
    spec.severity = severity;
    spec.seed = seed ? *seed : corruption_seed(in_path, spec.kind, severity);
    const ImageTensor img = load_image(in_path);
    save_image_png(corrupt(img, spec), out_path);
    std::printf("wrote %s\n", out_path.c_str());
    return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& gt_path) {
    LabelMap pred = load_label_map(pred_path);
    const LabelMap gt = load_label_map(gt_path);
    if (pred.height != gt.height || pred.width != gt.width)
        pred = resize_nearest(pred, gt.height, gt.width);
    std::printf("miou=%.9f\n", unsupervised_miou(pred, gt));
    return 0;
}

int cmd_convert_gt(const std::string& in_path, const std::string& out_path) {
    save_label_map_png(load_label_map(in_path), out_path);
    std::printf("wrote %s\n", out_path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SyncMapV2 unsupervised image segmentation"};
    app.require_subcommand(1);

    CommonOpts seg_opts;
    std::string seg_image, seg_gt;
    bool seg_save_map = false;
    auto* seg = app.add_subcommand("segment", "segment a single image");
    seg->add_option("image", seg_image, "input image")->required();
    seg->add_option("--gt", seg_gt, "ground-truth label map for scoring");
    seg->add_flag("--save-map", seg_save_map, "write the final map checkpoint");
    add_common(seg, seg_opts);

    CommonOpts std_opts;
    std::string std_manifest;
    auto* bstd = app.add_subcommand("bench-standard",
                                    "clean benchmark over a manifest");
    bstd->add_option("manifest", std_manifest, "image/ground-truth manifest")
        ->required();
    add_common(bstd, std_opts);

    CommonOpts rob_opts;
    std::string rob_manifest;
    bool identity_hook = false;
    auto* brob = app.add_subcommand("bench-robustness",
                                    "corruption benchmark over a manifest");
    brob->add_option("manifest", rob_manifest, "image/ground-truth manifest")
        ->required();
    brob->add_flag("--identity-hook", identity_hook,
                   "replace every corruption with the identity (self-check)");
    add_common(brob, rob_opts);

    CommonOpts ada_opts;
    std::string ada_manifest;
    auto* bada = app.add_subcommand("bench-adaptability",
                                    "sequential no-reinitialization benchmark");
    bada->add_option("manifest", ada_manifest, "image/ground-truth manifest")
        ->required();
    add_common(bada, ada_opts);

    std::string cor_in, cor_out, cor_kind = "gaussian_noise";
    int cor_severity = 3;
    std::optional<std::uint64_t> cor_seed;
    auto* cor = app.add_subcommand("corrupt", "apply one corruption to an image");
    cor->add_option("input", cor_in, "input image")->required();
    cor->add_option("output", cor_out, "output PNG")->required();
    cor->add_option("--kind", cor_kind,
                    "gaussian_noise, zoom_blur, snow, contrast or identity");
    cor->add_option("--severity", cor_severity, "severity level")
        ->check(CLI::Range(1, 5));
    cor->add_option("--seed", cor_seed, "noise seed (default: content-derived)");

    std::string eval_pred, eval_gt;
    auto* ev = app.add_subcommand("eval", "score a prediction against ground truth");
    ev->add_option("--pred", eval_pred, "predicted label map (PNG)")->required();
    ev->add_option("--gt", eval_gt, "ground-truth label map")->required();

    std::string cg_in, cg_out;
    auto* cg = app.add_subcommand("convert-gt",
                                  "convert a ground-truth file to 16-bit PNG");
    cg->add_option("input", cg_in, "text grid or PNG label map")->required();
    cg->add_option("output", cg_out, "output PNG")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (seg->parsed()) return cmd_segment(seg_opts, seg_image, seg_gt, seg_save_map);
        if (bstd->parsed()) return cmd_bench_standard(std_opts, std_manifest);
        if (brob->parsed())
            return cmd_bench_robustness(rob_opts, rob_manifest, identity_hook);
        if (bada->parsed()) return cmd_bench_adaptability(ada_opts, ada_manifest);
        if (cor->parsed())
            return cmd_corrupt(cor_in, cor_out, cor_kind, cor_severity, cor_seed);
        if (ev->parsed()) return cmd_eval(eval_pred, eval_gt);
        if (cg->parsed()) return cmd_convert_gt(cg_in, cg_out);
    } catch (const std::exception& ex) {
        std::cerr << "syncmapv2: error: " << ex.what() << "\n";
        return 1;
    }
    return 0;
}
