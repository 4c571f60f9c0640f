// Acceptance harness: one self-contained check per release criterion, each
// printing a single PASS/FAIL/SKIP line. Exit code 0 when every selected
// criterion passes, 1 on any failure, 77 when everything selected was
// skipped (missing optional inputs such as the benchmark manifests).
//
//   acceptance [--criteria 1,2,5] [--cli path/to/syncmapv2]
//
// Criteria 10 and 11 need real image manifests and run for hours; they are
// driven by the SMV2_BENCH_MANIFEST / SMV2_ADAPT_MANIFEST environment
// variables and skip when those are unset. Criterion 13 needs the CLI binary
// (--cli or SMV2_CLI).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "syncmapv2/clustering.hpp"
#include "syncmapv2/corruption.hpp"
#include "syncmapv2/evaluation.hpp"
#include "syncmapv2/image.hpp"
#include "syncmapv2/pipeline.hpp"
#include "syncmapv2/reservoir.hpp"
#include "syncmapv2/similarity.hpp"
#include "syncmapv2/syncmap.hpp"
#include "testutil.hpp"

using namespace syncmap;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int id = 0;
    bool pass = false;
    bool skipped = false;
    std::string detail;
};

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof buf, f, args);
    va_end(args);
    return buf;
}

Outcome pass(int id, std::string detail) { return {id, true, false, std::move(detail)}; }
Outcome fail(int id, std::string detail) { return {id, false, false, std::move(detail)}; }
Outcome skip(int id, std::string detail) { return {id, false, true, std::move(detail)}; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- criterion 1
// One hand-checked update: fixed 4x2 map, activation {0,1} vs {2,3}, every
// resulting coordinate reproduced to 1e-9.

Outcome criterion_1() {
    const auto t0 = std::chrono::steady_clock::now();
    DynamicsConfig cfg;
    cfg.k = 2;
    cfg.l_movmean = 50;

    Eigen::MatrixXd coords(4, 2);
    coords << 1.0, 0.5, 0.2, -0.3, -0.7, 0.9, -0.4, -1.1;
    MapState map = make_map_state(coords, 0.05, 0, cfg);

    ActivationSets sets;
    sets.ps = {0, 1};
    sets.ns = {2, 3};
    step(map, sets, cfg);

    Eigen::MatrixXd want(4, 2);
    want << 1.4933147427518092, 0.6371694075419243,
            0.2842984936209236, -0.3778285619525425,
            -1.1225062507718717, 1.1775464465062755,
            -0.655106985600861, -1.4368872920956572;

    const double err = (map.coords - want).cwiseAbs().maxCoeff();
    const double elapsed = seconds_since(t0);
    if (err > 1e-9) return fail(1, fmt("hand-checked step off by %.3e", err));
    if (elapsed > 1.0) return fail(1, fmt("took %.2fs, limit 1s", elapsed));
    return pass(1, fmt("all coordinates within %.3e of the hand values (%.2fs)", err, elapsed));
}

// ------------------------------------------------------------ criteria 2-4
// One shared 10^4-step run on a 100-node, 15-dimensional map with five
// positive nodes per step. After every step: each dimension has zero mean
// and unit population deviation to 1e-9 (2), the sampled negative set
// matches the positive set in size (3), and the adaptive rates respect the
// 0.05 floor and 1.5 cap (4).

struct DynamicsRunChecks {
    Outcome c2, c3, c4;
};

DynamicsRunChecks run_dynamics_checks() {
    const auto t0 = std::chrono::steady_clock::now();
    DynamicsConfig cfg;
    cfg.k = 15;
    cfg.seed = 20240816;

    const int n = 100;
    MapState map = init_map(n, cfg);
    std::mt19937_64 source_rng(424242);
    std::vector<int> all(n);
    for (int i = 0; i < n; ++i) all[i] = i;

    double worst_mean = 0.0, worst_dev = 0.0;
    bool sizes_ok = true, rates_ok = true;
    std::uint64_t size_step = 0, rate_step = 0;

    for (int t = 0; t < 10000; ++t) {
        std::vector<int> ps;
        std::sample(all.begin(), all.end(), std::back_inserter(ps), 5, source_rng);
        const ActivationSets sets = select_activation(ps, n, map.rng, cfg.symmetrical);
        step(map, sets, cfg);

        if (map.last_updated && sets.ns.size() != sets.ps.size() && sizes_ok) {
            sizes_ok = false;
            size_step = map.step_count;
        }
        if ((map.last_alpha_pos < 0.05 || map.last_alpha_neg > 1.5 ||
             map.last_alpha_neg < 0.0) && rates_ok) {
            rates_ok = false;
            rate_step = map.step_count;
        }
        for (int j = 0; j < cfg.k; ++j) {
            const double mean = map.coords.col(j).mean();
            const double dev = std::sqrt(
                (map.coords.col(j).array() - mean).square().sum() / n);
            worst_mean = std::max(worst_mean, std::abs(mean));
            worst_dev = std::max(worst_dev, std::abs(dev - 1.0));
        }
    }
    const double elapsed = seconds_since(t0);

    DynamicsRunChecks out;
    if (worst_mean > 1e-9 || worst_dev > 1e-9)
        out.c2 = fail(2, fmt("normalization drift: |mean| up to %.3e, |std-1| up to %.3e",
                             worst_mean, worst_dev));
    else if (elapsed > 10.0)
        out.c2 = fail(2, fmt("took %.2fs, limit 10s", elapsed));
    else
        out.c2 = pass(2, fmt("10000 steps, |mean| <= %.3e, |std-1| <= %.3e (%.2fs)",
                             worst_mean, worst_dev, elapsed));
    out.c3 = sizes_ok ? pass(3, "negative set matched the positive set size on every step")
                      : fail(3, fmt("size mismatch at step %llu",
                                    static_cast<unsigned long long>(size_step)));
    out.c4 = rates_ok ? pass(4, "rates stayed in [0.05, ...] x [0, 1.5] on every step")
                      : fail(4, fmt("rate bound violated at step %llu",
                                    static_cast<unsigned long long>(rate_step)));
    return out;
}

// ---------------------------------------------------------------- criterion 5
// Exact agreement between the rolling-array alignment distance and a full
// enumeration of every monotone path, on 200 random short pairs.

Eigen::MatrixXd enum_cost_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    const Eigen::VectorXd na = a.rowwise().squaredNorm();
    const Eigen::VectorXd nb = b.rowwise().squaredNorm();
    Eigen::MatrixXd c = -2.0 * a * b.transpose();
    c.colwise() += na;
    c.rowwise() += nb.transpose();
    return c.cwiseMax(0.0).cwiseSqrt();
}

void walk_paths(const Eigen::MatrixXd& c, Eigen::Index i, Eigen::Index j,
                double acc, double& best) {
    acc += c(i, j);
    if (i == c.rows() - 1 && j == c.cols() - 1) {
        best = std::min(best, acc);
        return;
    }
    if (i + 1 < c.rows()) walk_paths(c, i + 1, j, acc, best);
    if (j + 1 < c.cols()) walk_paths(c, i, j + 1, acc, best);
    if (i + 1 < c.rows() && j + 1 < c.cols()) walk_paths(c, i + 1, j + 1, acc, best);
}

Outcome criterion_5() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(5150);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_int_distribution<int> len(1, 5), width(1, 4);

    for (int trial = 0; trial < 200; ++trial) {
        const int dim = width(rng);
        Eigen::MatrixXd a(len(rng), dim), b(len(rng), dim);
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            for (Eigen::Index j = 0; j < dim; ++j) a(i, j) = gauss(rng);
        for (Eigen::Index i = 0; i < b.rows(); ++i)
            for (Eigen::Index j = 0; j < dim; ++j) b(i, j) = gauss(rng);

        const Eigen::MatrixXd c = enum_cost_matrix(a, b);
        double best = std::numeric_limits<double>::infinity();
        walk_paths(c, 0, 0, 0.0, best);
        const double got = dtw_distance(a, b);
        if (got != best)
            return fail(5, fmt("trial %d: %.17g != enumerated %.17g", trial, got, best));
    }
    const double elapsed = seconds_since(t0);
    if (elapsed > 5.0) return fail(5, fmt("took %.2fs, limit 5s", elapsed));
    return pass(5, fmt("200 random pairs agree exactly with path enumeration (%.2fs)", elapsed));
}

// ---------------------------------------------------------------- criterion 6
// Reservoir contract: scaled top eigenvalue within 1e-6 of the target after
// init, every recorded state inside [-1, 1], bit-identical re-runs.

Outcome criterion_6() {
    const auto t0 = std::chrono::steady_clock::now();
    EsnParams params;
    params.input_dim = 18;
    params.seed = 20240816;

    const EsnWeights w = init_esn(params);
    const double rho = spectral_radius(w.w);
    if (std::abs(rho - params.spectral_radius) > 1e-6)
        return fail(6, fmt("spectral radius %.9f, wanted %.1f +- 1e-6", rho,
                           params.spectral_radius));

    InputSequence seq;
    seq.columns.resize(18, 64);
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (Eigen::Index i = 0; i < seq.columns.size(); ++i)
        seq.columns.data()[i] = unit(rng);

    const PatchResponse states = run_patch(w, seq, params.leak);
    const double peak = states.cwiseAbs().maxCoeff();
    if (peak > 1.0) return fail(6, fmt("state magnitude %.9f escaped [-1, 1]", peak));

    const EsnWeights w2 = init_esn(params);
    const PatchResponse states2 = run_patch(w2, seq, params.leak);
    const bool same_w = (w.w.array() == w2.w.array()).all() &&
                        (w.w_in.array() == w2.w_in.array()).all();
    const bool same_s = (states.array() == states2.array()).all();
    if (!same_w || !same_s) return fail(6, "re-initialization was not bit-identical");

    const double elapsed = seconds_since(t0);
    if (elapsed > 5.0) return fail(6, fmt("took %.2fs, limit 5s", elapsed));
    return pass(6, fmt("radius %.9f, peak state %.6f, bit-exact repeat (%.2fs)",
                       rho, peak, elapsed));
}

// ---------------------------------------------------------------- criterion 7
// Segmentation score equals an independent pixel-scan oracle exactly on 500
// random small label maps, and is invariant to relabeling the prediction.

double oracle_miou(const LabelMap& pred, const LabelMap& gt) {
    std::set<int> gt_labels, pred_labels;
    for (std::size_t i = 0; i < gt.labels.size(); ++i) {
        if (gt.labels[i] == kVoidLabel) continue;
        gt_labels.insert(gt.labels[i]);
        pred_labels.insert(pred.labels[i]);
    }
    auto count = [&](auto&& match) {
        std::size_t c = 0;
        for (std::size_t i = 0; i < gt.labels.size(); ++i)
            if (gt.labels[i] != kVoidLabel && match(i)) ++c;
        return c;
    };
    double total = 0.0;
    for (int g : gt_labels) {
        const std::size_t gs = count([&](std::size_t i) { return gt.labels[i] == g; });
        double best = 0.0;
        for (int p : pred_labels) {
            const std::size_t ps = count([&](std::size_t i) { return pred.labels[i] == p; });
            const std::size_t is = count([&](std::size_t i) {
                return gt.labels[i] == g && pred.labels[i] == p;
            });
            best = std::max(best, static_cast<double>(is) /
                                      static_cast<double>(gs + ps - is));
        }
        total += best;
    }
    return total / static_cast<double>(gt_labels.size());
}

Outcome criterion_7() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(7117);
    std::uniform_int_distribution<int> dim(1, 16), pred_lab(0, 4), gt_lab(0, 3),
        voids(0, 7);

    for (int trial = 0; trial < 500; ++trial) {
        const int h = dim(rng), w = dim(rng);
        LabelMap pred = LabelMap::filled(h, w, 0);
        LabelMap gt = LabelMap::filled(h, w, 0);
        for (int i = 0; i < h * w; ++i) {
            pred.labels[i] = static_cast<std::uint16_t>(pred_lab(rng));
            gt.labels[i] = voids(rng) == 0 ? kVoidLabel
                                           : static_cast<std::uint16_t>(gt_lab(rng));
        }
        gt.labels[0] = static_cast<std::uint16_t>(gt_lab(rng));  // keep one scored pixel

        const double got = unsupervised_miou(pred, gt);
        const double want = oracle_miou(pred, gt);
        if (got != want)
            return fail(7, fmt("trial %d: %.17g != oracle %.17g", trial, got, want));

        LabelMap remap = pred;
        for (auto& v : remap.labels)
            v = static_cast<std::uint16_t>((v * 7 + 3) % 11);  // injective on 0..4
        if (unsupervised_miou(remap, gt) != got)
            return fail(7, fmt("trial %d: score changed under relabeling", trial));
    }
    const double elapsed = seconds_since(t0);
    if (elapsed > 30.0) return fail(7, fmt("took %.2fs, limit 30s", elapsed));
    return pass(7, fmt("500 instances match the pixel-scan oracle exactly (%.2fs)", elapsed));
}

// ---------------------------------------------------------------- criterion 8
// Two node groups activated alternately and never together must come apart:
// the 2-cluster cut separates {0,1} from {2,3} on at least 95 of 100 seeds.

bool two_groups_separate(std::uint64_t seed) {
    DynamicsConfig cfg;
    cfg.k = 2;
    cfg.l_movmean = 500;
    cfg.seed = seed;
    MapState map = init_map(4, cfg);
    std::uint64_t t = 0;
    auto source = [&]() -> std::vector<int> {
        return (t++ % 2 == 0) ? std::vector<int>{0, 1} : std::vector<int>{2, 3};
    };
    const Eigen::MatrixXd readout = run_dynamics(map, source, 20000, cfg);
    const Dendrogram d = build_dendrogram(readout, Linkage::ward);
    const std::vector<std::uint16_t> labels = cut_dendrogram(d, 2);
    return labels[0] == labels[1] && labels[2] == labels[3] && labels[0] != labels[2];
}

Outcome criterion_8() {
    const auto t0 = std::chrono::steady_clock::now();
    int good = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed)
        if (two_groups_separate(seed)) ++good;
    const double elapsed = seconds_since(t0);
    if (good < 95)
        return fail(8, fmt("two-group source separated on %d/100 seeds, need 95", good));
    if (elapsed > 300.0) return fail(8, fmt("took %.2fs, limit 300s", elapsed));
    return pass(8, fmt("two-group source separated on %d/100 seeds (%.2fs)", good, elapsed));
}

// ---------------------------------------------------------------- criterion 9
// End to end on the easiest possible scene: a half-red half-blue card must
// reach mIoU 0.95 at two clusters under the desk profile.

Outcome criterion_9() {
    const auto t0 = std::chrono::steady_clock::now();
    PipelineConfig cfg;
    cfg.apply_desk_profile();
    cfg.seed = 1;
    cfg.n_min = 2;
    cfg.n_max = 2;
    cfg.n_threads = 0;
    cfg.finalize();

    const ImageTensor img = testutil::half_image(288);
    const LabelMap gt = testutil::half_labels(288);
    const EsnWeights esn = init_esn(cfg.esn);
    const SegmentResult seg = segment_image(img, cfg, esn, "halfcard");
    const LabelMap pred = labels_to_pixels(seg.grid_labels[0], 288, 288, cfg.resize);
    const double miou = unsupervised_miou(pred, gt);

    const double elapsed = seconds_since(t0);
    if (miou < 0.95) return fail(9, fmt("half-card mIoU %.6f at n=2, need 0.95", miou));
    if (elapsed > 600.0) return fail(9, fmt("took %.2fs, limit 600s", elapsed));
    return pass(9, fmt("half-card mIoU %.6f at n=2 (%.2fs)", miou, elapsed));
}

// --------------------------------------------------------------- criterion 10
// Degradation budget on a real 10-image subset (manifest via environment):
// mean contrast drop within 10% of clean, gaussian within 20%.

Outcome criterion_10() {
    const char* manifest_path = std::getenv("SMV2_BENCH_MANIFEST");
    if (!manifest_path || !*manifest_path)
        return skip(10, "set SMV2_BENCH_MANIFEST to a 10-image manifest to run");
    const auto t0 = std::chrono::steady_clock::now();

    PipelineConfig cfg;
    cfg.apply_desk_profile();
    testutil::TempDir out("accept10");
    cfg.output_dir = (out.path() / "run").string();
    cfg.emit_overlays = false;
    cfg.finalize();

    const auto manifest = load_manifest(manifest_path);
    const RobustnessReport rep = run_robustness(manifest, cfg);

    double contrast_drop = 1.0, gaussian_drop = 1.0;
    for (const auto& rk : rep.kinds) {
        if (rk.kind == CorruptionKind::contrast) contrast_drop = rk.relative_drop;
        if (rk.kind == CorruptionKind::gaussian_noise) gaussian_drop = rk.relative_drop;
    }
    const double elapsed = seconds_since(t0);
    const std::string detail =
        fmt("clean OIS %.4f; relative drop: contrast %.4f (limit 0.10), "
            "gaussian %.4f (limit 0.20) (%.0fs)",
            rep.clean_ois, contrast_drop, gaussian_drop, elapsed);
    if (contrast_drop > 0.10 || gaussian_drop > 0.20) return fail(10, detail);
    return pass(10, detail);
}

// --------------------------------------------------------------- criterion 11
// Sequential run without reinitialization (manifest via environment): mean
// OIS within 10% of the reinitializing control, and the learning-signal
// trace rises right after each image boundary and decays again before the
// next one.

Outcome criterion_11() {
    const char* manifest_path = std::getenv("SMV2_ADAPT_MANIFEST");
    if (!manifest_path || !*manifest_path)
        return skip(11, "set SMV2_ADAPT_MANIFEST to a 5-image manifest to run");
    const auto t0 = std::chrono::steady_clock::now();

    PipelineConfig cfg;
    cfg.apply_desk_profile();
    testutil::TempDir out("accept11");
    cfg.output_dir = (out.path() / "run").string();
    cfg.emit_overlays = false;
    cfg.n_threads = 1;
    cfg.finalize();

    const auto manifest = load_manifest(manifest_path);
    const AdaptabilityReport rep = run_adaptability(manifest, cfg);
    if (rep.noreinit_ois.empty() || rep.reinit_ois.empty())
        return fail(11, "run produced no scores");

    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    const double no_mean = mean(rep.noreinit_ois);
    const double re_mean = mean(rep.reinit_ois);
    const double rel = std::abs(no_mean - re_mean) / re_mean;

    // windowed means of the d+ trace around every image boundary
    const std::uint64_t span = rep.steps_per_image;
    const std::uint64_t window = span / 8;
    auto window_mean = [&](std::uint64_t lo, std::uint64_t hi) -> std::optional<double> {
        double s = 0.0;
        int c = 0;
        for (const auto& [step, d] : rep.dpos_trace)
            if (step >= lo && step < hi) {
                s += d;
                ++c;
            }
        if (c < 3) return std::nullopt;
        return s / c;
    };
    std::string shape = "boundary rise/decay:";
    bool shape_ok = true;
    for (std::size_t i = 1; i < manifest.size(); ++i) {
        const std::uint64_t b = span * i;
        const auto pre = window_mean(b - window, b);
        const auto post = window_mean(b, b + window);
        const auto late = window_mean(b + span - window, b + span);
        if (!pre || !post || !late) {
            shape_ok = false;
            shape += fmt(" [b%zu: sparse trace]", i);
            continue;
        }
        const bool rises = *post > *pre;
        const bool decays = *late < *post;
        shape_ok = shape_ok && rises && decays;
        shape += fmt(" [b%zu: %.4f -> %.4f -> %.4f]", i, *pre, *post, *late);
    }

    const double elapsed = seconds_since(t0);
    const std::string detail =
        fmt("noreinit %.4f vs reinit %.4f (rel %.4f, limit 0.10); %s (%.0fs)",
            no_mean, re_mean, rel, shape.c_str(), elapsed);
    if (rel > 0.10 || !shape_ok) return fail(11, detail);
    return pass(11, detail);
}

// --------------------------------------------------------------- criterion 12
// Corruption conformance against frozen references: the deterministic kinds
// reproduce the recorded outputs to 2/255 mean absolute difference; the
// noise kind matches the clipped-normal deviation implied by its configured
// sigma on mid-gray inputs.

// std of clip(N(0, sigma), -0.5, 0.5) for the severity-{1,3,5} sigmas
constexpr double kClippedNoiseDev[3] = {0.07999999996791331, 0.17909520621790004,
                                        0.3170009127436317};

Outcome criterion_12() {
    const auto t0 = std::chrono::steady_clock::now();
    const nlohmann::json manifest = testutil::goldens_manifest();
    const std::set<int> severities = {1, 3, 5};

    int checked = 0;
    double worst_mad = 0.0;
    for (const auto& entry : manifest["entries"]) {
        const std::string kind = entry["kind"];
        if (kind != "contrast" && kind != "zoom_blur" && kind != "snow") continue;
        const int sev = entry["severity"];
        if (!severities.count(sev)) continue;

        const ImageTensor in = testutil::to_image(
            testutil::load_tensor(testutil::goldens_dir() / entry["input"].get<std::string>()));
        const auto want =
            testutil::load_tensor(testutil::goldens_dir() / entry["output"].get<std::string>());

        CorruptionSpec spec;
        spec.kind = corruption_kind_from_string(kind);
        spec.severity = sev;
        CorruptionHooks hooks;
        std::vector<double> field;
        if (kind == "snow") {
            field = testutil::to_doubles(testutil::load_tensor(
                testutil::goldens_dir() / entry["field"].get<std::string>()));
            hooks.injected_field = &field;
            hooks.forced_snow_angle_deg =
                std::stod(entry["angle_deg"].get<std::string>());
        }
        const ImageTensor got = corrupt(in, spec, hooks);
        const double mad = testutil::mean_abs_diff(got.data, want.data);
        worst_mad = std::max(worst_mad, mad);
        if (mad > 2.0 / 255.0)
            return fail(12, fmt("%s s%d on %s: MAD %.6f, limit %.6f", kind.c_str(), sev,
                                entry["input"].get<std::string>().c_str(), mad, 2.0 / 255.0));
        ++checked;
    }
    if (checked != 90)
        return fail(12, fmt("expected 90 deterministic references, found %d", checked));

    // noise: measured deviation of (corrupted - input) on ten mid-gray cards
    std::string noise_detail;
    const int sev_levels[3] = {1, 3, 5};
    for (int si = 0; si < 3; ++si) {
        double sum = 0.0, sumsq = 0.0;
        std::size_t count = 0;
        for (int i = 0; i < 10; ++i) {
            ImageTensor gray = ImageTensor::zeros(64, 64);
            for (auto& v : gray.data) v = 0.5f;
            CorruptionSpec spec;
            spec.kind = CorruptionKind::gaussian_noise;
            spec.severity = sev_levels[si];
            spec.seed = 1200 + 10 * si + i;
            const ImageTensor noisy = corrupt(gray, spec);
            for (std::size_t p = 0; p < noisy.data.size(); ++p) {
                const double d = static_cast<double>(noisy.data[p]) - 0.5;
                sum += d;
                sumsq += d * d;
                ++count;
            }
        }
        const double mean = sum / static_cast<double>(count);
        const double dev = std::sqrt(sumsq / static_cast<double>(count) - mean * mean);
        noise_detail += fmt(" s%d dev %.5f (want %.5f)", sev_levels[si], dev,
                            kClippedNoiseDev[si]);
        if (std::abs(dev - kClippedNoiseDev[si]) > 0.01)
            return fail(12, fmt("noise s%d deviation %.6f, expected %.6f +- 0.01",
                                sev_levels[si], dev, kClippedNoiseDev[si]));
    }

    const double elapsed = seconds_since(t0);
    if (elapsed > 300.0) return fail(12, fmt("took %.2fs, limit 300s", elapsed));
    return pass(12, fmt("90 references within MAD %.6f; noise%s (%.2fs)", worst_mad,
                        noise_detail.c_str(), elapsed));
}

// --------------------------------------------------------------- criterion 13
// Two CLI invocations of the clean benchmark over the same manifest, config
// and seed must serialize byte-identical score tables.

std::string cli_path_from(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    const char* env = std::getenv("SMV2_CLI");
    return env ? env : "";
}

Outcome criterion_13(const std::string& cli) {
    if (cli.empty())
        return skip(13, "pass --cli or set SMV2_CLI to the syncmapv2 binary");
    if (!fs::exists(cli)) return fail(13, "CLI binary not found: " + cli);
    const auto t0 = std::chrono::steady_clock::now();

    testutil::TempDir tmp("accept13");
    for (int i = 0; i < 2; ++i) {
        const ImageTensor img = testutil::half_image(48, i == 1);
        const LabelMap gt = testutil::half_labels(48, i == 1);
        save_image_png(img, tmp.path() / ("img" + std::to_string(i) + ".png"));
        std::string body;
        for (int r = 0; r < 48; ++r)
            for (int c = 0; c < 48; ++c)
                body += std::to_string(gt.at(r, c)) + (c == 47 ? "\n" : " ");
        testutil::write_text(tmp.path() / ("gt" + std::to_string(i) + ".txt"), body);
    }
    testutil::write_text(tmp.path() / "manifest.txt",
                         "img0.png gt0.txt\nimg1.png gt1.txt\n");

    PipelineConfig cfg;
    cfg.resize = 48;
    cfg.grid_rows = 8;
    cfg.grid_cols = 8;
    cfg.tau = 3000;
    cfg.n_min = 2;
    cfg.n_max = 5;
    cfg.esn.n_neurons = 128;
    cfg.dynamics.l_movmean = 500;
    cfg.n_threads = 1;
    cfg.emit_overlays = false;
    cfg.finalize();
    save_config(cfg, tmp.path() / "run.cfg");

    std::vector<std::string> scores;
    for (int i = 0; i < 2; ++i) {
        const fs::path out = tmp.path() / ("out" + std::to_string(i));
        const std::string cmd = "\"" + cli + "\" bench-standard \"" +
                                (tmp.path() / "manifest.txt").string() +
                                "\" --config \"" + (tmp.path() / "run.cfg").string() +
                                "\" --output-dir \"" + out.string() +
                                "\" > /dev/null 2>&1";
        const int rc = std::system(cmd.c_str());
        if (rc != 0) return fail(13, fmt("CLI run %d exited with %d", i, rc));
        const auto bytes = testutil::read_bytes_of(out / "scores.csv");
        scores.emplace_back(bytes.begin(), bytes.end());
    }
    const double elapsed = seconds_since(t0);
    if (scores[0] != scores[1])
        return fail(13, "the two runs wrote different scores.csv bytes");
    if (scores[0].empty()) return fail(13, "scores.csv came out empty");
    return pass(13, fmt("both runs wrote identical scores.csv (%zu bytes) (%.2fs)",
                        scores[0].size(), elapsed));
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> selected;
    std::string cli_flag;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        auto value = [&]() -> std::string {
            if (i + 1 >= argc) {
                std::fprintf(stderr, "missing value for %s\n", arg.c_str());
                std::exit(2);
            }
            return argv[++i];
        };
        if (arg == "--criteria") {
            std::stringstream ss(value());
            std::string tok;
            while (std::getline(ss, tok, ','))
                if (!tok.empty()) selected.insert(std::stoi(tok));
        } else if (arg == "--cli") {
            cli_flag = value();
        } else if (arg == "--help" || arg == "-h") {
            std::printf("usage: acceptance [--criteria 1,2,5] [--cli path/to/syncmapv2]\n");
            return 0;
        } else {
            std::fprintf(stderr, "unknown argument: %s\n", arg.c_str());
            return 2;
        }
    }
    if (selected.empty())
        for (int i = 1; i <= 13; ++i) selected.insert(i);

    std::vector<Outcome> outcomes;
    const bool dynamics_run = selected.count(2) || selected.count(3) || selected.count(4);
    std::optional<DynamicsRunChecks> shared;
    if (dynamics_run) shared = run_dynamics_checks();

    for (int id : selected) {
        switch (id) {
            case 1: outcomes.push_back(criterion_1()); break;
            case 2: outcomes.push_back(shared->c2); break;
            case 3: outcomes.push_back(shared->c3); break;
            case 4: outcomes.push_back(shared->c4); break;
            case 5: outcomes.push_back(criterion_5()); break;
            case 6: outcomes.push_back(criterion_6()); break;
            case 7: outcomes.push_back(criterion_7()); break;
            case 8: outcomes.push_back(criterion_8()); break;
            case 9: outcomes.push_back(criterion_9()); break;
            case 10: outcomes.push_back(criterion_10()); break;
            case 11: outcomes.push_back(criterion_11()); break;
            case 12: outcomes.push_back(criterion_12()); break;
            case 13: outcomes.push_back(criterion_13(cli_path_from(cli_flag))); break;
            default:
                std::fprintf(stderr, "no such criterion: %d\n", id);
                return 2;
        }
    }

    bool any_fail = false, all_skipped = true;
    for (const auto& o : outcomes) {
        const char* verdict = o.skipped ? "SKIP" : (o.pass ? "PASS" : "FAIL");
        std::printf("criterion %d: %s (%s)\n", o.id, verdict, o.detail.c_str());
        if (!o.skipped) all_skipped = false;
        if (!o.skipped && !o.pass) any_fail = true;
    }
    std::fflush(stdout);
    if (any_fail) return 1;
    if (all_skipped) return 77;
    return 0;
}
