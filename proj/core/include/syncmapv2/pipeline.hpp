#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "syncmapv2/clustering.hpp"
#include "syncmapv2/corruption.hpp"
#include "syncmapv2/errors.hpp"
#include "syncmapv2/evaluation.hpp"
#include "syncmapv2/image.hpp"
#include "syncmapv2/reservoir.hpp"
#include "syncmapv2/similarity.hpp"
#include "syncmapv2/syncmap.hpp"

namespace syncmap {

// Everything a run needs. finalize() derives the dependent fields (ESN input
// width, per-stream seeds) from the master knobs; call it after any edit.
struct PipelineConfig {
    int resize = 288;
    int grid_rows = 48;
    int grid_cols = 48;
    int repetitions = 3;  // horizontal tilings of the temporized patch
    int list_size = 9;
    std::uint64_t tau = 200000;
    int n_min = 2;
    int n_max = 20;
    Linkage linkage = Linkage::ward;
    bool double_tau = false;  // adaptability: 2*tau steps per image
    std::uint64_t seed = 42;

    EsnParams esn;
    DynamicsConfig dynamics;

    int n_threads = 0;  // 0 = hardware concurrency
    std::string output_dir = "out";
    std::string cache_dir;  // empty disables the similarity cache
    bool emit_overlays = true;

    // CI-scale profile: coarser grid, short run, short readout window
    void apply_desk_profile();

    void finalize();
    void validate() const;

    int patch_h() const { return grid_rows > 0 ? resize / grid_rows : 0; }
    int patch_w() const { return grid_cols > 0 ? resize / grid_cols : 0; }
    int n_patches() const { return grid_rows * grid_cols; }
    std::uint64_t input_seed() const;
    std::uint64_t steps_per_image() const { return double_tau ? 2 * tau : tau; }
};

// Flat key=value text format; '#' starts a comment line.
PipelineConfig load_config(const std::filesystem::path& path);
void save_config(const PipelineConfig& cfg, const std::filesystem::path& path);
void apply_config_entry(PipelineConfig& cfg, const std::string& key,
                        const std::string& value);

// Hash over the result-determining fields only (paths, thread counts and
// trace switches excluded); binds emitted scores to their exact settings.
std::uint64_t config_hash(const PipelineConfig& cfg);

// Corruption draws are keyed by content, not run order.
std::uint64_t corruption_seed(const std::string& image_path, CorruptionKind kind,
                              int severity);

struct ManifestEntry {
    std::filesystem::path image;
    std::filesystem::path ground_truth;
};

// One "image-path gt-path" pair per line; relative paths resolve against the
// manifest's directory when they do not resolve against the working one.
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);

// Draws the reference patch uniformly and unions its proximity and
// similarity lists (duplicates collapse) into the step's positive set.
std::vector<int> sample_input_step(const std::vector<NeighborList>& prox,
                                   const std::vector<NeighborList>& sim,
                                   std::mt19937_64& rng);

struct RunRecord {
    std::string image;
    std::string condition = "clean";
    std::uint64_t config_hash = 0;
    double wall_seconds = 0.0;
    std::vector<std::pair<int, double>> miou_per_n;
    std::vector<std::string> artifacts;
    bool failed = false;
    std::string error;
};

struct SegmentResult {
    std::vector<int> n_values;
    std::vector<LabelMap> grid_labels;  // one per n, at grid dims
    RunRecord record;
    bool degenerate = false;  // similarity carried no signal (uniform input)
};

// Full recipe on one prepared map: resize, patch, temporize, reservoir
// responses, similarity matrix, neighbor lists, `steps` dynamics updates fed
// by sample_input_step, readout, nested cluster cuts. Preprocessing runs
// once; the map persists for reuse.
SegmentResult segment_image(const ImageTensor& img, const PipelineConfig& cfg,
                            const EsnWeights& esn, MapState& map,
                            std::mt19937_64& input_rng, std::uint64_t steps,
                            const std::string& image_id = "image");

// Fresh map and input stream from the config seeds (one-shot runs).
SegmentResult segment_image(const ImageTensor& img, const PipelineConfig& cfg,
                            const EsnWeights& esn,
                            const std::string& image_id = "image");

struct StandardReport {
    ScoreTable scores;
    std::vector<RunRecord> records;
    int ods_n = 0;
    double ods_miou = 0.0;
    double ois_miou = 0.0;
    // calibration baselines at the ODS cluster count, averaged over images
    double random_baseline_miou = 0.0;
    double kmeans_baseline_miou = 0.0;
};

struct RobustnessKind {
    CorruptionKind kind = CorruptionKind::identity;
    std::array<double, 3> ois_by_severity{};  // S1, S3, S5
    double mean_ois = 0.0;
    double relative_drop = 0.0;  // vs clean OIS
    std::optional<TTestResult> clean_vs_corrupted;
};

struct RobustnessReport {
    ScoreTable scores;
    std::vector<RunRecord> records;
    int clean_ods_n = 0;
    double clean_ods_miou = 0.0;
    double clean_ois = 0.0;
    std::vector<RobustnessKind> kinds;
};

struct AdaptabilityReport {
    ScoreTable scores;  // conditions "noreinit" and "reinit"
    std::vector<RunRecord> records;
    std::vector<double> noreinit_ois;  // per image, manifest order
    std::vector<double> reinit_ois;
    std::optional<TTestResult> paired;
    std::vector<std::pair<std::uint64_t, double>> dpos_trace;
    std::uint64_t steps_per_image = 0;
};

// Fresh map per image; per-n scores, ODS/OIS, baselines; writes scores.csv,
// report.json and overlays under cfg.output_dir. Failures (missing files,
// bad formats) are recorded per image and the run continues.
StandardReport run_standard(const std::vector<ManifestEntry>& manifest,
                            const PipelineConfig& cfg);

// Clean pass plus severities {1,3,5} of each corruption kind, fresh map per
// (image, condition); per-kind severity means, relative drops and
// clean-vs-corrupted t-tests over per-image scores. identity_hook replaces
// every corruption with the identity (harness self-check).
RobustnessReport run_robustness(const std::vector<ManifestEntry>& manifest,
                                const PipelineConfig& cfg,
                                bool identity_hook = false);

// One reservoir, one persistent map, images strictly in manifest order; a
// second with-reinit pass provides the paired comparison. The d+ trace and
// per-image map checkpoints are persisted under cfg.output_dir. Requesting
// more than one thread is a ConfigError (the run is order-dependent).
AdaptabilityReport run_adaptability(const std::vector<ManifestEntry>& manifest,
                                    const PipelineConfig& cfg);

// Fixed deterministic palette (bit-interleaved channel ramps); injective for
// any realistic segment count.
std::array<std::uint8_t, 3> palette_color(int label);

// 50% blend of the input with the palette color of each pixel's segment.
void emit_overlay(const ImageTensor& img, const LabelMap& labels,
                  const std::filesystem::path& path);

}  // namespace syncmap
