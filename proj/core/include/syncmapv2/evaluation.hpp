#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "syncmapv2/errors.hpp"
#include "syncmapv2/image.hpp"

namespace syncmap {

// |intersection| / |union| of two same-sized binary masks. Two empty masks
// score 1.0 (degenerate, counted in the diagnostics the caller keeps).
double binary_iou(const std::vector<bool>& pred_mask, const std::vector<bool>& gt_mask);

// Mean over ground-truth segments of the best IoU any predicted segment
// achieves. Void ground-truth pixels are excluded from both sides. The
// prediction must already be at ground-truth dims.
double unsupervised_miou(const LabelMap& pred, const LabelMap& gt);

struct ScoreRow {
    std::string image;
    std::string condition;
    int n_clu = 0;
    double miou = 0.0;
};

struct ScoreTable {
    std::vector<ScoreRow> rows;
};

// Optimal dataset scale: the fixed n_clu with the best cross-image mean
// (ties to the smaller n), and that mean.
std::pair<int, double> ods(const ScoreTable& scores);

// Optimal image scale: per-image best over n_clu, averaged over images.
double ois(const ScoreTable& scores);

ScoreTable filter_condition(const ScoreTable& scores, const std::string& condition);

// CSV with header image,condition,n_clu,miou; fixed decimal formatting so
// identical runs serialize byte-identically.
void save_scores_csv(const ScoreTable& scores, const std::filesystem::path& path);
ScoreTable load_scores_csv(const std::filesystem::path& path);

// Random segmentation lower bound: each cell-aligned block gets an i.i.d.
// uniform label in [0, n).
LabelMap random_baseline(int height, int width, int n_labels, std::uint64_t seed,
                         int cell = 6);

// Lloyd's algorithm on per-pixel RGB with k-means++ seeding; at most 100
// iterations or centroid shift below 1e-6.
LabelMap kmeans_baseline(const ImageTensor& img, int k, std::uint64_t seed);

struct TTestResult {
    double t = 0.0;
    double dof = 0.0;
    double p = 1.0;
};

// Welch's two-sided t-test (unequal variances, Welch-Satterthwaite dof).
TTestResult ttest_independent(const std::vector<double>& a, const std::vector<double>& b);

// Two-sided paired t-test on elementwise differences.
TTestResult ttest_paired(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace syncmap
