#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "syncmapv2/errors.hpp"

namespace syncmap {

enum class Linkage { ward, single, average };

// Agglomerative merge history. Leaves are 0..n_points-1; merge j creates
// cluster n_points+j. Merges are sorted by (distance, a, b) ascending.
struct Dendrogram {
    struct Merge {
        int a = 0;
        int b = 0;        // a < b
        double dist = 0;  // linkage distance at the merge
        int size = 0;     // members of the merged cluster
    };
    int n_points = 0;
    std::vector<Merge> merges;  // n_points - 1 entries
};

// NN-chain agglomeration with Lance-Williams updates.
Dendrogram build_dendrogram(const Eigen::MatrixXd& points, Linkage linkage = Linkage::ward);

// Partition after applying the first n_points - n_clu merges. Labels are
// 0..n_clu-1 in order of first member index.
std::vector<std::uint16_t> cut_dendrogram(const Dendrogram& dendro, int n_clu);

std::vector<std::uint16_t> hierarchical_cluster(const Eigen::MatrixXd& points, int n_clu,
                                                Linkage linkage = Linkage::ward);

// One dendrogram, cuts at every n in [n_min, n_max]; cuts are nested.
std::vector<std::vector<std::uint16_t>> cluster_range(const Eigen::MatrixXd& points,
                                                      int n_min, int n_max,
                                                      Linkage linkage = Linkage::ward);

}  // namespace syncmap
