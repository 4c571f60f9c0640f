#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "syncmapv2/errors.hpp"
#include "syncmapv2/reservoir.hpp"

namespace syncmap {

// Symmetric matrix of pairwise DTW distances between patch responses.
struct SimilarityMatrix {
    int n = 0;
    Eigen::MatrixXf d;  // n x n, zero diagonal
};

enum class NeighborKind { proximity, similarity };

struct NeighborList {
    int owner = 0;
    NeighborKind kind = NeighborKind::proximity;
    std::vector<int> members;  // owner first
};

// Classic DTW over the T_a x T_b grid, local cost = Euclidean distance
// between state vectors, unit steps (down, right, diagonal); returns the
// accumulated cost of the optimal path, unnormalized.
double dtw_distance(const PatchResponse& a, const PatchResponse& b);

// Fills all i<j entries in parallel and mirrors. n_threads = 0 picks the
// hardware concurrency.
SimilarityMatrix build_similarity_matrix(const std::vector<PatchResponse>& responses,
                                         int n_threads = 0);

// Row `ref` sorted ascending (ties to the lower index), reference forced
// first, truncated to `count` members.
NeighborList top_similar(const SimilarityMatrix& m, int ref, int count);

// Owner plus its existing grid 8-neighborhood in row-major order; border
// owners get shortened lists (no wraparound).
NeighborList proximity_neighbors(int ref, int rows, int cols);

// Cache format: u32 n, then n*n little-endian f32 (row-major).
void save_similarity(const SimilarityMatrix& m, const std::filesystem::path& path);
SimilarityMatrix load_similarity(const std::filesystem::path& path);

}  // namespace syncmap
