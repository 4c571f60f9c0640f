#include "syncmapv2/similarity.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

#include "syncmapv2/serial.hpp"

namespace syncmap {

namespace {

// Euclidean local-cost matrix via ||a-b||^2 = |a|^2 + |b|^2 - 2 a.b
Eigen::MatrixXd local_costs(const PatchResponse& a, const PatchResponse& b) {
    Eigen::VectorXd na = a.rowwise().squaredNorm();
    Eigen::VectorXd nb = b.rowwise().squaredNorm();
    Eigen::MatrixXd c = (-2.0 * a * b.transpose());
    c.colwise() += na;
    c.rowwise() += nb.transpose();
    return c.cwiseMax(0.0).cwiseSqrt();
}

}  // namespace

double dtw_distance(const PatchResponse& a, const PatchResponse& b) {
    if (a.rows() == 0 || b.rows() == 0)
        throw ArgumentError("dtw_distance: empty sequence");
    if (a.cols() != b.cols())
        throw ArgumentError("dtw_distance: state dimension mismatch");
    const Eigen::Index ta = a.rows(), tb = b.rows();
    Eigen::MatrixXd c = local_costs(a, b);

    // one rolling row of accumulated costs
    std::vector<double> prev(tb), cur(tb);
    prev[0] = c(0, 0);
    for (Eigen::Index j = 1; j < tb; ++j) prev[j] = prev[j - 1] + c(0, j);
    for (Eigen::Index i = 1; i < ta; ++i) {
        cur[0] = prev[0] + c(i, 0);
        for (Eigen::Index j = 1; j < tb; ++j)
            cur[j] = c(i, j) + std::min({prev[j], cur[j - 1], prev[j - 1]});
        std::swap(prev, cur);
    }
    return prev[tb - 1];
}

SimilarityMatrix build_similarity_matrix(const std::vector<PatchResponse>& responses,
                                         int n_threads) {
    const int n = static_cast<int>(responses.size());
    if (n < 2) throw ArgumentError("need at least 2 responses");
    for (const auto& r : responses)
        if (r.cols() != responses[0].cols())
            throw ArgumentError("responses must share state dimension");

    SimilarityMatrix m;
    m.n = n;
    m.d = Eigen::MatrixXf::Zero(n, n);

    if (n_threads <= 0)
        n_threads = std::max(1u, std::thread::hardware_concurrency());
    n_threads = std::min(n_threads, n);

    std::atomic<int> next_row{0};
    auto worker = [&] {
        for (;;) {
            const int i = next_row.fetch_add(1);
            if (i >= n - 1) return;
            for (int j = i + 1; j < n; ++j) {
                const float v = static_cast<float>(dtw_distance(responses[i], responses[j]));
                m.d(i, j) = v;
                m.d(j, i) = v;
            }
        }
    };
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return m;
}

NeighborList top_similar(const SimilarityMatrix& m, int ref, int count) {
    if (ref < 0 || ref >= m.n) throw ArgumentError("reference index out of range");
    if (count < 1 || count > m.n) throw ArgumentError("count out of range");
    std::vector<int> order;
    order.reserve(m.n - 1);
    for (int j = 0; j < m.n; ++j)
        if (j != ref) order.push_back(j);
    std::sort(order.begin(), order.end(), [&](int x, int y) {
        if (m.d(ref, x) != m.d(ref, y)) return m.d(ref, x) < m.d(ref, y);
        return x < y;
    });
    NeighborList list;
    list.owner = ref;
    list.kind = NeighborKind::similarity;
    list.members.push_back(ref);
    for (int j = 0; j < count - 1; ++j) list.members.push_back(order[j]);
    return list;
}

NeighborList proximity_neighbors(int ref, int rows, int cols) {
    if (rows < 1 || cols < 1 || ref < 0 || ref >= rows * cols)
        throw ArgumentError("reference index out of range");
    const int r = ref / cols;
    const int c = ref % cols;
    NeighborList list;
    list.owner = ref;
    list.kind = NeighborKind::proximity;
    list.members.push_back(ref);
    for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
            if (dr == 0 && dc == 0) continue;
            const int nr = r + dr, nc = c + dc;
            if (nr < 0 || nr >= rows || nc < 0 || nc >= cols) continue;
            list.members.push_back(nr * cols + nc);
        }
    }
    return list;
}

void save_similarity(const SimilarityMatrix& m, const std::filesystem::path& path) {
    auto os = open_output(path);
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(m.n));
    for (int i = 0; i < m.n; ++i)
        for (int j = 0; j < m.n; ++j)
            write_pod<float>(os, m.d(i, j));
}

SimilarityMatrix load_similarity(const std::filesystem::path& path) {
    auto is = open_input(path);
    const auto n = read_pod<std::uint32_t>(is);
    if (n < 2 || n > (1u << 20))
        throw FormatError("implausible similarity matrix size");
    SimilarityMatrix m;
    m.n = static_cast<int>(n);
    m.d.resize(m.n, m.n);
    for (int i = 0; i < m.n; ++i)
        for (int j = 0; j < m.n; ++j)
            m.d(i, j) = read_pod<float>(is);
    return m;
}

}  // namespace syncmap
