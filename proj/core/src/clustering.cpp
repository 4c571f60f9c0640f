#include "syncmapv2/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace syncmap {

namespace {

// Lance-Williams update of the stored affinity between the merged cluster
// (a u b) and c. Ward works on its squared linkage metric, the others on
// plain distances.
double lw_update(Linkage linkage, double dac, double dbc, double dab,
                 double sa, double sb, double sc) {
    switch (linkage) {
        case Linkage::single:
            return std::min(dac, dbc);
        case Linkage::average:
            return (sa * dac + sb * dbc) / (sa + sb);
        case Linkage::ward:
            return ((sa + sc) * dac + (sb + sc) * dbc - sc * dab) / (sa + sb + sc);
    }
    return 0.0;
}

double merge_distance(Linkage linkage, double stored) {
    return linkage == Linkage::ward ? std::sqrt(stored) : stored;
}

struct DisjointSet {
    std::vector<int> parent;
    explicit DisjointSet(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace

Dendrogram build_dendrogram(const Eigen::MatrixXd& points, Linkage linkage) {
    const int n = static_cast<int>(points.rows());
    if (n < 1) throw ArgumentError("need at least one point");
    Dendrogram out;
    out.n_points = n;
    if (n == 1) return out;

    // pairwise affinities over slots; a merged cluster reuses the lower slot
    Eigen::MatrixXd d(n, n);
    for (int i = 0; i < n; ++i) {
        d(i, i) = 0.0;
        for (int j = i + 1; j < n; ++j) {
            const double dist = (points.row(i) - points.row(j)).norm();
            const double v = linkage == Linkage::ward ? dist * dist : dist;
            d(i, j) = v;
            d(j, i) = v;
        }
    }

    std::vector<bool> active(n, true);
    std::vector<double> size(n, 1.0);
    std::vector<int> cluster_id(n);          // slot -> current cluster id
    std::vector<int> representative(n);      // slot -> any member leaf
    std::iota(cluster_id.begin(), cluster_id.end(), 0);
    std::iota(representative.begin(), representative.end(), 0);

    struct RawMerge {
        int a, b;
        double stored;
        int merged_size;
    };
    std::vector<RawMerge> raw;
    raw.reserve(n - 1);

    std::vector<int> chain;
    chain.reserve(n);
    int remaining = n;
    while (remaining > 1) {
        if (chain.empty()) {
            for (int i = 0; i < n; ++i)
                if (active[i]) {
                    chain.push_back(i);
                    break;
                }
        }
        const int x = chain.back();
        // nearest active neighbor; the previous chain element wins ties so
        // reciprocal pairs terminate, then lower slot index
        int y = -1;
        double best = std::numeric_limits<double>::infinity();
        const int prev = chain.size() >= 2 ? chain[chain.size() - 2] : -1;
        if (prev >= 0) {
            y = prev;
            best = d(x, prev);
        }
        for (int i = 0; i < n; ++i) {
            if (!active[i] || i == x || i == prev) continue;
            if (d(x, i) < best) {
                best = d(x, i);
                y = i;
            }
        }
        if (y == prev && prev >= 0) {
            chain.pop_back();
            chain.pop_back();
            raw.push_back({cluster_id[x], cluster_id[y], best,
                           static_cast<int>(size[x] + size[y])});
            const int keep = std::min(x, y);
            const int drop = std::max(x, y);
            for (int i = 0; i < n; ++i) {
                if (!active[i] || i == keep || i == drop) continue;
                d(keep, i) = lw_update(linkage, d(x, i), d(y, i), d(x, y),
                                       size[x], size[y], size[i]);
                d(i, keep) = d(keep, i);
            }
            size[keep] = size[x] + size[y];
            active[drop] = false;
            cluster_id[keep] = n + static_cast<int>(raw.size()) - 1;
            --remaining;
        } else {
            chain.push_back(y);
        }
    }

    // order merges by distance; report cluster ids consistent with that order
    std::vector<int> order(raw.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int i, int j) {
        if (raw[i].stored != raw[j].stored) return raw[i].stored < raw[j].stored;
        const auto key_a = std::minmax(raw[i].a, raw[i].b);
        const auto key_b = std::minmax(raw[j].a, raw[j].b);
        return key_a < key_b;
    });
    std::vector<int> rank(raw.size());
    for (std::size_t i = 0; i < order.size(); ++i) rank[order[i]] = static_cast<int>(i);
    auto remap = [&](int id) {
        return id < n ? id : n + rank[id - n];
    };
    out.merges.reserve(raw.size());
    for (int idx : order) {
        const RawMerge& rm = raw[idx];
        Dendrogram::Merge m;
        m.a = std::min(remap(rm.a), remap(rm.b));
        m.b = std::max(remap(rm.a), remap(rm.b));
        m.dist = merge_distance(linkage, rm.stored);
        m.size = rm.merged_size;
        out.merges.push_back(m);
    }
    return out;
}

std::vector<std::uint16_t> cut_dendrogram(const Dendrogram& dendro, int n_clu) {
    const int n = dendro.n_points;
    if (n_clu < 1 || n_clu > n) throw ArgumentError("cluster count out of range");
    DisjointSet ds(n);
    // resolve a merge id to one of its member leaves by walking down the tree
    const auto rep = [&](int id) {
        while (id >= n) id = dendro.merges[id - n].a;
        return id;
    };
    for (int j = 0; j < n - n_clu; ++j) {
        const auto& m = dendro.merges[j];
        ds.unite(rep(m.a), rep(m.b));
    }
    // label roots in order of first member index
    std::vector<std::uint16_t> labels(n);
    std::vector<int> root_label(n, -1);
    int next = 0;
    for (int i = 0; i < n; ++i) {
        const int r = ds.find(i);
        if (root_label[r] < 0) root_label[r] = next++;
        labels[i] = static_cast<std::uint16_t>(root_label[r]);
    }
    return labels;
}

std::vector<std::uint16_t> hierarchical_cluster(const Eigen::MatrixXd& points, int n_clu,
                                                Linkage linkage) {
    if (n_clu > points.rows()) throw ArgumentError("cluster count exceeds point count");
    return cut_dendrogram(build_dendrogram(points, linkage), n_clu);
}

std::vector<std::vector<std::uint16_t>> cluster_range(const Eigen::MatrixXd& points,
                                                      int n_min, int n_max,
                                                      Linkage linkage) {
    if (n_min < 1 || n_min > n_max) throw ArgumentError("bad cluster range");
    if (n_max > points.rows()) throw ArgumentError("cluster count exceeds point count");
    const Dendrogram dendro = build_dendrogram(points, linkage);
    std::vector<std::vector<std::uint16_t>> cuts;
    cuts.reserve(n_max - n_min + 1);
    for (int n_clu = n_min; n_clu <= n_max; ++n_clu)
        cuts.push_back(cut_dendrogram(dendro, n_clu));
    return cuts;
}

}  // namespace syncmap
