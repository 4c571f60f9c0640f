#include "syncmapv2/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

namespace syncmap {

double binary_iou(const std::vector<bool>& pred_mask, const std::vector<bool>& gt_mask) {
    if (pred_mask.size() != gt_mask.size())
        throw ArgumentError("mask dims differ");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < pred_mask.size(); ++i) {
        inter += pred_mask[i] && gt_mask[i];
        uni += pred_mask[i] || gt_mask[i];
    }
    if (uni == 0) return 1.0;  // both empty
    return static_cast<double>(inter) / static_cast<double>(uni);
}

double unsupervised_miou(const LabelMap& pred, const LabelMap& gt) {
    if (pred.height != gt.height || pred.width != gt.width)
        throw ArgumentError("prediction and ground truth dims differ");

    // contingency counts over non-void pixels
    std::map<std::uint16_t, std::size_t> gt_size, pred_size;
    std::map<std::pair<std::uint16_t, std::uint16_t>, std::size_t> inter;
    for (std::size_t i = 0; i < gt.labels.size(); ++i) {
        const std::uint16_t g = gt.labels[i];
        if (g == kVoidLabel) continue;
        const std::uint16_t p = pred.labels[i];
        ++gt_size[g];
        ++pred_size[p];
        ++inter[{g, p}];
    }
    if (gt_size.empty())
        throw ArgumentError("ground truth has no non-void segments");

    double total = 0.0;
    for (const auto& [g, gs] : gt_size) {
        double best = 0.0;
        for (const auto& [p, ps] : pred_size) {
            const auto it = inter.find({g, p});
            const std::size_t is = it == inter.end() ? 0 : it->second;
            const double iou = static_cast<double>(is) / static_cast<double>(gs + ps - is);
            best = std::max(best, iou);
        }
        total += best;
    }
    return total / static_cast<double>(gt_size.size());
}

std::pair<int, double> ods(const ScoreTable& scores) {
    if (scores.rows.empty()) throw ArgumentError("empty score table");
    std::map<int, std::pair<double, int>> by_n;  // n -> (sum, count)
    for (const auto& r : scores.rows) {
        auto& [sum, count] = by_n[r.n_clu];
        sum += r.miou;
        ++count;
    }
    int best_n = 0;
    double best_mean = -1.0;
    for (const auto& [n, sc] : by_n) {
        const double mean = sc.first / sc.second;
        if (mean > best_mean) {  // map iterates ascending: ties keep the smaller n
            best_mean = mean;
            best_n = n;
        }
    }
    return {best_n, best_mean};
}

double ois(const ScoreTable& scores) {
    if (scores.rows.empty()) throw ArgumentError("empty score table");
    std::map<std::string, double> best;
    for (const auto& r : scores.rows) {
        auto [it, inserted] = best.try_emplace(r.image, r.miou);
        if (!inserted) it->second = std::max(it->second, r.miou);
    }
    double sum = 0.0;
    for (const auto& [img, v] : best) sum += v;
    return sum / static_cast<double>(best.size());
}

ScoreTable filter_condition(const ScoreTable& scores, const std::string& condition) {
    ScoreTable out;
    for (const auto& r : scores.rows)
        if (r.condition == condition) out.rows.push_back(r);
    return out;
}

void save_scores_csv(const ScoreTable& scores, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os << "image,condition,n_clu,miou\n";
    char buf[64];
    for (const auto& r : scores.rows) {
        std::snprintf(buf, sizeof buf, "%.9f", r.miou);
        os << r.image << ',' << r.condition << ',' << r.n_clu << ',' << buf << '\n';
    }
    if (!os) throw IoError("write failed: " + path.string());
}

ScoreTable load_scores_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open for reading: " + path.string());
    std::string line;
    if (!std::getline(is, line) || line != "image,condition,n_clu,miou")
        throw FormatError("bad scores header: " + path.string());
    ScoreTable out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        ScoreRow r;
        std::string n_str, miou_str;
        if (!std::getline(ls, r.image, ',') || !std::getline(ls, r.condition, ',') ||
            !std::getline(ls, n_str, ',') || !std::getline(ls, miou_str))
            throw FormatError("bad scores row: " + line);
        r.n_clu = std::stoi(n_str);
        r.miou = std::stod(miou_str);
        out.rows.push_back(r);
    }
    return out;
}

LabelMap random_baseline(int height, int width, int n_labels, std::uint64_t seed,
                         int cell) {
    if (height < 1 || width < 1 || n_labels < 1 || cell < 1)
        throw ArgumentError("bad random baseline parameters");
    const int rows = (height + cell - 1) / cell;
    const int cols = (width + cell - 1) / cell;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(0, n_labels - 1);
    std::vector<std::uint16_t> cells(static_cast<std::size_t>(rows) * cols);
    for (auto& v : cells) v = static_cast<std::uint16_t>(pick(rng));
    LabelMap out = LabelMap::filled(height, width, 0);
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c)
            out.at(r, c) = cells[static_cast<std::size_t>(r / cell) * cols + c / cell];
    return out;
}

LabelMap kmeans_baseline(const ImageTensor& img, int k, std::uint64_t seed) {
    if (k < 1) throw ArgumentError("k must be >= 1");
    const std::size_t n = static_cast<std::size_t>(img.height) * img.width;
    if (n < static_cast<std::size_t>(k)) throw ArgumentError("fewer pixels than clusters");
    std::mt19937_64 rng(seed);

    auto px = [&](std::size_t i, int ch) { return static_cast<double>(img.data[i * 3 + ch]); };
    auto sqdist = [&](std::size_t i, const double c[3]) {
        double s = 0.0;
        for (int ch = 0; ch < 3; ++ch) {
            const double d = px(i, ch) - c[ch];
            s += d * d;
        }
        return s;
    };

    // k-means++ seeding
    std::vector<std::array<double, 3>> centers(k);
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    {
        std::uniform_int_distribution<std::size_t> first(0, n - 1);
        const std::size_t f = first(rng);
        centers[0] = {px(f, 0), px(f, 1), px(f, 2)};
    }
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], sqdist(i, centers[c - 1].data()));
            total += d2[i];
        }
        std::size_t chosen = 0;
        if (total > 0.0) {
            std::uniform_real_distribution<double> uni(0.0, total);
            double target = uni(rng), acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc >= target) {
                    chosen = i;
                    break;
                }
            }
        } else {
            std::uniform_int_distribution<std::size_t> any(0, n - 1);
            chosen = any(rng);
        }
        centers[c] = {px(chosen, 0), px(chosen, 1), px(chosen, 2)};
    }

    std::vector<int> assign(n, 0);
    for (int iter = 0; iter < 100; ++iter) {
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d = sqdist(i, centers[0].data());
            for (int c = 1; c < k; ++c) {
                const double d = sqdist(i, centers[c].data());
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            assign[i] = best;
        }
        std::vector<std::array<double, 4>> acc(k, {0, 0, 0, 0});
        for (std::size_t i = 0; i < n; ++i) {
            auto& a = acc[assign[i]];
            for (int ch = 0; ch < 3; ++ch) a[ch] += px(i, ch);
            a[3] += 1.0;
        }
        double shift = 0.0;
        for (int c = 0; c < k; ++c) {
            if (acc[c][3] == 0.0) continue;  // empty cluster keeps its centroid
            std::array<double, 3> next{acc[c][0] / acc[c][3], acc[c][1] / acc[c][3],
                                       acc[c][2] / acc[c][3]};
            double d = 0.0;
            for (int ch = 0; ch < 3; ++ch) {
                const double dd = next[ch] - centers[c][ch];
                d += dd * dd;
            }
            shift = std::max(shift, std::sqrt(d));
            centers[c] = next;
        }
        if (shift < 1e-6) break;
    }

    LabelMap out = LabelMap::filled(img.height, img.width, 0);
    for (std::size_t i = 0; i < n; ++i)
        out.labels[i] = static_cast<std::uint16_t>(assign[i]);
    return out;
}

namespace {

double sample_mean(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

double sample_var(const std::vector<double>& x, double mean) {
    double s = 0.0;
    for (double v : x) s += (v - mean) * (v - mean);
    return s / static_cast<double>(x.size() - 1);
}

double two_sided_p(double t, double dof) {
    boost::math::students_t_distribution<double> dist(dof);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

}  // namespace

TTestResult ttest_independent(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() < 2 || b.size() < 2)
        throw StatisticsError("need at least 2 samples per group");
    const double ma = sample_mean(a), mb = sample_mean(b);
    const double va = sample_var(a, ma), vb = sample_var(b, mb);
    if (va == 0.0 && vb == 0.0)
        throw StatisticsError("both samples have zero variance");
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    const double se2 = va / na + vb / nb;
    TTestResult r;
    r.t = (ma - mb) / std::sqrt(se2);
    r.dof = se2 * se2 /
            ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
    r.p = two_sided_p(r.t, r.dof);
    return r;
}

TTestResult ttest_paired(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size())
        throw ArgumentError("paired samples must have equal length");
    if (a.size() < 2)
        throw StatisticsError("need at least 2 pairs");
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    const double md = sample_mean(d);
    const double vd = sample_var(d, md);
    if (vd == 0.0)
        throw StatisticsError("zero-variance differences");
    const double n = static_cast<double>(d.size());
    TTestResult r;
    r.t = md / std::sqrt(vd / n);
    r.dof = n - 1.0;
    r.p = two_sided_p(r.t, r.dof);
    return r;
}

}  // namespace syncmap
