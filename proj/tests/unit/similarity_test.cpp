#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <vector>

#include <doctest.h>

#include "syncmapv2/similarity.hpp"
#include "testutil.hpp"

using namespace syncmap;

namespace {

Eigen::MatrixXd cost_matrix(const PatchResponse& a, const PatchResponse& b) {
    Eigen::VectorXd na = a.rowwise().squaredNorm();
    Eigen::VectorXd nb = b.rowwise().squaredNorm();
    Eigen::MatrixXd c = (-2.0 * a * b.transpose());
    c.colwise() += na;
    c.rowwise() += nb.transpose();
    return c.cwiseMax(0.0).cwiseSqrt();
}

// min over every monotone warping path (steps down, right, diagonal),
// accumulating in path order
void walk(const Eigen::MatrixXd& c, Eigen::Index i, Eigen::Index j, double sum,
          double& best) {
    sum += c(i, j);
    if (i == c.rows() - 1 && j == c.cols() - 1) {
        best = std::min(best, sum);
        return;
    }
    if (i + 1 < c.rows()) walk(c, i + 1, j, sum, best);
    if (j + 1 < c.cols()) walk(c, i, j + 1, sum, best);
    if (i + 1 < c.rows() && j + 1 < c.cols()) walk(c, i + 1, j + 1, sum, best);
}

double enumerate_dtw(const PatchResponse& a, const PatchResponse& b) {
    const Eigen::MatrixXd c = cost_matrix(a, b);
    double best = std::numeric_limits<double>::infinity();
    walk(c, 0, 0, 0.0, best);
    return best;
}

PatchResponse random_response(std::mt19937_64& rng, int t, int dim) {
    std::uniform_real_distribution<double> uni(-2.0, 2.0);
    PatchResponse r(t, dim);
    for (int i = 0; i < t; ++i)
        for (int j = 0; j < dim; ++j) r(i, j) = uni(rng);
    return r;
}

}  // namespace

TEST_CASE("dtw_distance basics") {
    PatchResponse a(3, 1);
    a << 0.0, 0.0, 1.0;
    PatchResponse b(2, 1);
    b << 0.0, 1.0;
    // both zeros align to b's zero, the one aligns to b's one
    CHECK(dtw_distance(a, b) == 0.0);
    CHECK(dtw_distance(a, a) == 0.0);

    PatchResponse p(1, 2), q(1, 2);
    p << 0.0, 0.0;
    q << 3.0, 4.0;
    CHECK(dtw_distance(p, q) == doctest::Approx(5.0).epsilon(1e-12));

    CHECK_THROWS_AS(dtw_distance(PatchResponse(0, 1), b), ArgumentError);
    PatchResponse wide(2, 3);
    wide.setZero();
    CHECK_THROWS_AS(dtw_distance(wide, b), ArgumentError);
}

TEST_CASE("dtw_distance equals exhaustive path enumeration") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> len(1, 5), dim(1, 4);
    for (int trial = 0; trial < 60; ++trial) {
        const int d = dim(rng);
        const PatchResponse a = random_response(rng, len(rng), d);
        const PatchResponse b = random_response(rng, len(rng), d);
        CHECK(dtw_distance(a, b) == enumerate_dtw(a, b));
    }
}

TEST_CASE("similarity matrix is symmetric and matches pairwise calls") {
    std::mt19937_64 rng(3);
    std::vector<PatchResponse> rs;
    for (int i = 0; i < 6; ++i) rs.push_back(random_response(rng, 4, 3));

    const SimilarityMatrix m = build_similarity_matrix(rs, 1);
    REQUIRE(m.n == 6);
    for (int i = 0; i < 6; ++i) {
        CHECK(m.d(i, i) == 0.0f);
        for (int j = i + 1; j < 6; ++j) {
            CHECK(m.d(i, j) == m.d(j, i));
            CHECK(m.d(i, j) == static_cast<float>(dtw_distance(rs[i], rs[j])));
        }
    }

    const SimilarityMatrix m2 = build_similarity_matrix(rs, 2);
    CHECK((m2.d.array() == m.d.array()).all());
}

TEST_CASE("top_similar sorts ascending with owner first and ties to lower index") {
    SimilarityMatrix m;
    m.n = 5;
    m.d = Eigen::MatrixXf::Zero(5, 5);
    auto set = [&](int i, int j, float v) {
        m.d(i, j) = v;
        m.d(j, i) = v;
    };
    set(2, 0, 0.5f);
    set(2, 1, 0.2f);
    set(2, 3, 0.2f);
    set(2, 4, 0.9f);

    const NeighborList full = top_similar(m, 2, 5);
    CHECK(full.owner == 2);
    CHECK(full.kind == NeighborKind::similarity);
    CHECK(full.members == std::vector<int>{2, 1, 3, 0, 4});

    const NeighborList three = top_similar(m, 2, 3);
    CHECK(three.members == std::vector<int>{2, 1, 3});

    CHECK_THROWS_AS(top_similar(m, 2, 6), ArgumentError);
    CHECK_THROWS_AS(top_similar(m, 2, 0), ArgumentError);
    CHECK_THROWS_AS(top_similar(m, 5, 3), ArgumentError);
}

TEST_CASE("proximity_neighbors covers the existing 8-neighborhood") {
    // interior owner on a 3x4 grid: all eight neighbors, row-major
    const NeighborList mid = proximity_neighbors(5, 3, 4);
    CHECK(mid.owner == 5);
    CHECK(mid.kind == NeighborKind::proximity);
    CHECK(mid.members == std::vector<int>{5, 0, 1, 2, 4, 6, 8, 9, 10});

    const NeighborList corner = proximity_neighbors(0, 3, 4);
    CHECK(corner.members == std::vector<int>{0, 1, 4, 5});

    const NeighborList edge = proximity_neighbors(1, 3, 4);
    CHECK(edge.members == std::vector<int>{1, 0, 2, 4, 5, 6});

    CHECK_THROWS_AS(proximity_neighbors(12, 3, 4), ArgumentError);
}

TEST_CASE("similarity files round trip and reject corruption") {
    testutil::TempDir tmp("sim");
    std::mt19937_64 rng(9);
    std::vector<PatchResponse> rs;
    for (int i = 0; i < 4; ++i) rs.push_back(random_response(rng, 3, 2));
    const SimilarityMatrix m = build_similarity_matrix(rs, 1);

    const auto path = tmp.path() / "sim.bin";
    save_similarity(m, path);
    const SimilarityMatrix back = load_similarity(path);
    CHECK(back.n == m.n);
    CHECK((back.d.array() == m.d.array()).all());

    // truncate the file and expect a format failure
    const std::string bytes = testutil::read_bytes_of(path);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    os.close();
    CHECK_THROWS_AS(load_similarity(path), Error);
}
