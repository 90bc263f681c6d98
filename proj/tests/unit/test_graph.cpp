#include "helpers.hpp"

#include "pcsim/graph.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

using namespace pcsim;

namespace {

// Row echelon rank with partial pivoting; independent of Eigen's decompositions.
int rank_by_elimination(Mat a, double tol = 1e-10) {
    int rank = 0;
    for (Index col = 0; col < a.cols() && rank < a.rows(); ++col) {
        Index piv = rank;
        for (Index r = rank; r < a.rows(); ++r) {
            if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
        }
        if (std::abs(a(piv, col)) < tol) continue;
        a.row(piv).swap(a.row(rank));
        for (Index r = rank + 1; r < a.rows(); ++r) a.row(r) -= (a(r, col) / a(rank, col)) * a.row(rank);
        ++rank;
    }
    return rank;
}

}  // namespace

TEST_CASE("incidence of a single edge") {
    const std::vector<Edge> e{{0, 1, 1.0}};
    const Mat d = build_incidence(2, e);
    REQUIRE(d.rows() == 2);
    REQUIRE(d.cols() == 1);
    CHECK(d(0, 0) == 1.0);
    CHECK(d(1, 0) == -1.0);
}

TEST_CASE("ring incidence: zero column sums and rank 3") {
    const Topology t = Topology::four_node_ring();
    const Mat d = build_incidence(t);
    CHECK(d.rows() == 4);
    CHECK(d.cols() == 4);
    for (Index k = 0; k < d.cols(); ++k) CHECK(d.col(k).sum() == 0.0);
    CHECK(rank_by_elimination(d) == 3);
}

TEST_CASE("path Laplacians") {
    const std::vector<Edge> p2{{0, 1, 1.0}};
    Mat l2(2, 2);
    l2 << 1, -1, -1, 1;
    CHECK(build_laplacian(p2, 2) == l2);

    const std::vector<Edge> p4{{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}};
    Mat l4(4, 4);
    l4 << 1, -1, 0, 0, -1, 2, -1, 0, 0, -1, 2, -1, 0, 0, -1, 1;
    CHECK(build_laplacian(p4, 4) == l4);
    CHECK((l4 * Vec::Ones(4)).norm() == 0.0);
}

TEST_CASE("disconnected communication graph is rejected") {
    const std::vector<Edge> e{{0, 1, 1.0}, {2, 3, 1.0}};
    CHECK_THROWS_AS(build_laplacian(e, 4), TopologyError);
    CHECK_FALSE(is_connected(e, 4));
    Topology t = Topology::four_node_ring();
    t.comm_edges = e;
    CHECK_THROWS_AS(t.validate(), TopologyError);
}

TEST_CASE("invalid edges are rejected") {
    Topology t = Topology::four_node_ring();
    t.phys_edges.push_back({2, 2, 1.0});
    CHECK_THROWS_AS(t.validate(), TopologyError);
    t = Topology::four_node_ring();
    t.comm_edges.push_back({0, 7, 1.0});
    CHECK_THROWS_AS(t.validate(), TopologyError);
}

TEST_CASE("factor of a single edge and of the 4-node path") {
    const std::vector<Edge> p2{{0, 1, 1.0}};
    const LaplacianFactor f2 = factor_laplacian(p2, 2);
    REQUIRE(f2.factor.cols() == 1);
    CHECK(std::abs(f2.factor(0, 0)) == 1.0);
    CHECK(f2.factor(0, 0) == -f2.factor(1, 0));
    CHECK(f2.reconstruction_error() == 0.0);

    const LaplacianFactor f4 = factor_laplacian(Topology::four_node_ring().comm_edges, 4);
    CHECK(f4.factor.rows() == 4);
    CHECK(f4.factor.cols() == 3);
}

TEST_CASE("Laplacian invariants on random graphs") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g(0.0, 1.0);
    for (Index nu = 2; nu <= 12; ++nu) {
        const std::vector<Edge> e = testing::random_connected_graph(nu, rng, true);
        const Mat l = build_laplacian(e, nu);
        CHECK((l - l.transpose()).cwiseAbs().maxCoeff() == 0.0);
        CHECK((l * Vec::Ones(nu)).cwiseAbs().maxCoeff() < 1e-12);
        for (int k = 0; k < 1000; ++k) {
            Vec x(nu);
            for (Index i = 0; i < nu; ++i) x(i) = g(rng);
            REQUIRE(x.dot(l * x) >= -1e-12);
        }
        CHECK(algebraic_connectivity(l) > 0.0);
    }
}

TEST_CASE("E E^T reconstructs the Laplacian up to 20 nodes") {
    std::mt19937_64 rng(5);
    for (Index nu = 2; nu <= 20; ++nu) {
        for (bool weighted : {false, true}) {
            const std::vector<Edge> e = testing::random_connected_graph(nu, rng, weighted);
            const LaplacianFactor f = factor_laplacian(e, nu);
            CHECK(f.reconstruction_error() < 1e-12);
            const LaplacianFactor g = factor_laplacian(build_laplacian(e, nu));
            CHECK((g.factor * g.factor.transpose() - build_laplacian(e, nu)).cwiseAbs().maxCoeff() < 1e-12);
        }
    }
}

TEST_CASE("spectral connectivity agrees with union-find") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 300; ++trial) {
        const Index nu = 2 + static_cast<Index>(trial % 10);
        std::uniform_int_distribution<Index> node(0, nu - 1);
        std::uniform_int_distribution<int> count(0, static_cast<int>(2 * nu));
        std::vector<Edge> e;
        const int m = count(rng);
        for (int k = 0; k < m; ++k) {
            const Index a = node(rng), b = node(rng);
            if (a != b) e.push_back({a, b, 1.0});
        }
        REQUIRE(is_connected(e, nu) == testing::connected_by_union_find(e, nu));
    }
}

TEST_CASE("embedded subset factor") {
    const std::vector<Edge> path{{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}};
    const std::vector<Index> subset{0, 1, 2};
    const LaplacianFactor f = embedded_subset_factor(path, 4, subset);
    CHECK(f.reconstruction_error() < 1e-12);
    CHECK(f.laplacian.row(3).cwiseAbs().maxCoeff() == 0.0);
    CHECK(f.laplacian.col(3).cwiseAbs().maxCoeff() == 0.0);
    Mat l3(3, 3);
    l3 << 1, -1, 0, -1, 2, -1, 0, -1, 1;
    CHECK((f.laplacian.topLeftCorner(3, 3) - l3).cwiseAbs().maxCoeff() == 0.0);
}
