#include "pcsim/graph.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <string>

namespace pcsim {

namespace {

constexpr double kConnectivityTol = 1e-10;

void check_edge(const Edge& e, Index nu, const char* kind) {
    if (e.tail < 0 || e.tail >= nu || e.head < 0 || e.head >= nu) {
        throw TopologyError(std::string(kind) + " edge (" + std::to_string(e.tail) + "," +
                            std::to_string(e.head) + ") has a node index outside [0," +
                            std::to_string(nu) + ")");
    }
    if (e.tail == e.head) {
        throw TopologyError(std::string(kind) + " edge at node " + std::to_string(e.tail) +
                            " is a self-loop");
    }
    if (!(e.weight > 0.0) || !std::isfinite(e.weight)) {
        throw TopologyError(std::string(kind) + " edge weight must be positive and finite");
    }
}

Mat laplacian_unchecked(std::span<const Edge> edges, Index nu) {
    Mat lap = Mat::Zero(nu, nu);
    for (const Edge& e : edges) {
        check_edge(e, nu, "communication");
        lap(e.tail, e.tail) += e.weight;
        lap(e.head, e.head) += e.weight;
        lap(e.tail, e.head) -= e.weight;
        lap(e.head, e.tail) -= e.weight;
    }
    return lap;
}

}  // namespace

void Topology::validate() const {
    if (nu < 1) {
        throw TopologyError("topology needs at least one node");
    }
    for (const Edge& e : phys_edges) {
        check_edge(e, nu, "physical");
    }
    for (const Edge& e : comm_edges) {
        check_edge(e, nu, "communication");
    }
    if (nu > 1 && !is_connected(comm_edges, nu)) {
        throw TopologyError("communication graph is not connected; consensus is not guaranteed");
    }
}

Topology Topology::four_node_ring() {
    Topology t;
    t.nu = 4;
    t.phys_edges = {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}, {0, 3, 1.0}};
    t.comm_edges = {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}};
    return t;
}

Mat build_incidence(Index nu, std::span<const Edge> edges) {
    Mat d = Mat::Zero(nu, static_cast<Index>(edges.size()));
    for (Index k = 0; k < static_cast<Index>(edges.size()); ++k) {
        const Edge& e = edges[static_cast<std::size_t>(k)];
        check_edge(e, nu, "physical");
        d(e.tail, k) = 1.0;
        d(e.head, k) = -1.0;
    }
    return d;
}

double algebraic_connectivity(const Mat& laplacian) {
    if (laplacian.rows() < 2) {
        return 0.0;
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(laplacian, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(1);
}

bool is_connected(std::span<const Edge> edges, Index nu) {
    if (nu <= 1) {
        return true;
    }
    const Mat lap = laplacian_unchecked(edges, nu);
    return algebraic_connectivity(lap) > kConnectivityTol * std::max(1.0, lap.diagonal().maxCoeff());
}

Mat build_laplacian(std::span<const Edge> comm_edges, Index nu) {
    Mat lap = laplacian_unchecked(comm_edges, nu);
    if (nu > 1 && !(algebraic_connectivity(lap) > kConnectivityTol * std::max(1.0, lap.diagonal().maxCoeff()))) {
        throw TopologyError("communication graph is not connected; consensus is not guaranteed");
    }
    return lap;
}

double LaplacianFactor::reconstruction_error() const {
    if (laplacian.size() == 0) {
        return 0.0;
    }
    return (factor * factor.transpose() - laplacian).cwiseAbs().maxCoeff();
}

LaplacianFactor factor_laplacian(std::span<const Edge> comm_edges, Index nu) {
    LaplacianFactor out;
    out.laplacian = build_laplacian(comm_edges, nu);
    out.factor = Mat::Zero(nu, static_cast<Index>(comm_edges.size()));
    for (Index k = 0; k < static_cast<Index>(comm_edges.size()); ++k) {
        const Edge& e = comm_edges[static_cast<std::size_t>(k)];
        const double s = e.weight == 1.0 ? 1.0 : std::sqrt(e.weight);
        const Index lo = std::min(e.tail, e.head);
        const Index hi = std::max(e.tail, e.head);
        out.factor(lo, k) = s;
        out.factor(hi, k) = -s;
    }
    if (out.reconstruction_error() >= 1e-12 * std::max(1.0, out.laplacian.cwiseAbs().maxCoeff())) {
        throw NumericError("Laplacian factor reconstruction check failed");
    }
    return out;
}

LaplacianFactor factor_laplacian(const Mat& laplacian) {
    const Index n = laplacian.rows();
    if (laplacian.cols() != n) {
        throw DimensionError("Laplacian must be square");
    }
    const double scale = std::max(1.0, laplacian.cwiseAbs().maxCoeff());
    const double tol = 1e-12 * scale;
    if ((laplacian - laplacian.transpose()).cwiseAbs().maxCoeff() > tol) {
        throw ParameterError("Laplacian must be symmetric");
    }
    if ((laplacian * Vec::Ones(n)).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        throw ParameterError("Laplacian must annihilate the ones vector");
    }

    bool graph_like = true;
    std::vector<Edge> edges;
    for (Index i = 0; i < n && graph_like; ++i) {
        for (Index j = i + 1; j < n; ++j) {
            const double w = -laplacian(i, j);
            if (w < -tol) {
                graph_like = false;
                break;
            }
            if (w > tol) {
                edges.push_back({i, j, w});
            }
        }
    }
    if (graph_like) {
        LaplacianFactor out = factor_laplacian(edges, n);
        out.laplacian = laplacian;
        return out;
    }

    Eigen::SelfAdjointEigenSolver<Mat> es(laplacian);
    const Vec& lam = es.eigenvalues();
    if (lam(0) < -1e-10 * scale) {
        throw ParameterError("Laplacian must be positive semidefinite");
    }
    if (n > 1 && !(lam(1) > kConnectivityTol * scale)) {
        throw ParameterError("Laplacian kernel must be exactly span{1}");
    }
    LaplacianFactor out;
    out.laplacian = laplacian;
    out.factor = Mat::Zero(n, n - 1);
    for (Index k = 1; k < n; ++k) {
        out.factor.col(k - 1) = es.eigenvectors().col(k) * std::sqrt(lam(k));
    }
    if (out.reconstruction_error() >= 1e-12 * scale) {
        throw NumericError("Laplacian factor reconstruction check failed");
    }
    return out;
}

LaplacianFactor embedded_subset_factor(std::span<const Edge> comm_edges, Index nu,
                                       std::span<const Index> subset) {
    const Index m = static_cast<Index>(subset.size());
    if (m < 1) {
        throw ParameterError("consensus subset is empty");
    }
    std::vector<Index> local(static_cast<std::size_t>(nu), -1);
    for (Index k = 0; k < m; ++k) {
        const Index node = subset[static_cast<std::size_t>(k)];
        if (node < 0 || node >= nu) {
            throw ParameterError("consensus subset index " + std::to_string(node) + " out of range");
        }
        if (local[static_cast<std::size_t>(node)] >= 0) {
            throw ParameterError("consensus subset index " + std::to_string(node) + " repeated");
        }
        local[static_cast<std::size_t>(node)] = k;
    }
    std::vector<Edge> sub_edges;
    for (const Edge& e : comm_edges) {
        check_edge(e, nu, "communication");
        const Index a = local[static_cast<std::size_t>(e.tail)];
        const Index b = local[static_cast<std::size_t>(e.head)];
        if (a >= 0 && b >= 0) {
            sub_edges.push_back({a, b, e.weight});
        }
    }
    const LaplacianFactor sub = factor_laplacian(sub_edges, m);

    LaplacianFactor out;
    out.laplacian = Mat::Zero(nu, nu);
    out.factor = Mat::Zero(nu, sub.channels());
    for (Index a = 0; a < m; ++a) {
        const Index ia = subset[static_cast<std::size_t>(a)];
        out.factor.row(ia) = sub.factor.row(a);
        for (Index b = 0; b < m; ++b) {
            out.laplacian(ia, subset[static_cast<std::size_t>(b)]) = sub.laplacian(a, b);
        }
    }
    return out;
}

}  // namespace pcsim
