#pragma once

#include "pcsim/common.hpp"

#include <span>
#include <vector>

namespace pcsim {

/// Graph edge. For physical lines the orientation is the positive current
/// direction (tail -> head); communication edges are undirected.
struct Edge {
    Index tail = 0;
    Index head = 0;
    double weight = 1.0;
};

/// Physical network (oriented lines) plus the communication graph on the same nodes.
struct Topology {
    Index nu = 0;
    std::vector<Edge> phys_edges;
    std::vector<Edge> comm_edges;

    Index mu() const noexcept { return static_cast<Index>(phys_edges.size()); }

    /// Throws TopologyError on out-of-range indices, self-loops, non-positive
    /// weights or a disconnected communication graph.
    void validate() const;

    /// The four-node ring with lines (0->1), (1->2), (2->3), (0->3) and the
    /// path 0-1-2-3 as communication graph.
    static Topology four_node_ring();
};

/// Signed incidence matrix (nu x edges): +1 at the tail, -1 at the head.
Mat build_incidence(Index nu, std::span<const Edge> edges);
inline Mat build_incidence(const Topology& topo) { return build_incidence(topo.nu, topo.phys_edges); }

/// Weighted graph Laplacian (degree - adjacency). Rejects disconnected graphs.
Mat build_laplacian(std::span<const Edge> comm_edges, Index nu);

/// Second-smallest eigenvalue of the Laplacian (algebraic connectivity).
double algebraic_connectivity(const Mat& laplacian);

/// True when the graph is connected; decided by algebraic connectivity > tolerance.
bool is_connected(std::span<const Edge> edges, Index nu);

/// Laplacian together with a factor E such that E E^T = L.
struct LaplacianFactor {
    Mat laplacian;  // nu x nu
    Mat factor;     // nu x N

    Index nodes() const noexcept { return laplacian.rows(); }
    Index channels() const noexcept { return factor.cols(); }
    double reconstruction_error() const;
};

/// E is the communication incidence matrix (lower-index node +1) scaled by
/// sqrt(weight); exact for unit weights.
LaplacianFactor factor_laplacian(std::span<const Edge> comm_edges, Index nu);

/// Factor of a given Laplacian-like matrix. Graph Laplacians (non-positive
/// off-diagonals) are factored through their implied edge list; any other
/// symmetric PSD matrix with kernel span{1} falls back to a spectral factor.
LaplacianFactor factor_laplacian(const Mat& laplacian);

/// Restricts a communication graph to a node subset and embeds the resulting
/// sub-Laplacian/factor back into nu dimensions with zero padding.
LaplacianFactor embedded_subset_factor(std::span<const Edge> comm_edges, Index nu,
                                       std::span<const Index> subset);

}  // namespace pcsim
