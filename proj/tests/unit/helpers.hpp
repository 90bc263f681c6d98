#pragma once

#include "pcsim/graph.hpp"
#include "pcsim/grid_model.hpp"

#include <numeric>
#include <random>
#include <vector>

namespace testing {

using pcsim::Edge;
using pcsim::Index;
using pcsim::Mat;
using pcsim::Vec;

/// Union-find connectivity, independent of the spectral test used by the library.
inline bool connected_by_union_find(const std::vector<Edge>& edges, Index nu) {
    std::vector<Index> parent(static_cast<std::size_t>(nu));
    std::iota(parent.begin(), parent.end(), Index{0});
    auto find = [&](Index a) {
        while (parent[static_cast<std::size_t>(a)] != a) {
            parent[static_cast<std::size_t>(a)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
            a = parent[static_cast<std::size_t>(a)];
        }
        return a;
    };
    Index groups = nu;
    for (const Edge& e : edges) {
        const Index a = find(e.tail), b = find(e.head);
        if (a != b) {
            parent[static_cast<std::size_t>(a)] = b;
            --groups;
        }
    }
    return groups <= 1;
}

/// Random spanning tree plus extra edges; weights in [0.5, 2] when `weighted`.
inline std::vector<Edge> random_connected_graph(Index nu, std::mt19937_64& rng, bool weighted) {
    std::uniform_real_distribution<double> w(0.5, 2.0);
    std::vector<Edge> edges;
    for (Index i = 1; i < nu; ++i) {
        std::uniform_int_distribution<Index> pick(0, i - 1);
        edges.push_back({pick(rng), i, weighted ? w(rng) : 1.0});
    }
    std::uniform_int_distribution<Index> node(0, nu - 1);
    const Index extra = nu / 2;
    for (Index k = 0; k < extra; ++k) {
        const Index a = node(rng), b = node(rng);
        if (a != b) edges.push_back({std::min(a, b), std::max(a, b), weighted ? w(rng) : 1.0});
    }
    return edges;
}

/// Two-node grid with one line and unit parameters, no loads.
inline pcsim::GridModel unit_two_node_model() {
    pcsim::Topology t;
    t.nu = 2;
    t.phys_edges = {{0, 1, 1.0}};
    t.comm_edges = {{0, 1, 1.0}};
    pcsim::GridParameters p;
    p.R = Vec::Ones(2);
    p.L = Vec::Ones(2);
    p.C = Vec::Ones(2);
    p.Rt = Vec::Ones(1);
    p.Lt = Vec::Ones(1);
    p.loads = pcsim::LoadSet::zeros(2);
    return pcsim::GridModel(t, p);
}

/// Four-node ring with default parameters; loads replaced by `loads`.
inline pcsim::GridModel ring_model(const pcsim::LoadSet& loads) {
    pcsim::GridParameters p = pcsim::GridParameters::four_node_defaults();
    p.loads = loads;
    return pcsim::GridModel(pcsim::Topology::four_node_ring(), p);
}

/// Random state of the four-node ring with voltages in [300, 450] V.
inline Vec random_ring_state(std::mt19937_64& rng) {
    const pcsim::GridParameters p = pcsim::GridParameters::four_node_defaults();
    std::uniform_real_distribution<double> v(300.0, 450.0), i(-50.0, 80.0), it(-30.0, 30.0);
    Vec x(12);
    for (Index k = 0; k < 4; ++k) {
        x(k) = p.L(k) * i(rng);
        x(4 + k) = p.C(k) * v(rng);
        x(8 + k) = p.Lt(k) * it(rng);
    }
    return x;
}

}  // namespace testing
