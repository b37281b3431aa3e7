#pragma once

#include "delayscape/netgraph.hpp"

#include <cstddef>
#include <vector>

namespace delayscape::ricci {

/// Probability measure on graph vertices.
struct Distribution {
    std::vector<std::size_t> support;
    std::vector<double> mass;

    /// Uniform mass 1/deg on every neighbor (no self mass).
    static Distribution uniform_neighbors(const std::vector<std::vector<std::size_t>>& adjacency,
                                          std::size_t vertex);
    /// Throws ValidationError unless masses are positive, sum to 1 and the support is distinct.
    void validate() const;
};

struct TransportEntry {
    std::size_t source = 0;
    std::size_t target = 0;
    double mass = 0.0;
};

struct TransportPlan {
    std::vector<TransportEntry> entries;
    double cost = 0.0;
};

/// Exact solver for the balanced transportation problem
///   min sum c_ij x_ij  s.t.  sum_j x_ij = supply_i, sum_i x_ij = demand_j, x >= 0
/// using the transportation simplex (MODI potentials, Bland's rule).
/// `cost` is row-major supply x demand. Returns the flow matrix (row-major).
std::vector<double> solve_transportation(const std::vector<double>& supply, const std::vector<double>& demand,
                                         const std::vector<double>& cost);

/// Hop-count distances from `source`; unreachable vertices get SIZE_MAX.
std::vector<std::size_t> hop_distances(const std::vector<std::vector<std::size_t>>& adjacency,
                                       std::size_t source);

/// Wasserstein-1 distance with the hop metric of `graph`.
/// Throws TransportError when the supports lie in different components.
TransportPlan wasserstein1(const std::vector<std::vector<std::size_t>>& adjacency, const Distribution& mx,
                           const Distribution& my);
TransportPlan wasserstein1(const netgraph::DelayGraph& graph, const Distribution& mx, const Distribution& my);

/// Ollivier-Ricci curvature 1 - W1(m_x, m_y) of edge `edge_index` under uniform neighbor measures.
double edge_curvature(const netgraph::DelayGraph& graph, std::size_t edge_index);
double edge_curvature(const std::vector<std::vector<std::size_t>>& adjacency, std::size_t x, std::size_t y);

/// Copy of `graph` with `ricci` populated on every edge.
netgraph::DelayGraph curvature_graph(const netgraph::DelayGraph& graph);

}  // namespace delayscape::ricci
