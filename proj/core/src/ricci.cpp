#include "delayscape/ricci.hpp"

#include "delayscape/error.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <set>

namespace delayscape::ricci {

namespace {

constexpr std::size_t kUnreachable = std::numeric_limits<std::size_t>::max();
constexpr double kReducedCostTol = 1e-12;

struct Cell {
    std::size_t row;
    std::size_t col;
};

}  // namespace

Distribution Distribution::uniform_neighbors(const std::vector<std::vector<std::size_t>>& adjacency,
                                             std::size_t vertex) {
    const auto& nbrs = adjacency.at(vertex);
    if (nbrs.empty()) throw ValidationError("vertex has no neighbors");
    Distribution d;
    d.support = nbrs;
    d.mass.assign(nbrs.size(), 1.0 / static_cast<double>(nbrs.size()));
    return d;
}

void Distribution::validate() const {
    if (support.empty() || support.size() != mass.size()) throw ValidationError("malformed distribution");
    double total = 0.0;
    for (double m : mass) {
        if (!(m > 0.0)) throw ValidationError("distribution masses must be positive");
        total += m;
    }
    if (std::abs(total - 1.0) > 1e-12) throw ValidationError("distribution masses must sum to 1");
    std::set<std::size_t> seen(support.begin(), support.end());
    if (seen.size() != support.size()) throw ValidationError("distribution support must be distinct");
}

std::vector<double> solve_transportation(const std::vector<double>& supply, const std::vector<double>& demand,
                                         const std::vector<double>& cost) {
    const std::size_t m = supply.size();
    const std::size_t n = demand.size();
    if (m == 0 || n == 0 || cost.size() != m * n) throw ValidationError("malformed transportation problem");

    std::vector<double> flow(m * n, 0.0);
    std::vector<char> basic(m * n, 0);

    // Northwest-corner start. Exactly m + n - 1 cells are made basic, zero-valued
    // ones included, so the basis is always a spanning tree of rows and columns.
    {
        std::vector<double> a = supply;
        std::vector<double> b = demand;
        std::size_t i = 0;
        std::size_t j = 0;
        while (i < m && j < n) {
            const double q = std::min(a[i], b[j]);
            flow[i * n + j] = q;
            basic[i * n + j] = 1;
            a[i] -= q;
            b[j] -= q;
            if (i == m - 1) {
                ++j;
            } else if (j == n - 1) {
                ++i;
            } else if (a[i] <= b[j]) {
                ++i;
            } else {
                ++j;
            }
        }
    }

    std::vector<double> u(m);
    std::vector<double> v(n);
    // Tree adjacency over nodes: rows are [0, m), columns are [m, m + n).
    auto tree_path = [&](std::size_t from_row, std::size_t to_col) {
        // BFS through basic cells from row node to column node; returns the cells on the path.
        const std::size_t nodes = m + n;
        std::vector<std::size_t> parent(nodes, kUnreachable);
        std::deque<std::size_t> queue{from_row};
        parent[from_row] = from_row;
        while (!queue.empty()) {
            const std::size_t node = queue.front();
            queue.pop_front();
            if (node == m + to_col) break;
            if (node < m) {
                for (std::size_t c = 0; c < n; ++c) {
                    if (basic[node * n + c] && parent[m + c] == kUnreachable) {
                        parent[m + c] = node;
                        queue.push_back(m + c);
                    }
                }
            } else {
                const std::size_t c = node - m;
                for (std::size_t r = 0; r < m; ++r) {
                    if (basic[r * n + c] && parent[r] == kUnreachable) {
                        parent[r] = node;
                        queue.push_back(r);
                    }
                }
            }
        }
        std::vector<Cell> path;
        std::size_t node = m + to_col;
        while (node != from_row) {
            const std::size_t prev = parent[node];
            if (node >= m) {
                path.push_back({prev, node - m});
            } else {
                path.push_back({node, prev - m});
            }
            node = prev;
        }
        std::reverse(path.begin(), path.end());
        return path;
    };

    const std::size_t max_iterations = 50 * (m * n + 10);
    for (std::size_t iter = 0; iter < max_iterations; ++iter) {
        // Potentials from the basis tree: u_i + v_j = c_ij on basic cells, u_0 = 0.
        std::vector<char> u_set(m, 0);
        std::vector<char> v_set(n, 0);
        u[0] = 0.0;
        u_set[0] = 1;
        std::deque<std::size_t> queue{0};
        while (!queue.empty()) {
            const std::size_t node = queue.front();
            queue.pop_front();
            if (node < m) {
                for (std::size_t c = 0; c < n; ++c) {
                    if (basic[node * n + c] && !v_set[c]) {
                        v[c] = cost[node * n + c] - u[node];
                        v_set[c] = 1;
                        queue.push_back(m + c);
                    }
                }
            } else {
                const std::size_t c = node - m;
                for (std::size_t r = 0; r < m; ++r) {
                    if (basic[r * n + c] && !u_set[r]) {
                        u[r] = cost[r * n + c] - v[c];
                        u_set[r] = 1;
                        queue.push_back(r);
                    }
                }
            }
        }

        // Bland's rule: first non-basic cell with negative reduced cost enters.
        std::size_t enter = kUnreachable;
        for (std::size_t idx = 0; idx < m * n; ++idx) {
            if (basic[idx]) continue;
            const double reduced = cost[idx] - u[idx / n] - v[idx % n];
            if (reduced < -kReducedCostTol) {
                enter = idx;
                break;
            }
        }
        if (enter == kUnreachable) return flow;

        const std::size_t er = enter / n;
        const std::size_t ec = enter % n;
        // Cycle: entering cell (+), then the tree path from column ec back to row er
        // alternates (-), (+), ... Path from row er to column ec is reversed here.
        auto path = tree_path(er, ec);
        std::reverse(path.begin(), path.end());
        double theta = std::numeric_limits<double>::infinity();
        std::size_t leave = kUnreachable;
        for (std::size_t k = 0; k < path.size(); k += 2) {
            const std::size_t idx = path[k].row * n + path[k].col;
            if (flow[idx] < theta || (flow[idx] == theta && idx < leave)) {
                theta = flow[idx];
                leave = idx;
            }
        }
        flow[enter] += theta;
        for (std::size_t k = 0; k < path.size(); ++k) {
            const std::size_t idx = path[k].row * n + path[k].col;
            flow[idx] += (k % 2 == 0) ? -theta : theta;
        }
        flow[leave] = 0.0;
        basic[leave] = 0;
        basic[enter] = 1;
    }
    throw TransportError("transportation simplex did not converge");
}

std::vector<std::size_t> hop_distances(const std::vector<std::vector<std::size_t>>& adjacency, std::size_t source) {
    std::vector<std::size_t> dist(adjacency.size(), kUnreachable);
    std::deque<std::size_t> queue{source};
    dist[source] = 0;
    while (!queue.empty()) {
        const std::size_t x = queue.front();
        queue.pop_front();
        for (std::size_t y : adjacency[x]) {
            if (dist[y] == kUnreachable) {
                dist[y] = dist[x] + 1;
                queue.push_back(y);
            }
        }
    }
    return dist;
}

TransportPlan wasserstein1(const std::vector<std::vector<std::size_t>>& adjacency, const Distribution& mx,
                           const Distribution& my) {
    mx.validate();
    my.validate();
    const std::size_t m = mx.support.size();
    const std::size_t n = my.support.size();
    std::vector<double> cost(m * n);
    for (std::size_t i = 0; i < m; ++i) {
        const auto dist = hop_distances(adjacency, mx.support[i]);
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t d = dist.at(my.support[j]);
            if (d == kUnreachable) throw TransportError("distribution supports lie in different components");
            cost[i * n + j] = static_cast<double>(d);
        }
    }
    const std::vector<double> flow = solve_transportation(mx.mass, my.mass, cost);
    TransportPlan plan;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double q = flow[i * n + j];
            if (q > 0.0) {
                plan.entries.push_back({mx.support[i], my.support[j], q});
                plan.cost += q * cost[i * n + j];
            }
        }
    }
    return plan;
}

TransportPlan wasserstein1(const netgraph::DelayGraph& graph, const Distribution& mx, const Distribution& my) {
    return wasserstein1(graph.adjacency(), mx, my);
}

double edge_curvature(const std::vector<std::vector<std::size_t>>& adjacency, std::size_t x, std::size_t y) {
    const auto mx = Distribution::uniform_neighbors(adjacency, x);
    const auto my = Distribution::uniform_neighbors(adjacency, y);
    return 1.0 - wasserstein1(adjacency, mx, my).cost;
}

double edge_curvature(const netgraph::DelayGraph& graph, std::size_t edge_index) {
    const auto& e = graph.edges.at(edge_index);
    return edge_curvature(graph.adjacency(), e.u, e.v);
}

netgraph::DelayGraph curvature_graph(const netgraph::DelayGraph& graph) {
    netgraph::DelayGraph out = graph;
    const auto adjacency = graph.adjacency();
    for (auto& e : out.edges) e.ricci = edge_curvature(adjacency, e.u, e.v);
    return out;
}

}  // namespace delayscape::ricci
