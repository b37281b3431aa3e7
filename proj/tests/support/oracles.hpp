#pragma once

// Independent reference implementations used only by tests.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <queue>
#include <vector>

namespace oracle {

using Adjacency = std::vector<std::vector<std::size_t>>;

/// Solves the square system A x = b by Gaussian elimination with partial pivoting.
/// Returns false when A is singular.
inline bool solve_dense(std::vector<std::vector<double>> a, std::vector<double> b, std::vector<double>& x) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        }
        if (std::abs(a[pivot][col]) < 1e-12) return false;
        std::swap(a[pivot], a[col]);
        std::swap(b[pivot], b[col]);
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a[r][col] / a[col][col];
            if (f == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    x.resize(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[i] / a[i][i];
    return true;
}

/// Optimal transportation cost by enumerating every basic feasible solution.
/// The constraint matrix has rank m + n - 1; the last demand row is dropped.
inline double transport_lp_enumeration(const std::vector<double>& supply, const std::vector<double>& demand,
                                       const std::vector<double>& cost) {
    const std::size_t m = supply.size();
    const std::size_t n = demand.size();
    const std::size_t vars = m * n;
    const std::size_t rank = m + n - 1;
    std::vector<double> rhs(supply);
    rhs.insert(rhs.end(), demand.begin(), demand.end() - 1);
    double best = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> pick(rank);
    std::function<void(std::size_t, std::size_t)> recurse = [&](std::size_t start, std::size_t depth) {
        if (depth == rank) {
            std::vector<std::vector<double>> a(rank, std::vector<double>(rank, 0.0));
            for (std::size_t c = 0; c < rank; ++c) {
                const std::size_t i = pick[c] / n;
                const std::size_t j = pick[c] % n;
                a[i][c] = 1.0;
                if (j + 1 < n) a[m + j][c] = 1.0;
            }
            std::vector<double> x;
            if (!solve_dense(a, rhs, x)) return;
            double total = 0.0;
            std::vector<double> col_sum(n, 0.0);
            for (std::size_t c = 0; c < rank; ++c) {
                if (x[c] < -1e-12) return;
                total += x[c] * cost[pick[c]];
                col_sum[pick[c] % n] += x[c];
            }
            if (std::abs(col_sum[n - 1] - demand[n - 1]) > 1e-9) return;
            best = std::min(best, total);
            return;
        }
        for (std::size_t v = start; v + (rank - depth) <= vars; ++v) {
            pick[depth] = v;
            recurse(v + 1, depth + 1);
        }
    };
    recurse(0, 0);
    return best;
}

inline std::vector<std::size_t> bfs(const Adjacency& adj, std::size_t s) {
    std::vector<std::size_t> d(adj.size(), std::numeric_limits<std::size_t>::max());
    std::queue<std::size_t> q;
    d[s] = 0;
    q.push(s);
    while (!q.empty()) {
        const std::size_t u = q.front();
        q.pop();
        for (std::size_t v : adj[u]) {
            if (d[v] == std::numeric_limits<std::size_t>::max()) {
                d[v] = d[u] + 1;
                q.push(v);
            }
        }
    }
    return d;
}

/// Ollivier-Ricci curvature of (x, y) with uniform neighbor measures, via LP enumeration.
inline double ricci_enumeration(const Adjacency& adj, std::size_t x, std::size_t y) {
    const auto& nx = adj[x];
    const auto& ny = adj[y];
    std::vector<double> supply(nx.size(), 1.0 / static_cast<double>(nx.size()));
    std::vector<double> demand(ny.size(), 1.0 / static_cast<double>(ny.size()));
    std::vector<double> cost;
    for (std::size_t a : nx) {
        const auto d = bfs(adj, a);
        for (std::size_t b : ny) cost.push_back(static_cast<double>(d[b]));
    }
    return 1.0 - transport_lp_enumeration(supply, demand, cost);
}

inline Adjacency from_mask(std::size_t n, unsigned mask) {
    Adjacency adj(n);
    std::size_t bit = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j, ++bit) {
            if (mask & (1u << bit)) {
                adj[i].push_back(j);
                adj[j].push_back(i);
            }
        }
    }
    return adj;
}

inline bool connected(const Adjacency& adj) {
    const auto d = bfs(adj, 0);
    return std::none_of(d.begin(), d.end(), [](std::size_t v) { return v == std::numeric_limits<std::size_t>::max(); });
}

/// One representative per isomorphism class of connected graphs on n vertices.
inline std::vector<Adjacency> connected_graphs(std::size_t n) {
    const std::size_t pairs = n * (n - 1) / 2;
    std::vector<std::size_t> perm(n);
    std::vector<unsigned> seen;
    std::vector<Adjacency> out;
    for (unsigned mask = 0; mask < (1u << pairs); ++mask) {
        auto adj = from_mask(n, mask);
        if (n > 1 && !connected(adj)) continue;
        unsigned canon = std::numeric_limits<unsigned>::max();
        for (std::size_t i = 0; i < n; ++i) perm[i] = i;
        do {
            unsigned m = 0;
            std::size_t bit = 0;
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = i + 1; j < n; ++j, ++bit) {
                    const std::size_t a = std::min(perm[i], perm[j]);
                    const std::size_t b = std::max(perm[i], perm[j]);
                    const bool on = std::find(adj[a].begin(), adj[a].end(), b) != adj[a].end();
                    if (on) m |= 1u << bit;
                }
            }
            canon = std::min(canon, m);
        } while (std::next_permutation(perm.begin(), perm.end()));
        if (std::find(seen.begin(), seen.end(), canon) != seen.end()) continue;
        seen.push_back(canon);
        out.push_back(std::move(adj));
    }
    return out;
}

/// Complete graph K_n.
inline Adjacency complete(std::size_t n) { return from_mask(n, (1u << (n * (n - 1) / 2)) - 1); }

/// Two adjacent centers 0 and 1, each with d - 1 private leaves.
inline Adjacency tree_bridge(std::size_t d) {
    Adjacency adj(2 + 2 * (d - 1));
    auto link = [&](std::size_t a, std::size_t b) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    };
    link(0, 1);
    std::size_t next = 2;
    for (std::size_t c = 0; c < 2; ++c) {
        for (std::size_t l = 0; l + 1 < d; ++l) link(c, next++);
    }
    return adj;
}

/// Central finite difference of a scalar function of one coordinate.
template <class F>
double central_difference(F&& f, std::vector<double> z, std::size_t ell, double h = 1e-6) {
    const double z0 = z[ell];
    z[ell] = z0 + h;
    const double plus = f(z);
    z[ell] = z0 - h;
    const double minus = f(z);
    return (plus - minus) / (2.0 * h);
}

/// Relative agreement, with an absolute floor for small magnitudes.
inline bool close(double analytic, double numeric, double rel = 1e-5, double abs_tol = 1e-8, double small = 1e-3) {
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    if (scale < small) return std::abs(analytic - numeric) <= abs_tol;
    return std::abs(analytic - numeric) <= rel * scale;
}

}  // namespace oracle
