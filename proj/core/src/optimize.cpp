#include "delayscape/optimize.hpp"

#include "delayscape/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

namespace delayscape::optimize {

void OptimizeConfig::validate() const {
    if (max_iterations < 1) throw ValidationError("max_iterations must be >= 1");
    if (!(gradient_tolerance > 0.0)) throw ValidationError("gradient_tolerance must be positive");
    if (!(relative_loss_tolerance > 0.0)) throw ValidationError("relative_loss_tolerance must be positive");
    if (lbfgs_memory < 1) throw ValidationError("lbfgs_memory must be >= 1");
}

std::string_view to_string(Termination reason) {
    switch (reason) {
        case Termination::GradientTolerance: return "gradient-tolerance";
        case Termination::RelativeLossChange: return "relative-loss-change";
        case Termination::MaxIterations: return "max-iterations";
        case Termination::LineSearchFailure: return "line-search-failure";
    }
    return "max-iterations";
}

Termination termination_from_string(std::string_view name) {
    for (auto t : {Termination::GradientTolerance, Termination::RelativeLossChange, Termination::MaxIterations,
                   Termination::LineSearchFailure}) {
        if (to_string(t) == name) return t;
    }
    throw ParseError("unknown termination reason: " + std::string(name));
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double inf_norm(std::span<const double> a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

struct Sample {
    double alpha = 0.0;
    double f = 0.0;
    double slope = 0.0;  ///< directional derivative
    std::vector<double> x;
    std::vector<double> g;
};

/// Minimizer of the cubic through (a, fa, da) and (b, fb, db), kept inside [lo, hi].
double cubic_step(const Sample& a, const Sample& b, double lo, double hi) {
    const double d1 = a.slope + b.slope - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
    const double disc = d1 * d1 - a.slope * b.slope;
    double t = 0.5 * (a.alpha + b.alpha);
    if (disc >= 0.0) {
        const double d2 = std::copysign(std::sqrt(disc), b.alpha - a.alpha);
        const double denom = b.slope - a.slope + 2.0 * d2;
        if (denom != 0.0) t = b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / denom;
    }
    const double width = hi - lo;
    // Stay away from the interval ends so the bracket keeps shrinking.
    if (!std::isfinite(t) || t < lo + 0.1 * width || t > hi - 0.1 * width) t = lo + 0.5 * width;
    return t;
}

class LineSearch {
public:
    LineSearch(const Objective& objective, std::span<const double> x, std::span<const double> d, double f0,
               double slope0)
        : objective_(objective), x_(x), d_(d), f0_(f0), slope0_(slope0) {}

    /// Strong-Wolfe step search; returns false when no acceptable step was found.
    bool run(double alpha0, Sample& out) {
        Sample prev{0.0, f0_, slope0_, {}, {}};
        double alpha = alpha0;
        for (int i = 0; i < kMaxEvaluations; ++i) {
            Sample cur = sample(alpha);
            if (!std::isfinite(cur.f) || cur.f > f0_ + kC1 * alpha * slope0_ || (i > 0 && cur.f >= prev.f)) {
                if (!std::isfinite(cur.f)) {
                    alpha = 0.5 * (prev.alpha + alpha);
                    continue;
                }
                return zoom(prev, cur, out);
            }
            if (std::abs(cur.slope) <= -kC2 * slope0_) {
                out = std::move(cur);
                return true;
            }
            if (cur.slope >= 0.0) return zoom(cur, prev, out);
            prev = std::move(cur);
            alpha *= 2.0;
        }
        return false;
    }

private:
    static constexpr double kC1 = 1e-4;
    static constexpr double kC2 = 0.9;
    static constexpr int kMaxEvaluations = 40;

    Sample sample(double alpha) {
        Sample s;
        s.alpha = alpha;
        s.x.resize(x_.size());
        for (std::size_t i = 0; i < x_.size(); ++i) s.x[i] = x_[i] + alpha * d_[i];
        try {
            s.f = objective_(s.x, s.g);
        } catch (const GeometryError&) {
            s.f = std::numeric_limits<double>::infinity();
        }
        s.slope = std::isfinite(s.f) ? dot(s.g, d_) : 0.0;
        return s;
    }

    bool zoom(Sample lo, Sample hi, Sample& out) {
        for (int i = 0; i < kMaxEvaluations; ++i) {
            const double a = std::min(lo.alpha, hi.alpha);
            const double b = std::max(lo.alpha, hi.alpha);
            if (b - a <= 1e-16 * std::max(1.0, b)) break;
            const double alpha = std::isfinite(hi.f) ? cubic_step(lo, hi, a, b) : 0.5 * (a + b);
            Sample cur = sample(alpha);
            if (!std::isfinite(cur.f) || cur.f > f0_ + kC1 * alpha * slope0_ || cur.f >= lo.f) {
                hi = std::move(cur);
                continue;
            }
            if (std::abs(cur.slope) <= -kC2 * slope0_) {
                out = std::move(cur);
                return true;
            }
            if (cur.slope * (hi.alpha - lo.alpha) >= 0.0) hi = std::move(lo);
            lo = std::move(cur);
        }
        // Accept the best sufficient-decrease point found, if any.
        if (lo.alpha > 0.0 && lo.f < f0_) {
            out = std::move(lo);
            return true;
        }
        return false;
    }

    const Objective& objective_;
    std::span<const double> x_;
    std::span<const double> d_;
    double f0_;
    double slope0_;
};

}  // namespace

OptimizeResult minimize_lbfgs(const Objective& objective, std::vector<double> x0, const OptimizeConfig& config) {
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    const std::size_t n = x0.size();
    OptimizeResult result;
    std::vector<double> x = std::move(x0);
    std::vector<double> g;
    double f = objective(x, g);
    if (!std::isfinite(f)) throw GeometryError("initial loss is not finite");
    if (config.record_history) result.loss_history.push_back(f);

    std::deque<std::vector<double>> s_hist, y_hist;
    std::deque<double> rho_hist;
    std::vector<double> d(n), alpha_buf;

    auto finish = [&](Termination reason) {
        result.termination = reason;
        result.final_loss = f;
        result.gradient_inf_norm = inf_norm(g);
        result.heights = std::move(x);
        result.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return std::move(result);
    };

    for (int iter = 0;; ++iter) {
        if (inf_norm(g) <= config.gradient_tolerance) return finish(Termination::GradientTolerance);
        if (iter >= config.max_iterations) return finish(Termination::MaxIterations);

        // Two-loop recursion for d = -H g.
        for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
        alpha_buf.assign(s_hist.size(), 0.0);
        for (std::size_t j = s_hist.size(); j-- > 0;) {
            alpha_buf[j] = rho_hist[j] * dot(s_hist[j], d);
            for (std::size_t i = 0; i < n; ++i) d[i] -= alpha_buf[j] * y_hist[j][i];
        }
        if (!s_hist.empty()) {
            const double gamma = dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
            for (double& v : d) v *= gamma;
        }
        for (std::size_t j = 0; j < s_hist.size(); ++j) {
            const double beta = rho_hist[j] * dot(y_hist[j], d);
            for (std::size_t i = 0; i < n; ++i) d[i] += (alpha_buf[j] - beta) * s_hist[j][i];
        }
        double slope = dot(g, d);
        if (!(slope < 0.0)) {
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
            slope = dot(g, d);
        }

        const double alpha0 = s_hist.empty() ? std::min(1.0, 1.0 / std::sqrt(dot(g, g))) : 1.0;
        LineSearch search(objective, x, d, f, slope);
        Sample next;
        if (!search.run(alpha0, next)) return finish(Termination::LineSearchFailure);

        std::vector<double> s(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = next.x[i] - x[i];
            y[i] = next.g[i] - g[i];
        }
        const double sy = dot(s, y);
        const double previous = f;
        x = std::move(next.x);
        g = std::move(next.g);
        f = next.f;
        ++result.iterations;
        if (config.record_history) result.loss_history.push_back(f);
        if (sy > 1e-12 * std::sqrt(dot(s, s) * dot(y, y))) {
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(y));
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > config.lbfgs_memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }
        const double scale = std::max({std::abs(previous), std::abs(f), 1.0});
        if ((previous - f) / scale <= config.relative_loss_tolerance) {
            if (inf_norm(g) <= config.gradient_tolerance) return finish(Termination::GradientTolerance);
            return finish(Termination::RelativeLossChange);
        }
    }
}

OptimizeResult optimize_heights(const mesh::HalfEdgeMesh& mesh, const loss::LossContext& context,
                                std::vector<double> initial, const OptimizeConfig& config) {
    if (initial.size() != mesh.vertex_count()) throw ValidationError("initial heights do not match the mesh");
    const Objective objective = [&](std::span<const double> z, std::vector<double>& grad) {
        auto report = loss::evaluate(mesh, context, z, true);
        grad = std::move(report.gradient);
        return report.total;
    };
    return minimize_lbfgs(objective, std::move(initial), config);
}

std::vector<double> subtract_initial_heights(std::span<const double> final_heights,
                                             std::span<const double> initial_heights) {
    if (final_heights.size() != initial_heights.size()) {
        throw ValidationError("height vectors differ in size");
    }
    std::vector<double> out(final_heights.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = final_heights[i] - initial_heights[i];
    return out;
}

namespace {

double cross(const geo::XY& o, const geo::XY& a, const geo::XY& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

double segment_distance(const geo::XY& p, const geo::XY& a, const geo::XY& b) {
    const double ex = b.x - a.x;
    const double ey = b.y - a.y;
    const double len2 = ex * ex + ey * ey;
    double t = len2 > 0.0 ? ((p.x - a.x) * ex + (p.y - a.y) * ey) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(p.x - (a.x + t * ex), p.y - (a.y + t * ey));
}

}  // namespace

std::vector<geo::XY> convex_hull(std::vector<geo::XY> points) {
    std::sort(points.begin(), points.end(),
              [](const geo::XY& a, const geo::XY& b) { return a.x != b.x ? a.x < b.x : a.y < b.y; });
    points.erase(std::unique(points.begin(), points.end()), points.end());
    if (points.size() < 3) return points;
    // Andrew's monotone chain.
    std::vector<geo::XY> hull(2 * points.size());
    std::size_t k = 0;
    for (const auto& p : points) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
        hull[k++] = p;
    }
    for (std::size_t i = points.size() - 1, lower = k + 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], points[i]) <= 0.0) --k;
        hull[k++] = points[i];
    }
    hull.resize(k - 1);
    return hull;
}

double distance_to_hull(const geo::XY& p, const std::vector<geo::XY>& hull) {
    if (hull.empty()) return std::numeric_limits<double>::infinity();
    if (hull.size() == 1) return std::hypot(p.x - hull[0].x, p.y - hull[0].y);
    if (hull.size() == 2) return segment_distance(p, hull[0], hull[1]);
    bool inside = true;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < hull.size(); ++i) {
        const auto& a = hull[i];
        const auto& b = hull[(i + 1) % hull.size()];
        if (cross(a, b, p) < 0.0) inside = false;
        best = std::min(best, segment_distance(p, a, b));
    }
    return inside ? 0.0 : best;
}

std::vector<std::vector<geo::XY>> component_hulls(const netgraph::DelayGraph& graph,
                                                  const geo::Projection& projection) {
    const auto adj = graph.adjacency();
    std::vector<int> component(graph.vertices.size(), -1);
    std::vector<std::vector<geo::XY>> hulls;
    for (std::size_t s = 0; s < graph.vertices.size(); ++s) {
        if (component[s] >= 0) continue;
        const int id = static_cast<int>(hulls.size());
        std::vector<geo::XY> members;
        std::vector<std::size_t> stack{s};
        component[s] = id;
        while (!stack.empty()) {
            const std::size_t u = stack.back();
            stack.pop_back();
            members.push_back(projection.project(graph.vertices[u].location));
            for (std::size_t v : adj[u]) {
                if (component[v] < 0) {
                    component[v] = id;
                    stack.push_back(v);
                }
            }
        }
        hulls.push_back(convex_hull(std::move(members)));
    }
    return hulls;
}

std::vector<double> flatten_exterior(const mesh::HalfEdgeMesh& mesh, std::span<const double> heights,
                                     const std::vector<std::vector<geo::XY>>& hulls, double falloff_width) {
    if (heights.size() != mesh.vertex_count()) throw ValidationError("height vector size does not match the mesh");
    if (hulls.empty()) throw ValidationError("flattening needs at least one graph vertex");
    if (!(falloff_width > 0.0)) throw ValidationError("falloff width must be positive");
    const double lowest = *std::min_element(heights.begin(), heights.end());
    std::vector<double> out(heights.size());
    for (std::size_t v = 0; v < out.size(); ++v) {
        double d = std::numeric_limits<double>::infinity();
        for (const auto& hull : hulls) d = std::min(d, distance_to_hull(mesh.xy()[v], hull));
        out[v] = (heights[v] - lowest) * std::max(0.0, 1.0 - d / falloff_width);
    }
    return out;
}

}  // namespace delayscape::optimize
