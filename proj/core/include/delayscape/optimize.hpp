#pragma once

#include "delayscape/geo.hpp"
#include "delayscape/loss.hpp"
#include "delayscape/mesh.hpp"
#include "delayscape/netgraph.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace delayscape::optimize {

struct OptimizeConfig {
    int max_iterations = 2000;
    double gradient_tolerance = 1e-6;       ///< on the infinity norm
    double relative_loss_tolerance = 1e-9;  ///< (f_k - f_k+1) / max(|f_k|, |f_k+1|, 1)
    int lbfgs_memory = 10;
    bool record_history = true;

    void validate() const;
    bool operator==(const OptimizeConfig&) const = default;
};

enum class Termination { GradientTolerance, RelativeLossChange, MaxIterations, LineSearchFailure };

std::string_view to_string(Termination reason);
Termination termination_from_string(std::string_view name);

struct OptimizeResult {
    std::vector<double> heights;
    std::vector<double> loss_history;  ///< initial loss, then one entry per accepted iterate
    Termination termination = Termination::MaxIterations;
    int iterations = 0;
    double final_loss = 0.0;
    double gradient_inf_norm = 0.0;
    double wall_time_s = 0.0;
};

/// Objective returning the value and writing the gradient into its second argument.
using Objective = std::function<double(std::span<const double>, std::vector<double>&)>;

/// Unconstrained L-BFGS with a strong-Wolfe line search. Throws GeometryError when the
/// initial value is not finite; a failed line search ends the run at the last accepted iterate.
OptimizeResult minimize_lbfgs(const Objective& objective, std::vector<double> x0, const OptimizeConfig& config);

/// Minimizes the loss over mesh heights starting from `initial`.
OptimizeResult optimize_heights(const mesh::HalfEdgeMesh& mesh, const loss::LossContext& context,
                                std::vector<double> initial, const OptimizeConfig& config);

/// Elementwise final - initial; throws ValidationError on a size mismatch.
std::vector<double> subtract_initial_heights(std::span<const double> final_heights,
                                             std::span<const double> initial_heights);

/// Convex hull (counterclockwise, no repeated or collinear points) of a planar point set.
std::vector<geo::XY> convex_hull(std::vector<geo::XY> points);

/// Distance from p to a convex hull: zero inside, segment or point distance for degenerate hulls.
double distance_to_hull(const geo::XY& p, const std::vector<geo::XY>& hull);

/// One hull per connected component of the graph, over projected vertex positions.
std::vector<std::vector<geo::XY>> component_hulls(const netgraph::DelayGraph& graph, const geo::Projection& projection);

/// Shifts heights so the minimum is zero, then scales each vertex by max(0, 1 - d / falloff)
/// where d is its planar distance to the union of `hulls`.
std::vector<double> flatten_exterior(const mesh::HalfEdgeMesh& mesh, std::span<const double> heights,
                                     const std::vector<std::vector<geo::XY>>& hulls, double falloff_width);

}  // namespace delayscape::optimize
