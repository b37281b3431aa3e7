#pragma once

#include "delayscape/geo.hpp"
#include "delayscape/mesh.hpp"
#include "delayscape/netgraph.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace delayscape::loss {

enum class CurvatureLossVariant {
    LengthWeighted,  ///< per-edge weight |pi(e)| / (sum |pi(e)| * |B_r(e)|)
    Uniform,         ///< per-edge weight 1 / (|E| * |B_r(e)|)
};

std::string_view to_string(CurvatureLossVariant variant);
CurvatureLossVariant curvature_loss_variant_from_string(std::string_view name);

struct LossParams {
    double epsilon_ms = 0.0;
    double lambda_smooth = 0.001;
    std::optional<double> ball_radius;  ///< defaults to the flat mesh's longest edge
    CurvatureLossVariant variant = CurvatureLossVariant::LengthWeighted;

    double radius(const mesh::HalfEdgeMesh& mesh) const;
    bool operator==(const LossParams&) const = default;
};

/// A graph edge as seen by the loss: projected endpoints and its Ricci curvature.
struct TargetEdge {
    geo::XY a;
    geo::XY b;
    double ricci = 0.0;
};

/// Projects every curvature-annotated edge of `graph`. Throws ValidationError on a missing curvature.
std::vector<TargetEdge> target_edges(const netgraph::DelayGraph& graph, const geo::Projection& projection);

/// Non-boundary mesh vertices strictly within `r` of the segment a-b, ascending.
std::vector<std::size_t> edge_ball_candidates(const mesh::HalfEdgeMesh& mesh, const geo::XY& a, const geo::XY& b,
                                              double r);
/// As above; throws GeometryError when the ball is empty.
std::vector<std::size_t> edge_ball(const mesh::HalfEdgeMesh& mesh, const geo::XY& a, const geo::XY& b, double r);

/// Height-independent data: edge balls and per-edge weights.
struct LossContext {
    std::vector<TargetEdge> edges;
    std::vector<std::vector<std::size_t>> balls;
    std::vector<double> weight;  ///< c_e, already divided by |B_r(e)|
    double radius = 0.0;
    double lambda_smooth = 0.0;
    CurvatureLossVariant variant = CurvatureLossVariant::LengthWeighted;

    std::vector<std::size_t> ball_sizes() const;
};

LossContext make_context(const mesh::HalfEdgeMesh& mesh, std::vector<TargetEdge> edges, const LossParams& params);

struct LossReport {
    double curvature_loss = 0.0;
    double smoothness_loss = 0.0;
    double total = 0.0;
    std::vector<double> gradient;  ///< empty unless requested
    std::vector<std::size_t> ball_sizes;
};

/// Curvature-matching loss: sum_e c_e sum_{p in B_r(e)} (ricci_e - gaussian_p)^2.
double curvature_loss(const LossContext& context, const mesh::VertexCurvatures& curvatures);

/// Principal-curvature roughness -(k+^T L_D k+ + k-^T L_D k-) times the total face area.
double smoothness_loss(const mesh::SurfaceState& state);

/// Loss (and optionally its gradient with respect to every height) at heights `z`.
LossReport evaluate(const mesh::HalfEdgeMesh& mesh, const LossContext& context, std::span<const double> z,
                    bool with_gradient = true);

}  // namespace delayscape::loss
