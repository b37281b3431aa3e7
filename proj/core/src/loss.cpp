#include "delayscape/loss.hpp"

#include "delayscape/error.hpp"

#include <algorithm>
#include <cmath>

namespace delayscape::loss {

std::string_view to_string(CurvatureLossVariant variant) {
    switch (variant) {
        case CurvatureLossVariant::LengthWeighted: return "length-weighted";
        case CurvatureLossVariant::Uniform: return "uniform";
    }
    return "length-weighted";
}

CurvatureLossVariant curvature_loss_variant_from_string(std::string_view name) {
    if (name == "length-weighted") return CurvatureLossVariant::LengthWeighted;
    if (name == "uniform") return CurvatureLossVariant::Uniform;
    throw ParseError("unknown curvature loss variant: " + std::string(name));
}

double LossParams::radius(const mesh::HalfEdgeMesh& mesh) const {
    const double r = ball_radius.value_or(mesh.longest_flat_edge());
    if (!(r > 0.0) || !std::isfinite(r)) throw ValidationError("edge-ball radius must be positive");
    return r;
}

std::vector<TargetEdge> target_edges(const netgraph::DelayGraph& graph, const geo::Projection& projection) {
    std::vector<TargetEdge> out;
    out.reserve(graph.edges.size());
    for (const auto& e : graph.edges) {
        if (!e.ricci) {
            throw ValidationError("edge " + graph.vertices[e.u].id + "-" + graph.vertices[e.v].id +
                                  " has no curvature");
        }
        out.push_back({projection.project(graph.vertices[e.u].location),
                       projection.project(graph.vertices[e.v].location), *e.ricci});
    }
    return out;
}

namespace {

double dist2(const geo::XY& p, const geo::XY& q) {
    const double dx = p.x - q.x;
    const double dy = p.y - q.y;
    return dx * dx + dy * dy;
}

bool in_ball(const geo::XY& p, const geo::XY& a, const geo::XY& b, double r) {
    const double r2 = r * r;
    if (dist2(p, a) < r2 || dist2(p, b) < r2) return true;
    const double ex = b.x - a.x;
    const double ey = b.y - a.y;
    const double len2 = ex * ex + ey * ey;
    if (len2 == 0.0) return false;
    const double along_a = (p.x - a.x) * ex + (p.y - a.y) * ey;
    const double along_b = (p.x - b.x) * -ex + (p.y - b.y) * -ey;
    if (along_a < 0.0 || along_b < 0.0) return false;
    const double t = along_a / len2;
    const geo::XY foot{a.x + t * ex, a.y + t * ey};
    return dist2(p, foot) < r2;
}

}  // namespace

std::vector<std::size_t> edge_ball_candidates(const mesh::HalfEdgeMesh& mesh, const geo::XY& a, const geo::XY& b,
                                              double r) {
    // Scan only the grid rectangle around the segment's bounding box.
    const auto& bounds = mesh.bounds();
    const int k = mesh.k();
    auto col_of = [&](double x) { return (x - bounds.min_x) / mesh.pitch_x(); };
    auto row_of = [&](double y) { return (y - bounds.min_y) / mesh.pitch_y(); };
    const int c0 = std::max(0, static_cast<int>(std::floor(col_of(std::min(a.x, b.x) - r))));
    const int c1 = std::min(k - 1, static_cast<int>(std::ceil(col_of(std::max(a.x, b.x) + r))));
    const int r0 = std::max(0, static_cast<int>(std::floor(row_of(std::min(a.y, b.y) - r))));
    const int r1 = std::min(k - 1, static_cast<int>(std::ceil(row_of(std::max(a.y, b.y) + r))));
    std::vector<std::size_t> out;
    for (int row = r0; row <= r1; ++row) {
        for (int col = c0; col <= c1; ++col) {
            const std::size_t v = mesh.grid_index(col, row);
            if (mesh.is_boundary_vertex(v)) continue;
            if (in_ball(mesh.xy()[v], a, b, r)) out.push_back(v);
        }
    }
    return out;
}

std::vector<std::size_t> edge_ball(const mesh::HalfEdgeMesh& mesh, const geo::XY& a, const geo::XY& b, double r) {
    auto ball = edge_ball_candidates(mesh, a, b, r);
    if (ball.empty()) {
        throw GeometryError("empty edge ball; radius " + std::to_string(r) + " is below the mesh resolution");
    }
    return ball;
}

std::vector<std::size_t> LossContext::ball_sizes() const {
    std::vector<std::size_t> out;
    out.reserve(balls.size());
    for (const auto& b : balls) out.push_back(b.size());
    return out;
}

LossContext make_context(const mesh::HalfEdgeMesh& mesh, std::vector<TargetEdge> edges, const LossParams& params) {
    if (!(params.lambda_smooth >= 0.0)) throw ValidationError("lambda_smooth must be >= 0");
    LossContext ctx;
    ctx.radius = params.radius(mesh);
    ctx.lambda_smooth = params.lambda_smooth;
    ctx.variant = params.variant;
    ctx.edges = std::move(edges);
    double total_length = 0.0;
    for (const auto& e : ctx.edges) total_length += std::sqrt(dist2(e.a, e.b));
    if (params.variant == CurvatureLossVariant::LengthWeighted && !ctx.edges.empty() && !(total_length > 0.0)) {
        throw ValidationError("length-weighted curvature loss needs at least one edge of positive length");
    }
    for (const auto& e : ctx.edges) {
        auto ball = edge_ball(mesh, e.a, e.b, ctx.radius);
        const double size = static_cast<double>(ball.size());
        const double w = params.variant == CurvatureLossVariant::LengthWeighted
                             ? std::sqrt(dist2(e.a, e.b)) / total_length
                             : 1.0 / static_cast<double>(ctx.edges.size());
        ctx.weight.push_back(w / size);
        ctx.balls.push_back(std::move(ball));
    }
    return ctx;
}

double curvature_loss(const LossContext& context, const mesh::VertexCurvatures& curvatures) {
    double total = 0.0;
    for (std::size_t e = 0; e < context.edges.size(); ++e) {
        double sum = 0.0;
        for (std::size_t p : context.balls[e]) {
            const double d = context.edges[e].ricci - curvatures.gaussian[p];
            sum += d * d;
        }
        total += context.weight[e] * sum;
    }
    return total;
}

double smoothness_loss(const mesh::SurfaceState& state) {
    const auto& ld = state.laplacians.dirichlet;
    const auto& k = state.curvatures;
    return -(ld.quadratic_form(k.kplus) + ld.quadratic_form(k.kminus)) * state.geometry.total_area;
}

LossReport evaluate(const mesh::HalfEdgeMesh& mesh, const LossContext& context, std::span<const double> z,
                    bool with_gradient) {
    const mesh::SurfaceState state = mesh::evaluate_surface(mesh, z);
    const auto& k = state.curvatures;
    const auto& ld = state.laplacians.dirichlet;

    LossReport report;
    report.ball_sizes = context.ball_sizes();
    report.curvature_loss = curvature_loss(context, k);
    const std::vector<double> ld_plus = ld.multiply(k.kplus);
    const std::vector<double> ld_minus = ld.multiply(k.kminus);
    double roughness = 0.0;
    for (std::size_t i = 0; i < mesh.vertex_count(); ++i) roughness -= k.kplus[i] * ld_plus[i] + k.kminus[i] * ld_minus[i];
    const double area = state.geometry.total_area;
    report.smoothness_loss = roughness * area;
    report.total = report.curvature_loss + context.lambda_smooth * report.smoothness_loss;
    if (!std::isfinite(report.total)) throw GeometryError("non-finite loss");
    if (!with_gradient) return report;

    // dL_curv / d(gaussian_p), accumulated over every ball containing p.
    std::vector<double> g_gauss(mesh.vertex_count(), 0.0);
    for (std::size_t e = 0; e < context.edges.size(); ++e) {
        for (std::size_t p : context.balls[e]) {
            g_gauss[p] += -2.0 * context.weight[e] * (context.edges[e].ricci - k.gaussian[p]);
        }
    }

    report.gradient.assign(mesh.vertex_count(), 0.0);
    for (std::size_t ell = 0; ell < mesh.vertex_count(); ++ell) {
        const auto partials = mesh::curvature_partials(mesh, z, state, ell);
        double d_curv = 0.0;
        double d_rough = 0.0;
        for (const auto& vp : partials.vertices) {
            d_curv += g_gauss[vp.vertex] * vp.d_gaussian;
            d_rough -= 2.0 * (ld_plus[vp.vertex] * vp.d_kplus + ld_minus[vp.vertex] * vp.d_kminus);
        }
        double d_area = 0.0;
        for (const auto& fp : partials.faces) {
            d_area += fp.d_area;
            const auto& face = mesh.faces()[fp.face];
            for (int c = 0; c < 3; ++c) {
                const std::size_t a = face[c];
                const std::size_t b = face[(c + 1) % 3];
                if (mesh.is_boundary_vertex(a) || mesh.is_boundary_vertex(b)) continue;
                const double dp = k.kplus[a] - k.kplus[b];
                const double dm = k.kminus[a] - k.kminus[b];
                d_rough += 0.5 * fp.d_cot[c] * (dp * dp + dm * dm);
            }
        }
        const double d_smooth = area * d_rough + roughness * d_area;
        report.gradient[ell] = d_curv + context.lambda_smooth * d_smooth;
    }
    return report;
}

}  // namespace delayscape::loss
