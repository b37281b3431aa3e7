#include "delayscape/error.hpp"
#include "delayscape/loss.hpp"

#include "fixtures.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace delayscape;
using namespace delayscape::loss;
using mesh::Bounds;
using mesh::HalfEdgeMesh;

namespace {

const Bounds kDomain{-0.1, -0.1, 1.1, 1.1};

std::vector<double> random_heights(const HalfEdgeMesh& m, std::uint64_t seed, double amplitude) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, amplitude);
    std::vector<double> z(m.vertex_count());
    for (auto& h : z) h = u(rng);
    return z;
}

/// Brute-force membership: distance from p to the closed segment a-b below r.
bool near_segment(const geo::XY& p, const geo::XY& a, const geo::XY& b, double r) {
    const double ex = b.x - a.x, ey = b.y - a.y;
    const double len2 = ex * ex + ey * ey;
    double t = len2 > 0 ? ((p.x - a.x) * ex + (p.y - a.y) * ey) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(p.x - (a.x + t * ex), p.y - (a.y + t * ey)) < r;
}

}  // namespace

TEST_CASE("edge balls") {
    const auto m = HalfEdgeMesh::grid(13, kDomain);  // pitch 0.1
    const double pitch = m.pitch_x();
    SUBCASE("matches a brute-force distance scan") {
        std::mt19937_64 rng(4);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int t = 0; t < 50; ++t) {
            const geo::XY a{u(rng), u(rng)}, b{u(rng), u(rng)};
            const double r = 0.05 + 0.2 * u(rng);
            std::vector<std::size_t> expected;
            for (std::size_t v = 0; v < m.vertex_count(); ++v) {
                if (!m.is_boundary_vertex(v) && near_segment(m.xy()[v], a, b, r)) expected.push_back(v);
            }
            CHECK(edge_ball_candidates(m, a, b, r) == expected);
        }
    }
    SUBCASE("distance exactly r is excluded") {
        // Integer coordinates keep every distance exact.
        const auto exact = HalfEdgeMesh::grid(9, Bounds{0, 0, 8, 8});
        const auto ball = edge_ball(exact, {2, 3}, {5, 3}, 1.0);
        CHECK(ball.size() == 4);
        for (std::size_t v : ball) CHECK(exact.xy()[v].y == 3.0);
    }
    SUBCASE("boundary vertices are excluded and empty balls are errors") {
        const geo::XY a = m.xy()[m.grid_index(0, 0)];
        const geo::XY b = m.xy()[m.grid_index(0, 5)];
        CHECK_THROWS_AS(edge_ball(m, a, b, 0.5 * pitch), GeometryError);
        CHECK_FALSE(edge_ball(m, a, b, 1.5 * pitch).empty());
    }
    SUBCASE("ball size grows linearly with span") {
        const auto exact = HalfEdgeMesh::grid(17, Bounds{0, 0, 16, 16});
        std::vector<double> sizes;
        for (int span = 1; span <= 8; ++span) {
            sizes.push_back(static_cast<double>(edge_ball(exact, {3, 8}, {3.0 + span, 8}, 1.5).size()));
        }
        for (std::size_t i = 1; i < sizes.size(); ++i) CHECK(sizes[i] - sizes[i - 1] == 3.0);
    }
}

TEST_CASE("curvature loss hand evaluations") {
    const auto m = HalfEdgeMesh::grid(13, kDomain);
    const auto flat = mesh::evaluate_surface(m, m.heights());
    const geo::XY p{0.2, 0.3}, q{0.6, 0.3};
    for (auto variant : {CurvatureLossVariant::LengthWeighted, CurvatureLossVariant::Uniform}) {
        LossParams params;
        params.variant = variant;
        const auto zero = make_context(m, {{p, q, 0.0}}, params);
        CHECK(curvature_loss(zero, flat.curvatures) < 1e-24);
        const auto single = make_context(m, {{p, q, -0.7}}, params);
        CHECK(curvature_loss(single, flat.curvatures) == doctest::Approx(0.49).epsilon(1e-14));
    }

    // Lengths 0.1 and 0.3 with targets d1, d2 against a flat surface.
    const double d1 = 0.4, d2 = -0.9;
    const std::vector<TargetEdge> two{{{0.2, 0.2}, {0.3, 0.2}, d1}, {{0.2, 0.7}, {0.5, 0.7}, d2}};
    LossParams lw;
    CHECK(curvature_loss(make_context(m, two, lw), flat.curvatures) ==
          doctest::Approx((d1 * d1 + 3 * d2 * d2) / 4).epsilon(1e-12));
    LossParams uni;
    uni.variant = CurvatureLossVariant::Uniform;
    CHECK(curvature_loss(make_context(m, two, uni), flat.curvatures) ==
          doctest::Approx((d1 * d1 + d2 * d2) / 2).epsilon(1e-12));
    const std::vector<TargetEdge> same{{{0.2, 0.2}, {0.3, 0.2}, d1}, {{0.2, 0.7}, {0.5, 0.7}, -d1}};
    CHECK(curvature_loss(make_context(m, same, lw), flat.curvatures) == doctest::Approx(d1 * d1));
    CHECK(curvature_loss(make_context(m, same, uni), flat.curvatures) == doctest::Approx(d1 * d1));

    CHECK(curvature_loss_variant_from_string(to_string(CurvatureLossVariant::Uniform)) ==
          CurvatureLossVariant::Uniform);
    CHECK_THROWS_AS(curvature_loss_variant_from_string("quadratic"), ParseError);
}

TEST_CASE("smoothness loss") {
    const auto flat_mesh = HalfEdgeMesh::grid(12, kDomain);
    // Rounding in the grid coordinates leaves defects near 1e-14; the square root amplifies them.
    CHECK(smoothness_loss(mesh::evaluate_surface(flat_mesh, flat_mesh.heights())) < 1e-10);

    const auto m = HalfEdgeMesh::grid(40, kDomain);
    const auto cap = mesh::init_sphere_cap(m);
    const double smooth = smoothness_loss(mesh::evaluate_surface(m, cap));
    auto noisy = cap;
    std::mt19937_64 rng(8);
    std::normal_distribution<double> nd(0.0, 1e-3);
    for (auto& h : noisy) h += nd(rng);
    const double rough = smoothness_loss(mesh::evaluate_surface(m, noisy));
    CHECK(smooth >= 0.0);
    CHECK(smooth < 1e-3 * rough);

    for (int t = 0; t < 10; ++t) {
        const auto z = random_heights(flat_mesh, 50 + t, 0.05);
        CHECK(smoothness_loss(mesh::evaluate_surface(flat_mesh, z)) >= 0.0);
    }
}

TEST_CASE("loss report identities") {
    const auto toy = fixtures::toy();
    const auto m = HalfEdgeMesh::grid(12, kDomain);
    const auto edges = target_edges(toy.graph, toy.projection);
    LossParams params;
    params.lambda_smooth = 0.01;
    const auto ctx = make_context(m, edges, params);
    const auto z = mesh::init_sphere_cap(m);
    const auto r = evaluate(m, ctx, z);
    CHECK(r.total == doctest::Approx(r.curvature_loss + 0.01 * r.smoothness_loss).epsilon(1e-12));
    CHECK(std::abs(r.total - (r.curvature_loss + 0.01 * r.smoothness_loss)) < 1e-12);
    CHECK(r.ball_sizes.size() == edges.size());
    CHECK(r.gradient.size() == m.vertex_count());
    CHECK(evaluate(m, ctx, z, false).gradient.empty());

    SUBCASE("doubling lambda changes only the smoothness term") {
        params.lambda_smooth = 0.02;
        const auto r2 = evaluate(m, make_context(m, edges, params), z);
        CHECK(r2.curvature_loss == r.curvature_loss);
        CHECK(r2.smoothness_loss == r.smoothness_loss);
        CHECK(r2.total == doctest::Approx(r.curvature_loss + 0.02 * r.smoothness_loss).epsilon(1e-12));
        LossParams no_smooth = params;
        no_smooth.lambda_smooth = 0.0;
        const auto r0 = evaluate(m, make_context(m, edges, no_smooth), z);
        for (std::size_t i = 0; i < z.size(); ++i) {
            // g(2 lambda) - g(lambda) = g(lambda) - g(0)
            CHECK(r2.gradient[i] - r.gradient[i] == doctest::Approx(r.gradient[i] - r0.gradient[i]).epsilon(1e-6));
        }
    }
    SUBCASE("vertical translation invariance") {
        auto shifted = z;
        for (auto& h : shifted) h += 0.37;
        const auto rs = evaluate(m, ctx, shifted, false);
        CHECK(std::abs(rs.curvature_loss - r.curvature_loss) < 1e-10);
        CHECK(std::abs(rs.smoothness_loss - r.smoothness_loss) < 1e-10);
    }
    SUBCASE("missing curvature is rejected") {
        auto bare = toy.graph;
        bare.edges[0].ricci.reset();
        CHECK_THROWS_AS(target_edges(bare, toy.projection), ValidationError);
    }
}

TEST_CASE("flat mesh with zero targets is a stationary point") {
    const auto m = HalfEdgeMesh::grid(10, kDomain);
    const auto ctx = make_context(m, {{{0.2, 0.2}, {0.8, 0.6}, 0.0}, {{0.1, 0.9}, {0.5, 0.5}, 0.0}}, LossParams{});
    const auto r = evaluate(m, ctx, m.heights());
    CHECK(r.total < 1e-12);
    for (double g : r.gradient) CHECK(std::abs(g) < 1e-12);
}

TEST_CASE("gradient matches central differences on the toy graph") {
    const auto toy = fixtures::toy();
    const auto m = HalfEdgeMesh::grid(10, kDomain);
    const auto edges = target_edges(toy.graph, toy.projection);
    for (auto variant : {CurvatureLossVariant::LengthWeighted, CurvatureLossVariant::Uniform}) {
        LossParams params;
        params.variant = variant;
        params.lambda_smooth = 0.05;
        const auto ctx = make_context(m, edges, params);
        for (int t = 0; t < 2; ++t) {
            const auto z = random_heights(m, 900 + t, 0.1);
            const auto r = evaluate(m, ctx, z);
            for (std::size_t ell = 0; ell < z.size(); ++ell) {
                const double numeric = oracle::central_difference(
                    [&](const std::vector<double>& h) { return evaluate(m, ctx, h, false).total; }, z, ell);
                CHECK(oracle::close(r.gradient[ell], numeric));
            }
        }
    }
}
