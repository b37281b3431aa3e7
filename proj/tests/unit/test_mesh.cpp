#include "delayscape/error.hpp"
#include "delayscape/mesh.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

using namespace delayscape;
using namespace delayscape::mesh;

namespace {

const Bounds kDomain{-0.1, -0.1, 1.1, 1.1};

std::vector<double> random_heights(const HalfEdgeMesh& m, std::uint64_t seed, double amplitude = 0.3) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, amplitude);
    std::vector<double> z(m.vertex_count());
    for (auto& h : z) h = u(rng);
    return z;
}

std::vector<double> sphere_heights(const HalfEdgeMesh& m, double radius) {
    std::vector<double> z(m.vertex_count());
    for (std::size_t v = 0; v < z.size(); ++v) {
        const auto& p = m.xy()[v];
        z[v] = std::sqrt(radius * radius - p.x * p.x - p.y * p.y);
    }
    return z;
}

bool away_from_boundary(const HalfEdgeMesh& m, std::size_t v, double margin) {
    const auto& p = m.xy()[v];
    const auto& b = m.bounds();
    return p.x > b.min_x + margin && p.x < b.max_x - margin && p.y > b.min_y + margin && p.y < b.max_y - margin;
}

}  // namespace

TEST_CASE("grid counts and Euler characteristic") {
    CHECK_THROWS_AS(HalfEdgeMesh::grid(1, kDomain), ValidationError);
    for (int k : {2, 3, 4, 7, 30}) {
        const auto m = HalfEdgeMesh::grid(k, kDomain);
        const auto kk = static_cast<std::size_t>(k);
        CHECK(m.vertex_count() == kk * kk);
        CHECK(m.face_count() == 2 * (kk - 1) * (kk - 1));
        CHECK(m.edge_count() == 3 * kk * kk - 4 * kk + 1);
        CHECK(m.boundary_half_edge_count() == 4 * (kk - 1));
        const auto euler = static_cast<long>(m.vertex_count()) - static_cast<long>(m.edge_count()) +
                           static_cast<long>(m.face_count());
        CHECK(euler == 1);
    }
    const auto k2 = HalfEdgeMesh::grid(2, kDomain);
    CHECK(k2.edge_count() == 5);
    const auto k3 = HalfEdgeMesh::grid(3, kDomain);
    CHECK(k3.edge_count() == 16);
}

TEST_CASE("half-edge structure") {
    const auto m = HalfEdgeMesh::grid(5, kDomain);
    const auto& hs = m.half_edges();
    for (std::size_t h = 0; h < hs.size(); ++h) {
        const auto& face = m.faces()[hs[h].face];
        CHECK(face[h % 3] == hs[h].from);
        if (hs[h].twin != kNone) {
            CHECK(hs[hs[h].twin].twin == h);
            CHECK(hs[hs[h].twin].from == hs[h].to);
            CHECK(hs[hs[h].twin].edge == hs[h].edge);
        } else {
            CHECK(m.is_boundary_vertex(hs[h].from));
            CHECK(m.is_boundary_vertex(hs[h].to));
        }
        // Successor map closes each triangle.
        const std::size_t n = *m.nxt(hs[h].from, hs[h].to);
        CHECK(*m.nxt(hs[h].to, n) == hs[h].from);
        CHECK(*m.nxt(n, hs[h].from) == hs[h].to);
    }
    // Counterclockwise orientation on the plane.
    for (const auto& face : m.faces()) {
        const auto& a = m.xy()[face[0]];
        const auto& b = m.xy()[face[1]];
        const auto& c = m.xy()[face[2]];
        CHECK((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y) > 0.0);
    }
    CHECK_FALSE(m.nxt(0, 24).has_value());
    CHECK(m.longest_flat_edge() == doctest::Approx(std::sqrt(2.0) * 1.2 / 4.0));
}

TEST_CASE("point location") {
    const auto m = HalfEdgeMesh::grid(6, kDomain);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-0.1, 1.1);
    for (int t = 0; t < 200; ++t) {
        const geo::XY p{u(rng), u(rng)};
        const auto f = m.locate(p);
        REQUIRE(f.has_value());
        const auto w = m.barycentric(*f, p);
        for (double x : w) CHECK(x >= -1e-12);
        CHECK(w[0] + w[1] + w[2] == doctest::Approx(1.0));
        const auto all = m.faces_containing(p);
        CHECK(std::find(all.begin(), all.end(), *f) != all.end());
    }
    CHECK_FALSE(m.locate({1.2, 0.5}).has_value());
    CHECK(m.faces_containing(m.xy()[m.grid_index(2, 2)]).size() == 6);
    CHECK(m.faces_containing(m.xy()[0]).size() == 2);
    std::vector<double> z(m.vertex_count());
    for (std::size_t v = 0; v < z.size(); ++v) z[v] = 2.0 * m.xy()[v].x - m.xy()[v].y + 0.5;
    CHECK(m.interpolate_height({0.37, 0.81}, z) == doctest::Approx(2.0 * 0.37 - 0.81 + 0.5));
    CHECK_THROWS_AS(m.interpolate_height({2.0, 0.5}, z), GeometryError);
}

TEST_CASE("sphere-cap initialization") {
    const auto m = HalfEdgeMesh::grid(21, kDomain);
    const auto z = init_sphere_cap(m, 0.1);
    const std::size_t center = m.grid_index(10, 10);
    CHECK(z[center] == doctest::Approx(0.12).epsilon(1e-12));
    for (std::size_t v = 0; v < z.size(); ++v) {
        CHECK(z[v] >= 0.0);
        CHECK(z[v] <= z[center]);
    }
    CHECK(z[0] == doctest::Approx(0.0).epsilon(1e-12));
    const auto tiny = init_sphere_cap(m, 1e-9);
    for (double h : tiny) CHECK(h < 1e-9 + 1e-15);
    CHECK_THROWS_AS(init_sphere_cap(m, 0.0), ValidationError);
    CHECK_THROWS_AS(init_sphere_cap(m, 0.6), ValidationError);
}

TEST_CASE("face geometry closed forms") {
    const auto m = HalfEdgeMesh::grid(3, Bounds{0, 0, 2, 2});
    const auto g = face_geometry(m, m.heights());
    // Face 0 is (a, b, c) with the right angle at b: the half-edge c -> a is opposite it.
    CHECK(g.cot[2] == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(g.cot[0] == doctest::Approx(1.0));
    CHECK(g.area[0] == doctest::Approx(0.5));
    CHECK(g.total_area == doctest::Approx(4.0));
    // Center vertex: six incident triangles of area 1/2.
    CHECK(g.vertex_area[m.grid_index(1, 1)] == doctest::Approx(1.0));
    for (std::size_t f = 0; f < m.face_count(); ++f) CHECK(g.normal[f].z > 0.0);

    // Lifting vertex 1 turns face 0 = (0, 1, 3) into an equilateral triangle with sides sqrt(2).
    const auto one = HalfEdgeMesh::grid(2, Bounds{0, 0, 1, 1});
    const auto ge = face_geometry(one, std::vector<double>{0.0, 1.0, 0.0, 0.0});
    for (int c = 0; c < 3; ++c) CHECK(ge.cot[c] == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-12));

    CHECK_NOTHROW(face_geometry(one, std::vector<double>(4, 0.0)));
    CHECK_THROWS_AS(face_geometry(one, std::vector<double>(3, 0.0)), ValidationError);
}

TEST_CASE("Laplacians on the flat grid") {
    const auto m = HalfEdgeMesh::grid(9, kDomain);
    const auto s = evaluate_surface(m, m.heights());
    const auto& ln = s.laplacians.neumann;
    const auto& ld = s.laplacians.dirichlet;
    for (std::size_t i = 0; i < m.vertex_count(); ++i) {
        double row = 0.0;
        for (double v : ln.row_values(i)) row += v;
        CHECK(std::abs(row) < 1e-12);
        for (std::size_t j : ln.row_columns(i)) CHECK(ln.at(i, j) == doctest::Approx(ln.at(j, i)).epsilon(1e-15));
        if (m.is_boundary_vertex(i)) CHECK(ld.row_columns(i).empty());
    }
    std::vector<double> constant(m.vertex_count(), 3.5), linear(m.vertex_count());
    for (std::size_t v = 0; v < linear.size(); ++v) linear[v] = 0.7 * m.xy()[v].x - 1.9 * m.xy()[v].y + 0.2;
    for (double y : ln.multiply(constant)) CHECK(std::abs(y) < 1e-12);
    const auto ll = ln.multiply(linear);
    for (std::size_t v = 0; v < ll.size(); ++v) {
        if (!m.is_boundary_vertex(v)) CHECK(std::abs(ll[v]) < 1e-10);
    }
}

TEST_CASE("Laplacians are symmetric and negative semidefinite on curved meshes") {
    const auto m = HalfEdgeMesh::grid(8, kDomain);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    for (int t = 0; t < 5; ++t) {
        const auto z = random_heights(m, 100 + t, 0.1);
        const auto s = evaluate_surface(m, z);
        for (const auto* l : {&s.laplacians.neumann, &s.laplacians.dirichlet}) {
            for (std::size_t i = 0; i < m.vertex_count(); ++i) {
                for (std::size_t j : l->row_columns(i)) CHECK(l->at(i, j) == l->at(j, i));
            }
            std::vector<double> x(m.vertex_count());
            for (auto& v : x) v = nd(rng);
            CHECK(-l->quadratic_form(x) >= -1e-12);
        }
    }
}

TEST_CASE("curvatures of flat and spherical surfaces") {
    SUBCASE("flat") {
        const auto m = HalfEdgeMesh::grid(12, kDomain);
        const auto s = evaluate_surface(m, m.heights());
        double defect_sum = 0.0;
        for (std::size_t v = 0; v < m.vertex_count(); ++v) {
            if (m.is_boundary_vertex(v)) continue;
            CHECK(std::abs(s.curvatures.gaussian[v]) < 1e-10);
            CHECK(std::abs(s.curvatures.mean[v]) < 1e-10);
            defect_sum += s.curvatures.angle_defect[v];
        }
        CHECK(std::abs(defect_sum) < 1e-12);
    }
    SUBCASE("sphere of radius 10") {
        const auto m = HalfEdgeMesh::grid(40, Bounds{-1, -1, 1, 1});
        const auto s = evaluate_surface(m, sphere_heights(m, 10.0));
        const auto& k = s.curvatures;
        for (std::size_t v = 0; v < m.vertex_count(); ++v) {
            if (!away_from_boundary(m, v, 0.1)) continue;
            CHECK(k.gaussian[v] == doctest::Approx(0.01).epsilon(0.05));
            CHECK(k.mean[v] == doctest::Approx(0.1).epsilon(0.05));
            CHECK(std::abs(k.kplus[v] - k.kminus[v]) < 0.02);
        }
    }
}

TEST_CASE("discrete Gauss-Bonnet") {
    // Interior defects plus boundary turning angles always total 2 pi on a disk.
    const auto m = HalfEdgeMesh::grid(15, kDomain);
    for (int t = 0; t < 3; ++t) {
        const auto s = evaluate_surface(m, random_heights(m, 7 + t));
        double total = 0.0;
        for (double d : s.curvatures.angle_defect) total += d;
        CHECK(total == doctest::Approx(2.0 * std::numbers::pi).epsilon(1e-12));
    }

    // Interior curvature of a spherical patch approaches area / R^2 as the grid refines.
    const double radius = 10.0;
    double patch_area = 0.0;
    const int n = 2000;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double x = -1.0 + (i + 0.5) * 2.0 / n;
            const double y = -1.0 + (j + 0.5) * 2.0 / n;
            patch_area += radius / std::sqrt(radius * radius - x * x - y * y) * (2.0 / n) * (2.0 / n);
        }
    }
    const double target = patch_area / (radius * radius);
    double previous_error = std::numeric_limits<double>::infinity();
    for (int k : {20, 40}) {
        const auto m2 = HalfEdgeMesh::grid(k, Bounds{-1, -1, 1, 1});
        const auto s = evaluate_surface(m2, sphere_heights(m2, radius));
        double integral = 0.0;
        for (std::size_t v = 0; v < m2.vertex_count(); ++v) {
            if (!m2.is_boundary_vertex(v)) integral += s.curvatures.gaussian[v] * s.geometry.vertex_area[v];
        }
        const double error = std::abs(integral - target) / target;
        CHECK(error < previous_error);
        previous_error = error;
    }
    CHECK(previous_error < 0.12);
}

TEST_CASE("principal curvatures satisfy the product identity") {
    const auto m = HalfEdgeMesh::grid(10, kDomain);
    const auto s = evaluate_surface(m, random_heights(m, 77));
    const auto& k = s.curvatures;
    for (std::size_t v = 0; v < m.vertex_count(); ++v) {
        CHECK(k.kplus[v] >= k.kminus[v]);
        CHECK(0.5 * (k.kplus[v] + k.kminus[v]) == doctest::Approx(k.mean[v]).epsilon(1e-12));
        if (!k.clamped[v]) {
            const double scale = std::max(1.0, std::abs(k.gaussian[v]));
            CHECK(std::abs(k.kplus[v] * k.kminus[v] - k.gaussian[v]) < 1e-10 * scale);
        }
    }
}

namespace {

void check_partials_against_differences(const HalfEdgeMesh& m, const std::vector<double>& z,
                                        const std::vector<std::size_t>& ells) {
    const auto state = evaluate_surface(m, z);
    std::size_t checked = 0;
    for (std::size_t ell : ells) {
        const auto p = curvature_partials(m, z, state, ell, true);
        CHECK(p.height_index == ell);
        const double h = 1e-6;
        auto zp = z, zm = z;
        zp[ell] += h;
        zm[ell] -= h;
        const auto sp = evaluate_surface(m, zp);
        const auto sm = evaluate_surface(m, zm);
        auto fd = [&](double plus, double minus) { return (plus - minus) / (2.0 * h); };

        for (const auto& fpart : p.faces) {
            const auto f = fpart.face;
            CHECK(oracle::close(fpart.d_area, fd(sp.geometry.area[f], sm.geometry.area[f])));
            CHECK(oracle::close(fpart.d_normal.x, fd(sp.geometry.normal[f].x, sm.geometry.normal[f].x)));
            CHECK(oracle::close(fpart.d_normal.y, fd(sp.geometry.normal[f].y, sm.geometry.normal[f].y)));
            CHECK(oracle::close(fpart.d_normal.z, fd(sp.geometry.normal[f].z, sm.geometry.normal[f].z)));
            for (int c = 0; c < 3; ++c) {
                CHECK(oracle::close(fpart.d_cot[c], fd(sp.geometry.cot[3 * f + c], sm.geometry.cot[3 * f + c])));
            }
        }
        std::set<std::size_t> ring;
        for (const auto& vp : p.vertices) {
            const auto i = vp.vertex;
            ring.insert(i);
            const auto& kp = sp.curvatures;
            const auto& km = sm.curvatures;
            CHECK(oracle::close(vp.d_vertex_area, fd(sp.geometry.vertex_area[i], sm.geometry.vertex_area[i])));
            CHECK(oracle::close(vp.d_angle_defect, fd(kp.angle_defect[i], km.angle_defect[i])));
            CHECK(oracle::close(vp.d_gaussian, fd(kp.gaussian[i], km.gaussian[i])));
            CHECK(oracle::close(vp.d_mean_normal.x, fd(kp.mean_normal[i].x, km.mean_normal[i].x)));
            CHECK(oracle::close(vp.d_mean_normal.y, fd(kp.mean_normal[i].y, km.mean_normal[i].y)));
            CHECK(oracle::close(vp.d_mean_normal.z, fd(kp.mean_normal[i].z, km.mean_normal[i].z)));
            CHECK(oracle::close(vp.d_vertex_normal.z, fd(kp.vertex_normal[i].z, km.vertex_normal[i].z)));
            // The mean-curvature sign is only differentiable where it is locally constant;
            // single-face corners have a mean normal lying in the face plane.
            const auto side = [&](const VertexCurvatures& k) {
                const double d = dot(k.vertex_normal[i], k.mean_normal[i]);
                return (d > 0.0) - (d < 0.0);
            };
            if (side(kp) != side(km) || side(kp) != side(state.curvatures)) continue;
            CHECK(oracle::close(vp.d_mean, fd(kp.mean[i], km.mean[i])));
            if (!state.curvatures.clamped[i] && !kp.clamped[i] && !km.clamped[i]) {
                CHECK(oracle::close(vp.d_kplus, fd(kp.kplus[i], km.kplus[i])));
                CHECK(oracle::close(vp.d_kminus, fd(kp.kminus[i], km.kminus[i])));
                ++checked;
            }
        }
        // Outside the closed one-ring every vertex quantity is unchanged.
        for (std::size_t i = 0; i < m.vertex_count(); ++i) {
            if (ring.count(i)) continue;
            CHECK(sp.curvatures.gaussian[i] == sm.curvatures.gaussian[i]);
            CHECK(sp.curvatures.kplus[i] == sm.curvatures.kplus[i]);
        }
        for (const auto& lp : p.laplacian) {
            CHECK(oracle::close(lp.d_neumann, fd(sp.laplacians.neumann.at(lp.row, lp.col),
                                                 sm.laplacians.neumann.at(lp.row, lp.col))));
            CHECK(oracle::close(lp.d_dirichlet, fd(sp.laplacians.dirichlet.at(lp.row, lp.col),
                                                   sm.laplacians.dirichlet.at(lp.row, lp.col))));
        }
    }
    CHECK(checked > 0);
}

}  // namespace

TEST_CASE("height partials match central differences") {
    const auto m = HalfEdgeMesh::grid(10, kDomain);
    std::vector<std::size_t> all(m.vertex_count());
    std::iota(all.begin(), all.end(), 0);
    SUBCASE("random heights") {
        for (int t = 0; t < 3; ++t) check_partials_against_differences(m, random_heights(m, 300 + t), all);
    }
    SUBCASE("sphere cap") { check_partials_against_differences(m, init_sphere_cap(m), all); }
}

TEST_CASE("flat-mesh Gaussian partials are finite and match differences") {
    const auto m = HalfEdgeMesh::grid(6, kDomain);
    const auto state = evaluate_surface(m, m.heights());
    for (std::size_t ell = 0; ell < m.vertex_count(); ++ell) {
        const auto p = curvature_partials(m, m.heights(), state, ell);
        for (const auto& vp : p.vertices) {
            CHECK(std::isfinite(vp.d_gaussian));
            const double numeric = oracle::central_difference(
                [&](const std::vector<double>& z) { return evaluate_surface(m, z).curvatures.gaussian[vp.vertex]; },
                m.heights(), ell);
            CHECK(oracle::close(vp.d_gaussian, numeric));
        }
    }
}
