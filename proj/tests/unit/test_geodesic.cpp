#include "delayscape/error.hpp"
#include "delayscape/geodesic.hpp"
#include "delayscape/mesh.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace delayscape;
using namespace delayscape::geodesic;

namespace {

const mesh::Bounds kUnit{0.0, 0.0, 1.0, 1.0};
const mesh::Bounds kDomain{-0.1, -0.1, 1.1, 1.1};

/// Two Gaussian bumps and a dip; smooth, far from flat.
std::vector<double> bumpy(const mesh::HalfEdgeMesh& m) {
    std::vector<double> z(m.vertex_count());
    for (std::size_t v = 0; v < z.size(); ++v) {
        const auto [x, y] = m.xy()[v];
        auto g = [&](double cx, double cy, double s) {
            return std::exp(-((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (2 * s * s));
        };
        z[v] = 0.3 * g(0.3, 0.3, 0.12) + 0.25 * g(0.7, 0.6, 0.15) - 0.2 * g(0.5, 0.8, 0.1);
    }
    return z;
}

double planar(const geo::XY& a, const geo::XY& b) { return std::hypot(a.x - b.x, a.y - b.y); }

}  // namespace

TEST_CASE("flat mesh geodesics") {
    const auto m = mesh::HalfEdgeMesh::grid(11, kUnit);
    const std::vector<double> z(m.vertex_count(), 0.0);

    SUBCASE("corner to corner is the diagonal") {
        // Along the split diagonal the path is exact at every subdivision.
        const auto r = surface_geodesic(m, z, {0, 0}, {1, 1}, 4);
        CHECK(r.length == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
        CHECK(r.subdivision == 4);
    }
    SUBCASE("anti-diagonal converges from above") {
        const double exact = std::sqrt(2.0);
        double prev = std::numeric_limits<double>::infinity();
        for (int s : {0, 1, 2, 4, 8}) {
            const double len = surface_geodesic(m, z, {1, 0}, {0, 1}, s).length;
            CHECK(len >= exact - 1e-12);
            CHECK(len <= prev + 1e-12);
            prev = len;
        }
        // The straight path crosses each cell split at its midpoint, a Steiner point from s = 1 on.
        CHECK(surface_geodesic(m, z, {1, 0}, {0, 1}, 4).length == doctest::Approx(exact).epsilon(1e-12));
        // s = 0 walks grid edges and diagonals only.
        CHECK(surface_geodesic(m, z, {1, 0}, {0, 1}, 0).length == doctest::Approx(2.0).epsilon(1e-12));
    }
    SUBCASE("off-axis chord converges from above") {
        const geo::XY a{0.03, 0.11};
        const geo::XY b{0.97, 0.64};
        double prev = std::numeric_limits<double>::infinity();
        for (int s = 0; s <= 6; ++s) {
            const double len = surface_geodesic(m, z, a, b, s).length;
            CHECK(len >= planar(a, b) - 1e-12);
            CHECK(len <= prev + 1e-12);
            prev = len;
        }
        CHECK(prev <= planar(a, b) * 1.01);
    }
    SUBCASE("interior points inside one face connect directly") {
        const geo::XY a{0.02, 0.01};
        const geo::XY b{0.08, 0.03};
        const auto r = surface_geodesic(m, z, a, b, 0);
        CHECK(r.length == doctest::Approx(planar(a, b)).epsilon(1e-12));
        CHECK(r.polyline.size() == 2);
    }
}

TEST_CASE("geodesic result invariants") {
    const auto m = mesh::HalfEdgeMesh::grid(15, kDomain);
    const auto z = bumpy(m);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-0.1, 1.1);
    for (int trial = 0; trial < 10; ++trial) {
        const geo::XY a{u(rng), u(rng)};
        const geo::XY b{u(rng), u(rng)};
        const auto ab = surface_geodesic(m, z, a, b, 3);
        const auto ba = surface_geodesic(m, z, b, a, 3);
        double arc = 0.0;
        for (std::size_t i = 1; i < ab.polyline.size(); ++i) arc += norm(ab.polyline[i] - ab.polyline[i - 1]);
        CHECK(std::abs(ab.length - arc) <= 1e-12);
        CHECK(ab.polyline.front() == surface_point(m, z, a));
        CHECK(ab.polyline.back() == surface_point(m, z, b));
        CHECK(std::abs(ab.length - ba.length) <= 1e-9);
        CHECK(ab.length >= planar(a, b) - 1e-12);
        const double s0 = surface_geodesic(m, z, a, b, 0).length;
        CHECK(ab.length <= s0 + 1e-12);
    }
}

TEST_CASE("geodesic edge cases") {
    const auto m = mesh::HalfEdgeMesh::grid(6, kDomain);
    const auto z = bumpy(m);
    const auto same = surface_geodesic(m, z, {0.4, 0.4}, {0.4, 0.4});
    CHECK(same.length == 0.0);
    CHECK(same.polyline.size() == 1);
    CHECK_THROWS_AS(surface_geodesic(m, z, {0.4, 0.4}, {1.5, 0.4}), GeometryError);
    CHECK_THROWS_AS(surface_geodesic(m, z, {-0.2, 0.4}, {0.4, 0.4}), GeometryError);
    CHECK_THROWS_AS(surface_geodesic(m, z, {0.1, 0.4}, {0.4, 0.4}, -1), ValidationError);
    // Mesh vertex to mesh vertex on a shared edge.
    const geo::XY a = m.xy()[m.grid_index(2, 2)];
    const geo::XY b = m.xy()[m.grid_index(3, 2)];
    const auto r = surface_geodesic(m, z, a, b, 2);
    CHECK(r.length == doctest::Approx(norm(m.position(m.grid_index(3, 2), z) - m.position(m.grid_index(2, 2), z))));
}

TEST_CASE("latency predictor regression") {
    SUBCASE("three-point closed form with intercept") {
        const auto fit = fit_latency_predictor({{1, 2.1}, {2, 3.9}, {3, 6.0}}, true);
        CHECK(fit.slope == doctest::Approx(1.95).epsilon(1e-12));
        CHECK(fit.intercept == doctest::Approx(0.1).epsilon(1e-12));
        CHECK(fit.r2 == doctest::Approx(1.0 - 0.015 / 7.62).epsilon(1e-12));
    }
    SUBCASE("three-point closed form through the origin") {
        const auto fit = fit_latency_predictor({{1, 2.1}, {2, 3.9}, {3, 6.0}});
        CHECK(fit.slope == doctest::Approx(27.9 / 14.0).epsilon(1e-12));
        CHECK(fit.intercept == 0.0);
        CHECK_FALSE(fit.with_intercept);
    }
    SUBCASE("exactly linear data") {
        std::vector<std::pair<double, double>> through, affine;
        for (int i = 1; i <= 12; ++i) {
            through.emplace_back(i * 0.37, 2.5 * i * 0.37);
            affine.emplace_back(i * 0.37, 2.5 * i * 0.37 + 4.0);
        }
        CHECK(std::abs(fit_latency_predictor(through).r2 - 1.0) <= 1e-12);
        CHECK(std::abs(fit_latency_predictor(affine, true).r2 - 1.0) <= 1e-12);
    }
    SUBCASE("constant rtt with intercept") {
        const auto fit = fit_latency_predictor({{1, 5}, {2, 5}, {4, 5}}, true);
        CHECK(fit.slope == doctest::Approx(0.0).epsilon(1e-15));
        CHECK(fit.r2 == 0.0);
    }
    SUBCASE("through-origin r2 can be negative") {
        const auto fit = fit_latency_predictor({{1, 10}, {2, 9}, {3, 8}});
        CHECK(fit.r2 < 0.0);
    }
    SUBCASE("degenerate inputs") {
        CHECK_THROWS_AS(fit_latency_predictor({{1, 2}}), ValidationError);
        CHECK_THROWS_AS(fit_latency_predictor({{2, 2}, {2, 3}, {2, 4}}), ValidationError);
        CHECK_THROWS_AS(fit_latency_predictor({}), ValidationError);
    }
}

namespace {

/// Vantage points on the equator, where equirectangular distance is exact.
netgraph::LatencyMatrix equator() {
    std::vector<netgraph::VantagePoint> pts;
    const double lons[] = {0.0, 3.0, 7.0, 12.0, 20.0};
    for (int i = 0; i < 5; ++i) {
        pts.push_back({"p" + std::to_string(i), "Point" + std::to_string(i), geo::make_point(0.0, lons[i])});
    }
    netgraph::LatencyMatrix m(pts);
    const double extra[] = {3.0, 7.5, 1.0, 4.0, 9.0, 2.0, 0.5, 6.0, 3.5, 8.0};
    int n = 0;
    for (std::size_t a = 0; a < 5; ++a) {
        for (std::size_t b = a + 1; b < 5; ++b) {
            const double gcl = geo::great_circle_latency(pts[a].location, pts[b].location);
            m.add_measurement(a, b, 2 * gcl + extra[n++]);
        }
    }
    return m;
}

}  // namespace

TEST_CASE("predictor report on a flat equatorial mesh matches the GCD fit") {
    const auto matrix = equator();
    const auto graph = netgraph::threshold_graph(matrix, std::numeric_limits<double>::infinity());
    std::vector<geo::GeoPoint> locs;
    for (const auto& p : matrix.points()) locs.push_back(p.location);
    const auto proj = geo::Projection::fit(locs, geo::ProjectionKind::Equirectangular);
    // Odd k puts a grid row on y = 0.5, so equatorial paths run along mesh edges.
    const auto m = mesh::HalfEdgeMesh::grid(25, kDomain);
    const std::vector<double> z(m.vertex_count(), 0.0);

    PredictorOptions opt;
    opt.epsilon_sweep = {2, 4, 6, 8, 10};
    const auto report = predictor_report(matrix, graph, m, z, proj, opt);
    REQUIRE(report.rows.size() == 10);
    for (const auto& row : report.rows) {
        CHECK(row.delta_geo == doctest::Approx(row.delta_gcd).epsilon(1e-6));
        CHECK(row.delta_gcd == doctest::Approx(report.gcd.predict(row.d_gcd_km) - row.rtt_ms));
    }
    CHECK(report.geo.r2 == doctest::Approx(report.gcd.r2).epsilon(1e-6));
    // Residual = extra latency above 2 GCL.
    CHECK(report.rows[0].epsilon_first_appearance == 4.0);   // p0-p1: 3.0
    CHECK(report.rows[1].epsilon_first_appearance == 8.0);   // p0-p2: 7.5
    CHECK(report.rows[4].epsilon_first_appearance == 10.0);  // p1-p2: 9.0

    SUBCASE("serialization") {
        const auto json = to_json(report);
        CHECK(json.find("\"delta_geo\"") != std::string::npos);
        const auto text = to_text(report);
        const auto header = text.substr(0, text.find('\n'));
        CHECK(header.find("eps") < header.find("City A"));
        CHECK(header.find("City A") < header.find("City B"));
        CHECK(header.find("City B") < header.find("delta_GCD"));
        CHECK(header.find("delta_GCD") < header.find("delta_Geo"));
        CHECK(header.find("delta_Geo") < header.find("d_GCD"));
        CHECK(text.find("Point0") != std::string::npos);
    }
    SUBCASE("single evaluated pair cannot be fitted") {
        netgraph::LatencyMatrix two({matrix.points()[0], matrix.points()[1]});
        two.add_measurement(0, 1, 50.0);
        const auto g2 = netgraph::threshold_graph(two, std::numeric_limits<double>::infinity());
        CHECK_THROWS_AS(predictor_report(two, g2, m, z, proj, {}), ValidationError);
    }
}

TEST_CASE("reference table row format") {
    PredictorReport report;
    report.rows.push_back({"a", "b", "Detroit", "Pittsburgh", 10.0, 20.0, 349.9, 0.1, 4.7, 1.4});
    const auto text = to_text(report);
    CHECK(text.find("10.0  Detroit  Pittsburgh        4.7        1.4  349.9") != std::string::npos);
}

TEST_CASE("stability from per-snapshot predictions") {
    using Run = std::map<std::pair<std::string, std::string>, double>;
    const Run r1{{{"a", "b"}, 10.0}, {{"a", "c"}, 5.0}};
    const Run r2{{{"a", "b"}, 12.5}, {{"a", "c"}, 5.0}};
    const Run r3{{{"a", "b"}, 11.0}};
    const auto report = stability_from_predictions({r1, r2, r3});
    REQUIRE(report.rows.size() == 1);
    CHECK(report.rows[0].min_ms == 10.0);
    CHECK(report.rows[0].max_ms == 12.5);
    CHECK(report.rows[0].range_ms == 2.5);
    CHECK(report.snapshots == 3);
    const auto same = stability_from_predictions({r1, r1});
    for (const auto& row : same.rows) CHECK(row.range_ms == 0.0);
    CHECK(to_text(report).find("range_ms") != std::string::npos);
}
