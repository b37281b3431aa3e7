#pragma once

#include "delayscape/geo.hpp"
#include "delayscape/mesh.hpp"
#include "delayscape/netgraph.hpp"
#include "delayscape/vec3.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace delayscape::geodesic {

struct GeodesicResult {
    double length = 0.0;       ///< arc length of `polyline`, normalized units
    std::vector<Vec3> polyline;  ///< starts at the source surface point, ends at the destination
    int subdivision = 0;

    bool operator==(const GeodesicResult&) const = default;
};

/// Surface point above `p` on the piecewise-linear surface with heights `z`.
Vec3 surface_point(const mesh::HalfEdgeMesh& mesh, std::span<const double> z, const geo::XY& p);

/// Shortest path through the Steiner graph: mesh vertices plus, on every edge, the
/// points splitting it into q equal parts for each q <= subdivision + 1, fully connected
/// within each triangle. Level s contains every coarser level, so the length is
/// non-increasing in s. Throws GeometryError for points outside the mesh domain and
/// ValidationError for a negative subdivision.
GeodesicResult surface_geodesic(const mesh::HalfEdgeMesh& mesh, std::span<const double> z, const geo::XY& src,
                                const geo::XY& dst, int subdivision = 4);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    bool with_intercept = false;

    double predict(double distance) const { return slope * distance + intercept; }
    bool operator==(const LinearFit&) const = default;
};

/// Ordinary least squares of rtt on distance, through the origin unless `with_intercept`.
/// r^2 = 1 - SS_res / SS_tot with SS_tot about the mean; r^2 = 0 when SS_tot = 0.
/// Throws ValidationError for fewer than two points or a single distinct distance.
LinearFit fit_latency_predictor(const std::vector<std::pair<double, double>>& samples, bool with_intercept = false);

struct PredictorRow {
    std::string a;  ///< vantage-point id
    std::string b;
    std::string name_a;
    std::string name_b;
    std::optional<double> epsilon_first_appearance;
    double rtt_ms = 0.0;
    double d_gcd_km = 0.0;
    double d_geo = 0.0;  ///< surface units
    double delta_gcd = 0.0;  ///< predicted - observed, ms
    double delta_geo = 0.0;

    bool operator==(const PredictorRow&) const = default;
};

struct PredictorReport {
    LinearFit gcd;
    LinearFit geo;
    std::vector<PredictorRow> rows;
    bool tiv_filtered = false;
    int subdivision = 4;

    bool operator==(const PredictorReport&) const = default;
};

struct PredictorOptions {
    bool with_intercept = false;
    bool tiv_filter = false;
    double tiv_slack_ms = 0.0;
    int subdivision = 4;
    std::vector<double> epsilon_sweep;  ///< ascending; empty leaves first appearances unset
    netgraph::ResidualMode residual_mode = netgraph::ResidualMode::RttMinusTwoGcl;
};

/// Fits both predictors over every measured pair of `matrix` whose endpoints are both
/// vertices of `graph`, and reports per-pair errors. Rows are ordered by (a, b) id.
PredictorReport predictor_report(const netgraph::LatencyMatrix& matrix, const netgraph::DelayGraph& graph,
                                 const mesh::HalfEdgeMesh& mesh,
                                 std::span<const double> z, const geo::Projection& projection,
                                 const PredictorOptions& options);

/// Canonical JSON (fixed key order, 17 significant digits).
std::string to_json(const PredictorReport& report);
/// Aligned columns: epsilon, City A, City B, delta GCD, delta Geo, d GCD.
std::string to_text(const PredictorReport& report);

struct StabilityRow {
    std::string a;
    std::string b;
    double min_ms = 0.0;
    double max_ms = 0.0;
    double range_ms = 0.0;

    bool operator==(const StabilityRow&) const = default;
};

struct StabilityReport {
    std::size_t snapshots = 0;
    std::vector<StabilityRow> rows;

    bool operator==(const StabilityReport&) const = default;
};

/// Min, max and range of each pair's fitted geodesic latency across snapshots.
/// Pairs missing from any snapshot are skipped.
StabilityReport stability_from_predictions(const std::vector<std::map<std::pair<std::string, std::string>, double>>& runs);

std::string to_json(const StabilityReport& report);
std::string to_text(const StabilityReport& report);

}  // namespace delayscape::geodesic
