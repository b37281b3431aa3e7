#pragma once

#include "delayscape/geo.hpp"
#include "delayscape/geodesic.hpp"
#include "delayscape/loss.hpp"
#include "delayscape/mesh.hpp"
#include "delayscape/netgraph.hpp"
#include "delayscape/optimize.hpp"

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace delayscape::artifact {

inline constexpr int kSchemaVersion = 1;

/// Effective settings of one sweep point, echoed into the artifact.
struct RunSettings {
    std::vector<std::string> inputs;
    netgraph::ResidualMode residual_mode = netgraph::ResidualMode::RttMinusTwoGcl;
    std::vector<double> epsilon_sweep;
    double epsilon_ms = 0.0;
    double lambda_smooth = 0.001;
    double ball_radius = 0.0;
    std::optional<double> cluster_cutoff_km;
    bool tiv_filter = false;
    double tiv_slack_ms = 0.0;
    int mesh_k = 30;
    geo::ProjectionKind projection = geo::ProjectionKind::WebMercator;
    double apex_fraction = 0.1;
    loss::CurvatureLossVariant variant = loss::CurvatureLossVariant::LengthWeighted;
    optimize::OptimizeConfig optimizer;
    bool subtract_initial = false;
    bool flatten_exterior = false;
    double flatten_falloff = 0.0;
    int geodesic_subdivision = 4;
    bool predictor_intercept = false;

    bool operator==(const RunSettings&) const = default;
};

struct OptimizationSummary {
    std::vector<double> loss_history;
    optimize::Termination termination = optimize::Termination::MaxIterations;
    int iterations = 0;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    double curvature_loss = 0.0;
    double smoothness_loss = 0.0;
    double gradient_inf_norm = 0.0;

    bool operator==(const OptimizationSummary&) const = default;
};

struct Metadata {
    std::string id;
    std::string created;  ///< caller-supplied; never the wall clock, so exports stay reproducible
    std::string generator;
    RunSettings settings;
    OptimizationSummary optimization;
    std::size_t clamped_residuals = 0;

    bool operator==(const Metadata&) const = default;
};

struct MeshData {
    int k = 0;
    mesh::Bounds bounds;
    std::vector<geo::XY> vertex_xy;
    std::vector<double> vertex_z;
    std::vector<std::array<std::size_t, 3>> faces;
    std::vector<double> gaussian_curvature;  ///< per vertex, of the optimized surface

    bool operator==(const MeshData&) const = default;
};

struct GraphVertex {
    std::string id;
    std::string name;
    double lat = 0.0;
    double lon = 0.0;
    geo::XY xy;

    bool operator==(const GraphVertex&) const = default;
};

struct GraphData {
    double epsilon_ms = 0.0;
    netgraph::ResidualMode residual_mode = netgraph::ResidualMode::RttMinusTwoGcl;
    std::vector<GraphVertex> vertices;
    std::vector<netgraph::GraphEdge> edges;  ///< indices into `vertices`

    std::optional<std::size_t> vertex_index(std::string_view id) const;
    bool operator==(const GraphData&) const = default;
};

struct ManifoldArtifact {
    Metadata metadata;
    MeshData mesh;
    GraphData graph;
    geo::Projection projection;
    std::optional<geodesic::PredictorReport> report;

    bool operator==(const ManifoldArtifact&) const = default;
};

/// Checks structural invariants; throws ValidationError naming the offending JSON pointer.
void validate(const ManifoldArtifact& artifact);

/// Canonical JSON: fixed key order, one-space indentation, 17 significant digits.
std::string to_json(const ManifoldArtifact& artifact);
/// Throws ParseError for malformed or schema-violating text and ValidationError for
/// broken invariants. Nothing is returned on failure.
ManifoldArtifact from_json(std::string_view text);

/// Canonical JSON of a graph alone, in the artifact's `/graph` layout.
std::string to_json(const GraphData& graph);

/// Writes atomically via a sibling temporary file.
void export_manifold(const ManifoldArtifact& artifact, const std::filesystem::path& path);
ManifoldArtifact import_manifold(const std::filesystem::path& path);

/// Rebuilds the grid mesh with the artifact's heights; throws ValidationError when the
/// stored vertices or faces differ from the regular grid.
mesh::HalfEdgeMesh rebuild_mesh(const ManifoldArtifact& artifact);

/// File-name-safe identifier for a sweep point, e.g. "eps-10_lambda-0.001".
std::string make_id(double epsilon_ms, double lambda_smooth);

}  // namespace delayscape::artifact
