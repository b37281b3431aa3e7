#pragma once

#include "delayscape/artifact.hpp"
#include "delayscape/geo.hpp"
#include "delayscape/geodesic.hpp"
#include "delayscape/loss.hpp"
#include "delayscape/netgraph.hpp"
#include "delayscape/optimize.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace delayscape::pipeline {

struct PipelineConfig {
    std::vector<std::filesystem::path> inputs;  ///< merged by per-pair minimum
    netgraph::ResidualMode residual_mode = netgraph::ResidualMode::RttMinusTwoGcl;
    std::vector<double> epsilons{10.0};  ///< ascending threshold sweep, ms
    std::optional<double> cluster_cutoff_km;
    bool tiv_filter = false;
    double tiv_slack_ms = 0.0;
    int mesh_k = 30;
    geo::ProjectionKind projection = geo::ProjectionKind::WebMercator;
    std::vector<double> lambdas{0.001};
    std::optional<double> ball_radius;
    double apex_fraction = 0.1;
    loss::CurvatureLossVariant variant = loss::CurvatureLossVariant::LengthWeighted;
    optimize::OptimizeConfig optimizer;
    bool subtract_initial = false;
    bool flatten_exterior = false;
    std::optional<double> flatten_falloff;  ///< defaults to twice the ball radius
    bool reports = true;
    int geodesic_subdivision = 4;
    bool predictor_intercept = false;
    std::filesystem::path output_dir = "out";
    std::string created = "1970-01-01T00:00:00Z";
    std::uint64_t seed = 0;  ///< consumed by fixture generators only

    /// Throws ValidationError.
    void validate() const;
};

/// Measurements after ingest, optional TIV removal and clustering, plus the shared projection.
struct PreparedInput {
    netgraph::LatencyMatrix matrix;     ///< as measured
    netgraph::LatencyMatrix reduced;    ///< after TIV removal and clustering
    geo::Projection projection;
};

/// Stage names carried by StageError.
namespace stage {
inline constexpr const char* kIngest = "ingest";
inline constexpr const char* kTiv = "tiv";
inline constexpr const char* kCluster = "cluster";
inline constexpr const char* kThreshold = "threshold";
inline constexpr const char* kRicci = "ricci";
inline constexpr const char* kMesh = "mesh";
inline constexpr const char* kOptimize = "optimize";
inline constexpr const char* kPostProcess = "post-process";
inline constexpr const char* kReport = "report";
}  // namespace stage

/// Loads and merges the configured inputs; an input without measurements is an error.
netgraph::LatencyMatrix ingest(const PipelineConfig& config);

PreparedInput prepare(netgraph::LatencyMatrix matrix, const PipelineConfig& config);

/// Thresholded graph at `epsilon_ms` with Ricci curvature and first appearance over the sweep.
netgraph::DelayGraph build_graph(const PreparedInput& input, double epsilon_ms, const PipelineConfig& config);

/// Graph with projected vertex positions, as stored in artifacts.
artifact::GraphData graph_data(const PreparedInput& input, const netgraph::DelayGraph& graph);

/// One manifold for one (epsilon, lambda) sweep point.
artifact::ManifoldArtifact build_manifold(const PreparedInput& input, double epsilon_ms, double lambda_smooth,
                                          const PipelineConfig& config);

/// Every (epsilon, lambda) combination, epsilon-major. Errors are rethrown as StageError.
std::vector<artifact::ManifoldArtifact> run_pipeline(const PipelineConfig& config);
std::vector<artifact::ManifoldArtifact> run_pipeline(netgraph::LatencyMatrix matrix, const PipelineConfig& config);

/// Exports each artifact as `<dir>/<id>.json`; returns the written paths.
std::vector<std::filesystem::path> write_artifacts(const std::vector<artifact::ManifoldArtifact>& artifacts,
                                                   const std::filesystem::path& dir);

/// Runs the first sweep point per snapshot and records each pair's fitted geodesic latency.
/// Throws ValidationError for fewer than two snapshots or differing vantage-point sets.
geodesic::StabilityReport stability_report(const std::vector<netgraph::LatencyMatrix>& snapshots,
                                           const PipelineConfig& config);

}  // namespace delayscape::pipeline
