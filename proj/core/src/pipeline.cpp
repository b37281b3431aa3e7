#include "delayscape/pipeline.hpp"

#include "delayscape/error.hpp"
#include "delayscape/mesh.hpp"
#include "delayscape/ricci.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace delayscape::pipeline {

namespace {

inline constexpr const char* kGenerator = "delayscape 0.1.0";

template <typename F>
auto in_stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(name, e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        throw StageError(name, e.what());
    }
}

void merge_into(netgraph::LatencyMatrix& into, const netgraph::LatencyMatrix& from, const std::string& source) {
    if (into.points() != from.points()) {
        throw ValidationError("'" + source + "' lists different vantage points than the first input");
    }
    for (const auto& [key, rtt] : from.pairs()) into.add_measurement(key.first, key.second, rtt);
}

}  // namespace

void PipelineConfig::validate() const {
    if (epsilons.empty()) throw ValidationError("epsilon list must not be empty");
    for (const double e : epsilons) {
        if (!(e >= 0.0)) throw ValidationError("epsilon values must be >= 0");
    }
    if (!std::is_sorted(epsilons.begin(), epsilons.end()) ||
        std::adjacent_find(epsilons.begin(), epsilons.end()) != epsilons.end()) {
        throw ValidationError("epsilon list must be strictly ascending");
    }
    if (lambdas.empty()) throw ValidationError("lambda list must not be empty");
    for (const double l : lambdas) {
        if (!(l >= 0.0) || !std::isfinite(l)) throw ValidationError("lambda_smooth values must be finite and >= 0");
    }
    if (mesh_k < 2) throw ValidationError("mesh k must be >= 2");
    if (cluster_cutoff_km && !(*cluster_cutoff_km >= 0.0)) throw ValidationError("cluster cutoff must be >= 0");
    if (!(tiv_slack_ms >= 0.0)) throw ValidationError("TIV slack must be >= 0");
    if (ball_radius && !(*ball_radius > 0.0)) throw ValidationError("ball radius must be positive");
    if (!(apex_fraction > 0.0 && apex_fraction <= 0.5)) throw ValidationError("apex fraction must lie in (0, 0.5]");
    if (flatten_falloff && !(*flatten_falloff > 0.0)) throw ValidationError("flatten falloff must be positive");
    if (geodesic_subdivision < 0) throw ValidationError("geodesic subdivision must be >= 0");
    optimizer.validate();
}

netgraph::LatencyMatrix ingest(const PipelineConfig& config) {
    return in_stage(stage::kIngest, [&] {
        if (config.inputs.empty()) throw ValidationError("no input files configured");
        auto matrix = netgraph::load_measurements(config.inputs.front());
        for (std::size_t i = 1; i < config.inputs.size(); ++i) {
            merge_into(matrix, netgraph::load_measurements(config.inputs[i]), config.inputs[i].string());
        }
        if (matrix.pair_count() == 0) throw ValidationError("input contains no measurements");
        return matrix;
    });
}

PreparedInput prepare(netgraph::LatencyMatrix matrix, const PipelineConfig& config) {
    in_stage(stage::kIngest, [&] {
        config.validate();
        if (matrix.pair_count() == 0) throw ValidationError("input contains no measurements");
    });
    PreparedInput out;
    out.matrix = std::move(matrix);
    out.reduced = out.matrix;
    if (config.tiv_filter) {
        out.reduced = in_stage(stage::kTiv, [&] { return netgraph::remove_tiv_pairs(out.reduced, config.tiv_slack_ms); });
    }
    if (config.cluster_cutoff_km) {
        out.reduced = in_stage(stage::kCluster,
                               [&] { return netgraph::cluster_vantage_points(out.reduced, *config.cluster_cutoff_km); });
    }
    out.projection = in_stage(stage::kMesh, [&] {
        std::vector<geo::GeoPoint> locations;
        for (const auto& p : out.reduced.points()) locations.push_back(p.location);
        return geo::Projection::fit(locations, config.projection);
    });
    return out;
}

netgraph::DelayGraph build_graph(const PreparedInput& input, double epsilon_ms, const PipelineConfig& config) {
    auto graph = in_stage(stage::kThreshold, [&] {
        auto g = netgraph::threshold_graph(input.reduced, epsilon_ms, config.residual_mode);
        for (auto& e : g.edges) e.epsilon_first_appearance = netgraph::first_appearance(e.residual_ms, config.epsilons);
        return g;
    });
    return in_stage(stage::kRicci, [&] { return ricci::curvature_graph(graph); });
}

artifact::GraphData graph_data(const PreparedInput& input, const netgraph::DelayGraph& graph) {
    artifact::GraphData g;
    g.epsilon_ms = graph.epsilon_ms;
    g.residual_mode = graph.mode;
    for (const auto& v : graph.vertices) {
        g.vertices.push_back({v.id, v.name, v.location.lat, v.location.lon, input.projection.project(v.location)});
    }
    g.edges = graph.edges;
    return g;
}

artifact::ManifoldArtifact build_manifold(const PreparedInput& input, double epsilon_ms, double lambda_smooth,
                                          const PipelineConfig& config) {
    const auto graph = build_graph(input, epsilon_ms, config);

    const auto m = in_stage(stage::kMesh, [&] {
        const double lo = input.projection.domain_min();
        const double hi = input.projection.domain_max();
        return mesh::HalfEdgeMesh::grid(config.mesh_k, {lo, lo, hi, hi});
    });
    loss::LossParams params;
    params.epsilon_ms = epsilon_ms;
    params.lambda_smooth = lambda_smooth;
    params.ball_radius = config.ball_radius;
    params.variant = config.variant;
    const auto context = in_stage(stage::kMesh, [&] {
        return loss::make_context(m, loss::target_edges(graph, input.projection), params);
    });
    const auto initial = in_stage(stage::kMesh, [&] { return mesh::init_sphere_cap(m, config.apex_fraction); });

    artifact::ManifoldArtifact a;
    auto& summary = a.metadata.optimization;
    const auto result = in_stage(stage::kOptimize, [&] {
        summary.initial_loss = loss::evaluate(m, context, initial, false).total;
        return optimize::optimize_heights(m, context, initial, config.optimizer);
    });
    summary.loss_history = result.loss_history;
    summary.termination = result.termination;
    summary.iterations = result.iterations;
    summary.final_loss = result.final_loss;
    summary.gradient_inf_norm = result.gradient_inf_norm;

    const double falloff = config.flatten_falloff.value_or(2.0 * context.radius);
    auto heights = in_stage(stage::kPostProcess, [&] {
        const auto final_report = loss::evaluate(m, context, result.heights, false);
        summary.curvature_loss = final_report.curvature_loss;
        summary.smoothness_loss = final_report.smoothness_loss;
        a.mesh.gaussian_curvature = mesh::evaluate_surface(m, result.heights).curvatures.gaussian;
        auto z = result.heights;
        if (config.subtract_initial) z = optimize::subtract_initial_heights(z, initial);
        if (config.flatten_exterior) {
            z = optimize::flatten_exterior(m, z, optimize::component_hulls(graph, input.projection), falloff);
        }
        return z;
    });

    auto& s = a.metadata.settings;
    for (const auto& in : config.inputs) s.inputs.push_back(in.generic_string());
    s.residual_mode = config.residual_mode;
    s.epsilon_sweep = config.epsilons;
    s.epsilon_ms = epsilon_ms;
    s.lambda_smooth = lambda_smooth;
    s.ball_radius = context.radius;
    s.cluster_cutoff_km = config.cluster_cutoff_km;
    s.tiv_filter = config.tiv_filter;
    s.tiv_slack_ms = config.tiv_slack_ms;
    s.mesh_k = config.mesh_k;
    s.projection = config.projection;
    s.apex_fraction = config.apex_fraction;
    s.variant = config.variant;
    s.optimizer = config.optimizer;
    s.subtract_initial = config.subtract_initial;
    s.flatten_exterior = config.flatten_exterior;
    s.flatten_falloff = falloff;
    s.geodesic_subdivision = config.geodesic_subdivision;
    s.predictor_intercept = config.predictor_intercept;
    a.metadata.id = artifact::make_id(epsilon_ms, lambda_smooth);
    a.metadata.created = config.created;
    a.metadata.generator = kGenerator;
    a.metadata.clamped_residuals = graph.clamped_residuals;

    a.projection = input.projection;
    a.mesh.k = m.k();
    a.mesh.bounds = m.bounds();
    a.mesh.vertex_xy = m.xy();
    a.mesh.faces = m.faces();
    a.mesh.vertex_z = heights;
    a.graph = graph_data(input, graph);

    if (config.reports) {
        a.report = in_stage(stage::kReport, [&] {
            geodesic::PredictorOptions opt;
            opt.with_intercept = config.predictor_intercept;
            opt.subdivision = config.geodesic_subdivision;
            opt.epsilon_sweep = config.epsilons;
            opt.residual_mode = config.residual_mode;
            return geodesic::predictor_report(input.reduced, graph, m, heights, input.projection, opt);
        });
    }
    in_stage(stage::kReport, [&] { artifact::validate(a); });
    return a;
}

std::vector<artifact::ManifoldArtifact> run_pipeline(netgraph::LatencyMatrix matrix, const PipelineConfig& config) {
    const auto input = prepare(std::move(matrix), config);
    std::vector<artifact::ManifoldArtifact> out;
    for (const double eps : config.epsilons) {
        for (const double lambda : config.lambdas) out.push_back(build_manifold(input, eps, lambda, config));
    }
    return out;
}

std::vector<artifact::ManifoldArtifact> run_pipeline(const PipelineConfig& config) {
    in_stage(stage::kIngest, [&] { config.validate(); });
    return run_pipeline(ingest(config), config);
}

std::vector<std::filesystem::path> write_artifacts(const std::vector<artifact::ManifoldArtifact>& artifacts,
                                                   const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> paths;
    for (const auto& a : artifacts) {
        paths.push_back(dir / (a.metadata.id + ".json"));
        artifact::export_manifold(a, paths.back());
    }
    return paths;
}

geodesic::StabilityReport stability_report(const std::vector<netgraph::LatencyMatrix>& snapshots,
                                           const PipelineConfig& config) {
    if (snapshots.size() < 2) throw ValidationError("stability needs at least two snapshots");
    for (std::size_t i = 1; i < snapshots.size(); ++i) {
        if (snapshots[i].points() != snapshots.front().points()) {
            throw ValidationError("snapshot " + std::to_string(i) + " lists different vantage points");
        }
    }
    PipelineConfig single = config;
    single.epsilons = {config.epsilons.front()};
    single.lambdas = {config.lambdas.front()};
    single.reports = true;

    std::vector<std::map<std::pair<std::string, std::string>, double>> runs;
    for (const auto& snapshot : snapshots) {
        const auto input = prepare(snapshot, single);
        const auto a = build_manifold(input, single.epsilons.front(), single.lambdas.front(), single);
        auto& run = runs.emplace_back();
        for (const auto& row : a.report->rows) run[{row.a, row.b}] = a.report->geo.predict(row.d_geo);
    }
    return geodesic::stability_from_predictions(runs);
}

}  // namespace delayscape::pipeline
