#include "delayscape/artifact.hpp"
#include "delayscape/error.hpp"
#include "delayscape/fetch.hpp"
#include "delayscape/geodesic.hpp"
#include "delayscape/pipeline.hpp"
#include "delayscape/ricci.hpp"
#include "delayscape/service.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

using namespace delayscape;
namespace fs = std::filesystem;

namespace {

/// Flag values before conversion into a PipelineConfig.
struct PipelineFlags {
    std::vector<std::string> inputs;
    std::string residual_mode = "rtt-minus-2gcl";
    std::vector<double> epsilons{10.0};
    std::optional<double> cluster_cutoff_km;
    bool tiv_filter = false;
    double tiv_slack_ms = 0.0;
    int mesh_k = 30;
    std::string projection = "web-mercator";
    std::vector<double> lambdas{0.001};
    std::optional<double> ball_radius;
    double apex_fraction = 0.1;
    std::string variant = "length-weighted";
    int max_iterations = 2000;
    double gradient_tolerance = 1e-6;
    double relative_loss_tolerance = 1e-9;
    int lbfgs_memory = 10;
    bool subtract_initial = false;
    bool flatten_exterior = false;
    std::optional<double> flatten_falloff;
    bool no_reports = false;
    int geodesic_subdivision = 4;
    bool predictor_intercept = false;
    std::string output_dir = "out";
    std::string created = "1970-01-01T00:00:00Z";
    std::uint64_t seed = 0;

    pipeline::PipelineConfig config() const {
        pipeline::PipelineConfig c;
        c.inputs.assign(inputs.begin(), inputs.end());
        c.residual_mode = netgraph::residual_mode_from_string(residual_mode);
        c.epsilons = epsilons;
        c.cluster_cutoff_km = cluster_cutoff_km;
        c.tiv_filter = tiv_filter;
        c.tiv_slack_ms = tiv_slack_ms;
        c.mesh_k = mesh_k;
        c.projection = geo::projection_kind_from_string(projection);
        c.lambdas = lambdas;
        c.ball_radius = ball_radius;
        c.apex_fraction = apex_fraction;
        c.variant = loss::curvature_loss_variant_from_string(variant);
        c.optimizer.max_iterations = max_iterations;
        c.optimizer.gradient_tolerance = gradient_tolerance;
        c.optimizer.relative_loss_tolerance = relative_loss_tolerance;
        c.optimizer.lbfgs_memory = lbfgs_memory;
        c.subtract_initial = subtract_initial;
        c.flatten_exterior = flatten_exterior;
        c.flatten_falloff = flatten_falloff;
        c.reports = !no_reports;
        c.geodesic_subdivision = geodesic_subdivision;
        c.predictor_intercept = predictor_intercept;
        c.output_dir = output_dir;
        c.created = created;
        c.seed = seed;
        c.validate();
        return c;
    }
};

void add_input_flags(CLI::App& app, PipelineFlags& f) {
    app.add_option("-i,--input", f.inputs, "Measurement file(s), JSON or CSV; merged by per-pair minimum")
        ->required()
        ->check(CLI::ExistingPath);
    app.add_option("--residual-mode", f.residual_mode, "rtt-minus-2gcl | half-rtt-minus-gcl")
        ->check(CLI::IsMember({"rtt-minus-2gcl", "half-rtt-minus-gcl"}))
        ->capture_default_str();
    app.add_option("-e,--epsilon", f.epsilons, "Threshold sweep in ms, ascending")->delimiter(',')->capture_default_str();
    app.add_option("--cluster-cutoff-km", f.cluster_cutoff_km, "Single-linkage cutoff; collapses clusters to medoids");
    app.add_flag("--tiv-filter", f.tiv_filter, "Drop pairs that violate the triangle inequality");
    app.add_option("--tiv-slack-ms", f.tiv_slack_ms, "Slack for the triangle-inequality test")->capture_default_str();
    app.add_option("--projection", f.projection, "web-mercator | equirectangular")
        ->check(CLI::IsMember({"web-mercator", "equirectangular"}))
        ->capture_default_str();
    app.add_option("-o,--output-dir", f.output_dir, "Output directory")->capture_default_str();
}

void add_manifold_flags(CLI::App& app, PipelineFlags& f) {
    app.add_option("-k,--mesh-k", f.mesh_k, "Grid vertices per side")->check(CLI::Range(2, 4096))->capture_default_str();
    app.add_option("-l,--lambda-smooth", f.lambdas, "Smoothness weight sweep")->delimiter(',')->capture_default_str();
    app.add_option("-r,--ball-radius", f.ball_radius, "Edge-ball radius; defaults to the mesh-derived value");
    app.add_option("--apex-fraction", f.apex_fraction, "Sphere-cap apex height relative to the domain")->capture_default_str();
    app.add_option("--variant", f.variant, "length-weighted | uniform")
        ->check(CLI::IsMember({"length-weighted", "uniform"}))
        ->capture_default_str();
    app.add_option("--max-iterations", f.max_iterations, "L-BFGS iteration cap")->capture_default_str();
    app.add_option("--gradient-tolerance", f.gradient_tolerance, "Stop when the gradient inf-norm falls below")
        ->capture_default_str();
    app.add_option("--relative-loss-tolerance", f.relative_loss_tolerance, "Stop on small relative loss change")
        ->capture_default_str();
    app.add_option("--lbfgs-memory", f.lbfgs_memory, "Stored correction pairs")->capture_default_str();
    app.add_flag("--subtract-initial", f.subtract_initial, "Export heights minus the initial sphere cap");
    app.add_flag("--flatten-exterior", f.flatten_exterior, "Flatten heights outside the vantage-point hull");
    app.add_option("--flatten-falloff", f.flatten_falloff, "Flattening ramp width; defaults to twice the ball radius");
    app.add_flag("--no-reports", f.no_reports, "Skip predictor reports");
    app.add_option("--geodesic-subdivision", f.geodesic_subdivision, "Steiner level for report geodesics")
        ->check(CLI::Range(0, service::kMaxSubdivision))
        ->capture_default_str();
    app.add_flag("--predictor-intercept", f.predictor_intercept, "Fit latency predictors with an intercept");
    app.add_option("--created", f.created, "Timestamp recorded in artifacts")->capture_default_str();
    app.add_option("--seed", f.seed, "Recorded for fixture generation; the pipeline is deterministic")
        ->capture_default_str();
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << text;
    if (!out) throw Error("cannot write '" + path + "'");
    std::cerr << "wrote " << path << '\n';
}

std::string format_eps(double eps) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", eps);
    return buf;
}

int run_build(const PipelineFlags& flags) {
    const auto config = flags.config();
    const auto input = pipeline::prepare(pipeline::ingest(config), config);
    std::cerr << input.matrix.size() << " vantage points, " << input.matrix.pair_count() << " pairs; "
              << input.reduced.size() << " after reduction\n";
    for (const double eps : config.epsilons) {
        const auto graph = pipeline::build_graph(input, eps, config);
        std::size_t negative = 0;
        for (const auto& e : graph.edges) negative += e.ricci && *e.ricci < 0.0;
        const auto path = fs::path(config.output_dir) / ("graph-eps-" + format_eps(eps) + ".json");
        write_text(path.string(), artifact::to_json(pipeline::graph_data(input, graph)));
        std::cerr << "eps " << format_eps(eps) << " ms: " << graph.edges.size() << " edges, " << negative
                  << " with negative curvature\n";
    }
    return 0;
}

int run_optimize(const PipelineFlags& flags) {
    const auto config = flags.config();
    const auto artifacts = pipeline::run_pipeline(config);
    for (const auto& a : artifacts) {
        const auto& o = a.metadata.optimization;
        std::cerr << a.metadata.id << ": " << o.iterations << " iterations, loss " << o.initial_loss << " -> "
                  << o.final_loss << " (" << optimize::to_string(o.termination) << ")\n";
    }
    for (const auto& p : pipeline::write_artifacts(artifacts, config.output_dir)) std::cout << p.string() << '\n';
    return 0;
}

struct ReportFlags {
    std::vector<std::string> artifacts;
    std::string format = "text";
    std::string output;
};

int run_report(const ReportFlags& flags) {
    std::string text;
    for (const auto& path : flags.artifacts) {
        const auto a = artifact::import_manifold(path);
        if (!a.report) throw ValidationError("artifact '" + path + "' carries no report; rebuild without --no-reports");
        if (flags.format == "json") {
            text += geodesic::to_json(*a.report);
        } else {
            if (flags.artifacts.size() > 1) text += "# " + a.metadata.id + "\n";
            text += geodesic::to_text(*a.report);
        }
    }
    write_text(flags.output, text);
    return 0;
}

int run_stability(const PipelineFlags& flags, const ReportFlags& report) {
    const auto config = flags.config();
    std::vector<netgraph::LatencyMatrix> snapshots;
    for (const auto& in : config.inputs) snapshots.push_back(netgraph::load_measurements(in));
    const auto s = pipeline::stability_report(snapshots, config);
    write_text(report.output, report.format == "json" ? geodesic::to_json(s) : geodesic::to_text(s));
    return 0;
}

struct ExportFlags {
    std::string artifact;
    std::string output;
    std::string obj;
};

int run_export(const ExportFlags& flags) {
    const auto a = artifact::import_manifold(flags.artifact);
    if (!flags.output.empty()) {
        if (flags.output == "-") {
            std::cout << artifact::to_json(a);
        } else {
            artifact::export_manifold(a, flags.output);
            std::cerr << "wrote " << flags.output << '\n';
        }
    }
    if (!flags.obj.empty()) {
        std::string obj = "# " + a.metadata.id + "\n";
        char line[128];
        for (std::size_t v = 0; v < a.mesh.vertex_xy.size(); ++v) {
            std::snprintf(line, sizeof line, "v %.17g %.17g %.17g\n", a.mesh.vertex_xy[v].x, a.mesh.vertex_xy[v].y,
                          a.mesh.vertex_z[v]);
            obj += line;
        }
        for (const auto& f : a.mesh.faces) {
            std::snprintf(line, sizeof line, "f %zu %zu %zu\n", f[0] + 1, f[1] + 1, f[2] + 1);
            obj += line;
        }
        write_text(flags.obj, obj);
    }
    return 0;
}

struct FetchFlags {
    std::vector<std::string> measurements;
    std::optional<std::int64_t> start;
    std::optional<std::int64_t> stop;
    std::vector<std::int64_t> probes;
    std::string base_url = "https://atlas.ripe.net";
    int max_retries = 5;
    std::string output;
};

int run_fetch(const FetchFlags& flags) {
    fetch::FetchConfig c;
    c.base_url = flags.base_url;
    c.start = flags.start;
    c.stop = flags.stop;
    c.probes = flags.probes;
    c.max_retries = flags.max_retries;
    c.load_api_key_from_environment();
    for (const auto& item : flags.measurements) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw ValidationError("measurement '" + item + "' is not MSM_ID:ANCHOR_PROBE");
        try {
            c.measurements.push_back({std::stoll(item.substr(0, colon)), std::stoll(item.substr(colon + 1))});
        } catch (const std::logic_error&) {
            throw ValidationError("measurement '" + item + "' is not MSM_ID:ANCHOR_PROBE");
        }
    }
    const auto result = fetch::fetch_measurements(c);
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
    std::cerr << result.matrix.size() << " vantage points, " << result.matrix.pair_count() << " pairs\n";
    write_text(flags.output, netgraph::to_measurement_json(result.matrix));
    return 0;
}

struct ServeFlags {
    std::string dir = "out";
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string static_dir;
};

int run_serve(const ServeFlags& flags) {
    const service::ManifoldService svc{fs::path(flags.dir)};
    service::ServeOptions options;
    options.host = flags.host;
    options.port = flags.port;
    if (!flags.static_dir.empty()) options.static_dir = flags.static_dir;
    service::HttpServer server(svc, options);
    std::cerr << "serving " << svc.ids().size() << " manifolds on http://" << flags.host << ':' << server.port() << '\n';
    server.run();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Latency manifolds from network delay measurements"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "delayscape 0.1.0");

    PipelineFlags build_flags;
    auto* build = app.add_subcommand("build", "Threshold graphs with Ricci curvature, one file per epsilon");
    add_input_flags(*build, build_flags);

    PipelineFlags opt_flags;
    auto* optimize_cmd = app.add_subcommand("optimize", "Optimize manifolds and write one artifact per sweep point");
    add_input_flags(*optimize_cmd, opt_flags);
    add_manifold_flags(*optimize_cmd, opt_flags);

    ReportFlags report_flags;
    PipelineFlags stability_flags;
    auto* report = app.add_subcommand("report", "Print predictor reports or a stability report");
    report->add_option("--format", report_flags.format, "text | json")
        ->check(CLI::IsMember({"text", "json"}))
        ->capture_default_str();
    report->add_option("-o,--output", report_flags.output, "Output file; stdout when omitted");
    auto* predictor = report->add_subcommand("predictor", "Predictor table stored in artifacts");
    predictor->add_option("artifacts", report_flags.artifacts, "Artifact files")->required()->check(CLI::ExistingFile);
    auto* stability = report->add_subcommand("stability", "Spread of fitted latencies across measurement snapshots");
    add_input_flags(*stability, stability_flags);
    add_manifold_flags(*stability, stability_flags);
    report->require_subcommand(1);

    ExportFlags export_flags;
    auto* export_cmd = app.add_subcommand("export", "Validate an artifact and rewrite it canonically or as OBJ");
    export_cmd->add_option("artifact", export_flags.artifact, "Artifact file")->required()->check(CLI::ExistingFile);
    export_cmd->add_option("-o,--output", export_flags.output, "Canonical JSON destination ('-' for stdout)");
    export_cmd->add_option("--obj", export_flags.obj, "Wavefront OBJ destination for the mesh");

    FetchFlags fetch_flags;
    auto* fetch_cmd = app.add_subcommand("fetch", "Pull ping results from RIPE Atlas (API key from ATLAS_API_KEY)");
    fetch_cmd->add_option("-m,--measurement", fetch_flags.measurements, "MSM_ID:ANCHOR_PROBE, repeatable")->required();
    fetch_cmd->add_option("--start", fetch_flags.start, "Window start, unix seconds");
    fetch_cmd->add_option("--stop", fetch_flags.stop, "Window end, unix seconds");
    fetch_cmd->add_option("--probe", fetch_flags.probes, "Restrict to these source probes");
    fetch_cmd->add_option("--base-url", fetch_flags.base_url, "API root")->capture_default_str();
    fetch_cmd->add_option("--max-retries", fetch_flags.max_retries, "Backoff attempts per request")->capture_default_str();
    fetch_cmd->add_option("-o,--output", fetch_flags.output, "Measurement JSON destination; stdout when omitted");

    ServeFlags serve_flags;
    auto* serve = app.add_subcommand("serve", "Serve artifacts and the viewer over HTTP");
    serve->add_option("-d,--dir", serve_flags.dir, "Artifact directory")->check(CLI::ExistingDirectory)->capture_default_str();
    serve->add_option("--host", serve_flags.host, "Bind address")->capture_default_str();
    serve->add_option("-p,--port", serve_flags.port, "Port; 0 picks a free one")->check(CLI::Range(0, 65535))->capture_default_str();
    serve->add_option("--static", serve_flags.static_dir, "Viewer bundle mounted at /")->check(CLI::ExistingDirectory);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*build) return run_build(build_flags);
        if (*optimize_cmd) return run_optimize(opt_flags);
        if (*predictor) return run_report(report_flags);
        if (*stability) return run_stability(stability_flags, report_flags);
        if (*export_cmd) return run_export(export_flags);
        if (*fetch_cmd) return run_fetch(fetch_flags);
        if (*serve) return run_serve(serve_flags);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
