#include "delayscape/artifact.hpp"

#include "delayscape/error.hpp"
#include "json_canonical.hpp"
#include "report_json.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace delayscape::artifact {

namespace {

using detail::array_at;
using detail::bool_at;
using detail::child;
using detail::field;
using detail::integer_at;
using detail::Json;
using detail::number_at;
using detail::optional_number;
using detail::optional_number_at;
using detail::string_at;

[[noreturn]] void invalid(const std::string& pointer, const std::string& what) {
    throw ValidationError("invalid artifact at '" + pointer + "': " + what);
}

template <typename Parse>
auto enum_at(const Json& value, const std::string& pointer, Parse parse) {
    const std::string name = string_at(value, pointer);
    try {
        return parse(name);
    } catch (const Error& e) {
        throw ParseError("schema error at '" + pointer + "': " + e.what());
    }
}

std::size_t index_at(const Json& value, const std::string& pointer) {
    const auto v = integer_at(value, pointer);
    if (v < 0) throw ParseError("schema error at '" + pointer + "': negative index");
    return static_cast<std::size_t>(v);
}

Json numbers(const std::vector<double>& values) {
    Json a = Json::array();
    for (const double v : values) a.push_back(v);
    return a;
}

std::vector<double> numbers_at(const Json& value, const std::string& pointer) {
    const Json& a = array_at(value, pointer);
    std::vector<double> out;
    out.reserve(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out.push_back(number_at(a[i], child(pointer, i)));
    return out;
}

// Each reader takes the object and its pointer; `get` shortens the field lookups.
struct Object {
    const Json& j;
    std::string pointer;

    const Json& operator[](std::string_view key) const { return field(j, key, pointer); }
    std::string at(std::string_view key) const { return child(pointer, key); }
    double number(std::string_view key) const { return number_at((*this)[key], at(key)); }
    std::optional<double> optional(std::string_view key) const { return optional_number_at((*this)[key], at(key)); }
    std::string string(std::string_view key) const { return string_at((*this)[key], at(key)); }
    bool boolean(std::string_view key) const { return bool_at((*this)[key], at(key)); }
    int integer(std::string_view key) const { return static_cast<int>(integer_at((*this)[key], at(key))); }
    Object object(std::string_view key) const { return {(*this)[key], at(key)}; }
};

Json settings_json(const RunSettings& s) {
    Json j = Json::object();
    Json inputs = Json::array();
    for (const auto& in : s.inputs) inputs.push_back(in);
    j["inputs"] = std::move(inputs);
    j["residual_mode"] = std::string(netgraph::to_string(s.residual_mode));
    j["epsilon_sweep"] = numbers(s.epsilon_sweep);
    j["epsilon_ms"] = s.epsilon_ms;
    j["lambda_smooth"] = s.lambda_smooth;
    j["ball_radius"] = s.ball_radius;
    j["cluster_cutoff_km"] = optional_number(s.cluster_cutoff_km);
    j["tiv_filter"] = s.tiv_filter;
    j["tiv_slack_ms"] = s.tiv_slack_ms;
    j["mesh_k"] = s.mesh_k;
    j["projection"] = std::string(geo::to_string(s.projection));
    j["apex_fraction"] = s.apex_fraction;
    j["curvature_loss_variant"] = std::string(loss::to_string(s.variant));
    Json opt = Json::object();
    opt["max_iterations"] = s.optimizer.max_iterations;
    opt["gradient_tolerance"] = s.optimizer.gradient_tolerance;
    opt["relative_loss_tolerance"] = s.optimizer.relative_loss_tolerance;
    opt["lbfgs_memory"] = s.optimizer.lbfgs_memory;
    opt["record_history"] = s.optimizer.record_history;
    j["optimizer"] = std::move(opt);
    j["subtract_initial"] = s.subtract_initial;
    j["flatten_exterior"] = s.flatten_exterior;
    j["flatten_falloff"] = s.flatten_falloff;
    j["geodesic_subdivision"] = s.geodesic_subdivision;
    j["predictor_intercept"] = s.predictor_intercept;
    return j;
}

RunSettings settings_from(const Object& o) {
    RunSettings s;
    const Json& inputs = array_at(o["inputs"], o.at("inputs"));
    for (std::size_t i = 0; i < inputs.size(); ++i) s.inputs.push_back(string_at(inputs[i], child(o.at("inputs"), i)));
    s.residual_mode = enum_at(o["residual_mode"], o.at("residual_mode"), netgraph::residual_mode_from_string);
    s.epsilon_sweep = numbers_at(o["epsilon_sweep"], o.at("epsilon_sweep"));
    s.epsilon_ms = o.number("epsilon_ms");
    s.lambda_smooth = o.number("lambda_smooth");
    s.ball_radius = o.number("ball_radius");
    s.cluster_cutoff_km = o.optional("cluster_cutoff_km");
    s.tiv_filter = o.boolean("tiv_filter");
    s.tiv_slack_ms = o.number("tiv_slack_ms");
    s.mesh_k = o.integer("mesh_k");
    s.projection = enum_at(o["projection"], o.at("projection"), geo::projection_kind_from_string);
    s.apex_fraction = o.number("apex_fraction");
    s.variant = enum_at(o["curvature_loss_variant"], o.at("curvature_loss_variant"),
                        loss::curvature_loss_variant_from_string);
    const Object opt = o.object("optimizer");
    s.optimizer.max_iterations = opt.integer("max_iterations");
    s.optimizer.gradient_tolerance = opt.number("gradient_tolerance");
    s.optimizer.relative_loss_tolerance = opt.number("relative_loss_tolerance");
    s.optimizer.lbfgs_memory = opt.integer("lbfgs_memory");
    s.optimizer.record_history = opt.boolean("record_history");
    s.subtract_initial = o.boolean("subtract_initial");
    s.flatten_exterior = o.boolean("flatten_exterior");
    s.flatten_falloff = o.number("flatten_falloff");
    s.geodesic_subdivision = o.integer("geodesic_subdivision");
    s.predictor_intercept = o.boolean("predictor_intercept");
    return s;
}

Json optimization_json(const OptimizationSummary& s) {
    Json j = Json::object();
    j["termination"] = std::string(optimize::to_string(s.termination));
    j["iterations"] = s.iterations;
    j["initial_loss"] = s.initial_loss;
    j["final_loss"] = s.final_loss;
    j["curvature_loss"] = s.curvature_loss;
    j["smoothness_loss"] = s.smoothness_loss;
    j["gradient_inf_norm"] = s.gradient_inf_norm;
    j["loss_history"] = numbers(s.loss_history);
    return j;
}

OptimizationSummary optimization_from(const Object& o) {
    OptimizationSummary s;
    s.termination = enum_at(o["termination"], o.at("termination"), optimize::termination_from_string);
    s.iterations = o.integer("iterations");
    s.initial_loss = o.number("initial_loss");
    s.final_loss = o.number("final_loss");
    s.curvature_loss = o.number("curvature_loss");
    s.smoothness_loss = o.number("smoothness_loss");
    s.gradient_inf_norm = o.number("gradient_inf_norm");
    s.loss_history = numbers_at(o["loss_history"], o.at("loss_history"));
    return s;
}

Json mesh_json(const MeshData& m) {
    Json j = Json::object();
    j["k"] = m.k;
    j["bounds"] = Json::array({m.bounds.min_x, m.bounds.min_y, m.bounds.max_x, m.bounds.max_y});
    Json xy = Json::array();
    for (const auto& p : m.vertex_xy) xy.push_back(Json::array({p.x, p.y}));
    j["vertex_xy"] = std::move(xy);
    j["vertex_z"] = numbers(m.vertex_z);
    Json faces = Json::array();
    for (const auto& f : m.faces) faces.push_back(Json::array({f[0], f[1], f[2]}));
    j["faces"] = std::move(faces);
    j["gaussian_curvature"] = numbers(m.gaussian_curvature);
    return j;
}

MeshData mesh_from(const Object& o) {
    MeshData m;
    m.k = o.integer("k");
    const auto bounds = numbers_at(o["bounds"], o.at("bounds"));
    if (bounds.size() != 4) throw ParseError("schema error at '" + o.at("bounds") + "': expected 4 numbers");
    m.bounds = {bounds[0], bounds[1], bounds[2], bounds[3]};
    const std::string xy_ptr = o.at("vertex_xy");
    const Json& xy = array_at(o["vertex_xy"], xy_ptr);
    m.vertex_xy.reserve(xy.size());
    for (std::size_t i = 0; i < xy.size(); ++i) {
        const auto p = numbers_at(xy[i], child(xy_ptr, i));
        if (p.size() != 2) throw ParseError("schema error at '" + child(xy_ptr, i) + "': expected 2 numbers");
        m.vertex_xy.push_back({p[0], p[1]});
    }
    m.vertex_z = numbers_at(o["vertex_z"], o.at("vertex_z"));
    const std::string faces_ptr = o.at("faces");
    const Json& faces = array_at(o["faces"], faces_ptr);
    m.faces.reserve(faces.size());
    for (std::size_t i = 0; i < faces.size(); ++i) {
        const std::string p = child(faces_ptr, i);
        const Json& f = array_at(faces[i], p);
        if (f.size() != 3) throw ParseError("schema error at '" + p + "': expected 3 indices");
        m.faces.push_back({index_at(f[0], child(p, 0)), index_at(f[1], child(p, 1)), index_at(f[2], child(p, 2))});
    }
    m.gaussian_curvature = numbers_at(o["gaussian_curvature"], o.at("gaussian_curvature"));
    return m;
}

Json graph_json(const GraphData& g) {
    Json j = Json::object();
    j["epsilon_ms"] = g.epsilon_ms;
    j["residual_mode"] = std::string(netgraph::to_string(g.residual_mode));
    Json vertices = Json::array();
    for (const auto& v : g.vertices) {
        Json jv = Json::object();
        jv["id"] = v.id;
        jv["name"] = v.name;
        jv["lat"] = v.lat;
        jv["lon"] = v.lon;
        jv["x"] = v.xy.x;
        jv["y"] = v.xy.y;
        vertices.push_back(std::move(jv));
    }
    j["vertices"] = std::move(vertices);
    Json edges = Json::array();
    for (const auto& e : g.edges) {
        Json je = Json::object();
        je["u"] = e.u;
        je["v"] = e.v;
        je["residual_ms"] = e.residual_ms;
        je["ricci"] = optional_number(e.ricci);
        je["epsilon_first_appearance"] = optional_number(e.epsilon_first_appearance);
        edges.push_back(std::move(je));
    }
    j["edges"] = std::move(edges);
    return j;
}

GraphData graph_from(const Object& o) {
    GraphData g;
    g.epsilon_ms = o.number("epsilon_ms");
    g.residual_mode = enum_at(o["residual_mode"], o.at("residual_mode"), netgraph::residual_mode_from_string);
    const std::string vptr = o.at("vertices");
    const Json& vertices = array_at(o["vertices"], vptr);
    for (std::size_t i = 0; i < vertices.size(); ++i) {
        const Object v{vertices[i], child(vptr, i)};
        g.vertices.push_back({v.string("id"), v.string("name"), v.number("lat"), v.number("lon"),
                              {v.number("x"), v.number("y")}});
    }
    const std::string eptr = o.at("edges");
    const Json& edges = array_at(o["edges"], eptr);
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const Object e{edges[i], child(eptr, i)};
        netgraph::GraphEdge edge;
        edge.u = index_at(e["u"], e.at("u"));
        edge.v = index_at(e["v"], e.at("v"));
        edge.residual_ms = e.number("residual_ms");
        edge.ricci = e.optional("ricci");
        edge.epsilon_first_appearance = e.optional("epsilon_first_appearance");
        g.edges.push_back(edge);
    }
    return g;
}

Json projection_json(const geo::Projection& p) {
    Json j = Json::object();
    j["kind"] = std::string(geo::to_string(p.kind));
    j["center_x"] = p.center_x;
    j["center_y"] = p.center_y;
    j["scale"] = p.scale;
    j["margin_fraction"] = p.margin_fraction;
    return j;
}

geo::Projection projection_from(const Object& o) {
    geo::Projection p;
    p.kind = enum_at(o["kind"], o.at("kind"), geo::projection_kind_from_string);
    p.center_x = o.number("center_x");
    p.center_y = o.number("center_y");
    p.scale = o.number("scale");
    p.margin_fraction = o.number("margin_fraction");
    return p;
}

}  // namespace

std::optional<std::size_t> GraphData::vertex_index(std::string_view id) const {
    for (std::size_t i = 0; i < vertices.size(); ++i) {
        if (vertices[i].id == id) return i;
    }
    return std::nullopt;
}

void validate(const ManifoldArtifact& a) {
    const auto& m = a.mesh;
    if (m.k < 2) invalid("/mesh/k", "must be >= 2");
    if (!(m.bounds.max_x > m.bounds.min_x && m.bounds.max_y > m.bounds.min_y)) invalid("/mesh/bounds", "empty domain");
    const std::size_t n = static_cast<std::size_t>(m.k) * static_cast<std::size_t>(m.k);
    if (m.vertex_xy.size() != n) invalid("/mesh/vertex_xy", "expected k*k vertices");
    if (m.vertex_z.size() != n) invalid("/mesh/vertex_z", "expected one height per vertex");
    if (m.gaussian_curvature.size() != n) invalid("/mesh/gaussian_curvature", "expected one value per vertex");
    if (m.faces.size() != 2 * static_cast<std::size_t>(m.k - 1) * static_cast<std::size_t>(m.k - 1)) {
        invalid("/mesh/faces", "expected 2(k-1)^2 faces");
    }
    for (std::size_t f = 0; f < m.faces.size(); ++f) {
        for (std::size_t c = 0; c < 3; ++c) {
            if (m.faces[f][c] >= n) invalid("/mesh/faces/" + std::to_string(f) + "/" + std::to_string(c), "vertex index out of range");
        }
    }

    const auto& g = a.graph;
    if (!(g.epsilon_ms >= 0.0)) invalid("/graph/epsilon_ms", "must be >= 0");
    for (std::size_t i = 0; i < g.vertices.size(); ++i) {
        const auto& v = g.vertices[i];
        const std::string p = "/graph/vertices/" + std::to_string(i);
        if (v.id.empty()) invalid(p + "/id", "empty id");
        if (g.vertex_index(v.id) != i) invalid(p + "/id", "duplicate id '" + v.id + "'");
        if (v.xy.x < m.bounds.min_x || v.xy.x > m.bounds.max_x || v.xy.y < m.bounds.min_y || v.xy.y > m.bounds.max_y) {
            invalid(p, "projected position lies outside the mesh bounds");
        }
    }
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
        const auto& e = g.edges[i];
        const std::string p = "/graph/edges/" + std::to_string(i);
        if (!(e.u < e.v)) invalid(p, "expected u < v");
        if (e.v >= g.vertices.size()) invalid(p + "/v", "vertex index out of range");
        if (e.residual_ms > g.epsilon_ms) invalid(p + "/residual_ms", "exceeds the graph threshold");
        if (e.ricci && (*e.ricci < -2.0 - 1e-9 || *e.ricci > 1.0 + 1e-9)) invalid(p + "/ricci", "outside [-2, 1]");
        if (i > 0 && !(std::pair(g.edges[i - 1].u, g.edges[i - 1].v) < std::pair(e.u, e.v))) {
            invalid(p, "edges must be sorted and unique");
        }
    }
    if (!(a.projection.scale > 0.0)) invalid("/projection/scale", "must be positive");
    if (a.report) {
        for (std::size_t i = 0; i < a.report->rows.size(); ++i) {
            const auto& r = a.report->rows[i];
            if (!g.vertex_index(r.a) || !g.vertex_index(r.b)) {
                invalid("/report/rows/" + std::to_string(i), "pair does not name graph vertices");
            }
        }
    }
}

std::string to_json(const ManifoldArtifact& a) {
    Json j = Json::object();
    j["schema_version"] = kSchemaVersion;
    Json meta = Json::object();
    meta["id"] = a.metadata.id;
    meta["created"] = a.metadata.created;
    meta["generator"] = a.metadata.generator;
    meta["clamped_residuals"] = a.metadata.clamped_residuals;
    meta["settings"] = settings_json(a.metadata.settings);
    meta["optimization"] = optimization_json(a.metadata.optimization);
    j["metadata"] = std::move(meta);
    j["projection"] = projection_json(a.projection);
    j["graph"] = graph_json(a.graph);
    j["mesh"] = mesh_json(a.mesh);
    j["report"] = a.report ? detail::to_json_value(*a.report) : Json(nullptr);
    return detail::canonical_dump(j);
}

std::string to_json(const GraphData& graph) { return detail::canonical_dump(graph_json(graph)); }

ManifoldArtifact from_json(std::string_view text) {
    Json j;
    try {
        j = Json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("artifact is not valid JSON: ") + e.what());
    }
    const Object root{j, ""};
    const int version = root.integer("schema_version");
    if (version != kSchemaVersion) {
        throw ParseError("schema error at '/schema_version': unsupported version " + std::to_string(version));
    }
    ManifoldArtifact a;
    const Object meta = root.object("metadata");
    a.metadata.id = meta.string("id");
    a.metadata.created = meta.string("created");
    a.metadata.generator = meta.string("generator");
    const auto clamped = integer_at(meta["clamped_residuals"], meta.at("clamped_residuals"));
    if (clamped < 0) throw ParseError("schema error at '/metadata/clamped_residuals': negative count");
    a.metadata.clamped_residuals = static_cast<std::size_t>(clamped);
    a.metadata.settings = settings_from(meta.object("settings"));
    a.metadata.optimization = optimization_from(meta.object("optimization"));
    a.projection = projection_from(root.object("projection"));
    a.graph = graph_from(root.object("graph"));
    a.mesh = mesh_from(root.object("mesh"));
    if (const Json& report = root["report"]; !report.is_null()) {
        a.report = detail::predictor_report_from_json(report, "/report");
    }
    validate(a);
    return a;
}

void export_manifold(const ManifoldArtifact& artifact, const std::filesystem::path& path) {
    validate(artifact);
    const std::string text = to_json(artifact);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open '" + tmp.string() + "' for writing");
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        if (!out) throw Error("failed writing '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error("cannot move artifact into place at '" + path.string() + "': " + ec.message());
}

ManifoldArtifact import_manifold(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open artifact '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

mesh::HalfEdgeMesh rebuild_mesh(const ManifoldArtifact& artifact) {
    auto m = mesh::HalfEdgeMesh::grid(artifact.mesh.k, artifact.mesh.bounds);
    if (m.faces() != artifact.mesh.faces) throw ValidationError("artifact faces do not match the regular grid");
    for (std::size_t v = 0; v < m.vertex_count(); ++v) {
        const auto& a = artifact.mesh.vertex_xy[v];
        const auto& b = m.xy()[v];
        if (std::abs(a.x - b.x) > 1e-12 || std::abs(a.y - b.y) > 1e-12) {
            throw ValidationError("artifact vertex " + std::to_string(v) + " does not match the regular grid");
        }
    }
    m.set_heights(artifact.mesh.vertex_z);
    return m;
}

std::string make_id(double epsilon_ms, double lambda_smooth) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "eps-%g_lambda-%g", epsilon_ms, lambda_smooth);
    return buf;
}

}  // namespace delayscape::artifact
