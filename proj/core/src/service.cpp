#include "delayscape/service.hpp"

#include "delayscape/error.hpp"
#include "delayscape/geodesic.hpp"
#include "json_canonical.hpp"

#include <httplib.h>

#include <algorithm>
#include <charconv>
#include <tuple>

namespace delayscape::service {

using detail::Json;

struct ManifoldService::Entry {
    artifact::ManifoldArtifact artifact;
    std::string json;
    mesh::HalfEdgeMesh mesh;
};

namespace {

Response json_response(int status, const Json& body) { return {status, "application/json", detail::canonical_dump(body)}; }

Response error_response(int status, const std::string& message) {
    Json body = Json::object();
    body["error"] = message;
    body["status"] = status;
    return json_response(status, body);
}

std::vector<std::string_view> split_path(std::string_view path) {
    std::vector<std::string_view> parts;
    while (!path.empty()) {
        const auto slash = path.find('/');
        const auto part = path.substr(0, slash);
        if (!part.empty()) parts.push_back(part);
        if (slash == std::string_view::npos) break;
        path.remove_prefix(slash + 1);
    }
    return parts;
}

std::optional<std::string> single(const std::multimap<std::string, std::string>& query, const std::string& key) {
    const auto [lo, hi] = query.equal_range(key);
    if (lo == hi) return std::nullopt;
    if (std::next(lo) != hi) throw ParseError("query parameter '" + key + "' given more than once");
    return lo->second;
}

const geodesic::PredictorRow* report_row(const artifact::ManifoldArtifact& a, const std::string& x, const std::string& y) {
    if (!a.report) return nullptr;
    for (const auto& row : a.report->rows) {
        if ((row.a == x && row.b == y) || (row.a == y && row.b == x)) return &row;
    }
    return nullptr;
}

}  // namespace

ManifoldService::ManifoldService(std::vector<artifact::ManifoldArtifact> artifacts) {
    for (auto& a : artifacts) {
        artifact::validate(a);
        auto m = artifact::rebuild_mesh(a);
        auto text = artifact::to_json(a);
        entries_.push_back(std::make_unique<Entry>(Entry{std::move(a), std::move(text), std::move(m)}));
    }
    if (entries_.empty()) throw ValidationError("no manifold artifacts to serve");
    std::sort(entries_.begin(), entries_.end(), [](const auto& x, const auto& y) {
        const auto& a = x->artifact.metadata;
        const auto& b = y->artifact.metadata;
        return std::tie(a.settings.epsilon_ms, a.settings.lambda_smooth, a.id) <
               std::tie(b.settings.epsilon_ms, b.settings.lambda_smooth, b.id);
    });
    for (std::size_t i = 1; i < entries_.size(); ++i) {
        if (entries_[i]->artifact.metadata.id == entries_[i - 1]->artifact.metadata.id) {
            throw ValidationError("duplicate artifact id '" + entries_[i]->artifact.metadata.id + "'");
        }
    }
}

namespace {

std::vector<artifact::ManifoldArtifact> load_directory(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw ValidationError("'" + dir.string() + "' is not a directory");
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<artifact::ManifoldArtifact> out;
    for (const auto& f : files) out.push_back(artifact::import_manifold(f));
    return out;
}

}  // namespace

ManifoldService::ManifoldService(const std::filesystem::path& dir) : ManifoldService(load_directory(dir)) {}

ManifoldService::~ManifoldService() = default;
ManifoldService::ManifoldService(ManifoldService&&) noexcept = default;
ManifoldService& ManifoldService::operator=(ManifoldService&&) noexcept = default;

std::vector<std::string> ManifoldService::ids() const {
    std::vector<std::string> out;
    for (const auto& e : entries_) out.push_back(e->artifact.metadata.id);
    return out;
}

const artifact::ManifoldArtifact* ManifoldService::find(std::string_view id) const {
    for (const auto& e : entries_) {
        if (e->artifact.metadata.id == id) return &e->artifact;
    }
    return nullptr;
}

Response ManifoldService::handle(std::string_view method, std::string_view path,
                                 const std::multimap<std::string, std::string>& query) const {
    if (method != "GET" && method != "HEAD") return error_response(405, "only GET is supported");
    const auto parts = split_path(path);

    if (parts.size() == 1 && parts[0] == "manifolds") {
        Json list = Json::array();
        for (const auto& e : entries_) {
            const auto& a = e->artifact;
            Json item = Json::object();
            item["id"] = a.metadata.id;
            item["epsilon_ms"] = a.metadata.settings.epsilon_ms;
            item["lambda_smooth"] = a.metadata.settings.lambda_smooth;
            item["mesh_k"] = a.mesh.k;
            item["vertices"] = a.graph.vertices.size();
            item["edges"] = a.graph.edges.size();
            item["created"] = a.metadata.created;
            list.push_back(std::move(item));
        }
        return json_response(200, list);
    }
    if (parts.size() < 2 || parts.size() > 3 || parts[0] != "manifold") return error_response(404, "no such route");

    const Entry* entry = nullptr;
    for (const auto& e : entries_) {
        if (e->artifact.metadata.id == parts[1]) entry = e.get();
    }
    if (!entry) return error_response(404, "unknown manifold '" + std::string(parts[1]) + "'");
    if (parts.size() == 2) return {200, "application/json", entry->json};
    if (parts[2] != "geodesic") return error_response(404, "no such route");

    std::optional<std::string> src, dst, level;
    try {
        src = single(query, "src");
        dst = single(query, "dst");
        level = single(query, "s");
    } catch (const ParseError& e) {
        return error_response(400, e.what());
    }
    if (!src || !dst || src->empty() || dst->empty()) return error_response(400, "src and dst are required");
    int s = 4;
    if (level) {
        const auto* end = level->data() + level->size();
        const auto [ptr, ec] = std::from_chars(level->data(), end, s);
        if (ec != std::errc() || ptr != end || s < 0 || s > kMaxSubdivision) {
            return error_response(400, "s must be an integer in [0, " + std::to_string(kMaxSubdivision) + "]");
        }
    }
    const auto& a = entry->artifact;
    const auto si = a.graph.vertex_index(*src);
    if (!si) return error_response(404, "unknown vertex '" + *src + "'");
    const auto di = a.graph.vertex_index(*dst);
    if (!di) return error_response(404, "unknown vertex '" + *dst + "'");

    geodesic::GeodesicResult g;
    try {
        g = geodesic::surface_geodesic(entry->mesh, a.mesh.vertex_z, a.graph.vertices[*si].xy, a.graph.vertices[*di].xy, s);
    } catch (const Error& e) {
        return error_response(500, e.what());
    }
    Json body = Json::object();
    body["manifold"] = a.metadata.id;
    body["src"] = *src;
    body["dst"] = *dst;
    body["subdivision"] = g.subdivision;
    body["length"] = g.length;
    Json polyline = Json::array();
    for (const auto& p : g.polyline) polyline.push_back(Json::array({p.x, p.y, p.z}));
    body["polyline"] = std::move(polyline);
    body["fitted_latency_ms"] = a.report ? Json(a.report->geo.predict(g.length)) : Json(nullptr);
    const auto* row = report_row(a, *src, *dst);
    body["observed_rtt_ms"] = row ? Json(row->rtt_ms) : Json(nullptr);
    body["delta_gcd_ms"] = row ? Json(row->delta_gcd) : Json(nullptr);
    body["delta_geo_ms"] = row ? Json(row->delta_geo) : Json(nullptr);
    body["d_gcd_km"] = row ? Json(row->d_gcd_km) : Json(nullptr);
    return json_response(200, body);
}

struct HttpServer::Impl {
    httplib::Server server;
};

HttpServer::HttpServer(const ManifoldService& service, const ServeOptions& options) : impl_(std::make_unique<Impl>()) {
    auto route = [&service](const httplib::Request& req, httplib::Response& res) {
        const std::multimap<std::string, std::string> query(req.params.begin(), req.params.end());
        const auto out = service.handle(req.method, req.path, query);
        res.status = out.status;
        res.set_header("Access-Control-Allow-Origin", "*");
        res.set_content(out.body, out.content_type);
    };
    auto& server = impl_->server;
    server.Get(R"(/manifolds/?)", route);
    server.Get(R"(/manifold/.*)", route);
    if (options.static_dir && !server.set_mount_point("/", options.static_dir->string())) {
        throw ValidationError("static directory '" + options.static_dir->string() + "' does not exist");
    }
    if (options.port == 0) {
        port_ = server.bind_to_any_port(options.host);
        if (port_ <= 0) throw Error("cannot bind " + options.host);
    } else {
        if (!server.bind_to_port(options.host, options.port)) {
            throw Error("cannot bind " + options.host + ":" + std::to_string(options.port));
        }
        port_ = options.port;
    }
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::run() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
    if (impl_) impl_->server.stop();
}

void serve(const ManifoldService& service, const ServeOptions& options) { HttpServer(service, options).run(); }

}  // namespace delayscape::service
