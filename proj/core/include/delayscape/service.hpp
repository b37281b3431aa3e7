#pragma once

#include "delayscape/artifact.hpp"
#include "delayscape/mesh.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace delayscape::service {

struct Response {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
};

/// Read-only view over a directory of exported artifacts.
///
/// Routes:
///   GET /manifolds                               list sorted by (epsilon, lambda, id)
///   GET /manifold/{id}                           canonical artifact JSON
///   GET /manifold/{id}/geodesic?src=&dst=&s=     geodesic between graph vertices
/// Unknown artifacts or vertices give 404, malformed queries 400. `handle` is
/// const and safe to call concurrently.
class ManifoldService {
public:
    /// Loads every `*.json` artifact in `dir`; throws ValidationError when there is none.
    explicit ManifoldService(const std::filesystem::path& dir);
    explicit ManifoldService(std::vector<artifact::ManifoldArtifact> artifacts);
    ~ManifoldService();
    ManifoldService(ManifoldService&&) noexcept;
    ManifoldService& operator=(ManifoldService&&) noexcept;

    std::vector<std::string> ids() const;
    const artifact::ManifoldArtifact* find(std::string_view id) const;

    Response handle(std::string_view method, std::string_view path,
                    const std::multimap<std::string, std::string>& query) const;

private:
    struct Entry;
    std::vector<std::unique_ptr<Entry>> entries_;  ///< sorted by (epsilon, lambda, id)
};

/// Subdivision levels accepted by the geodesic route.
inline constexpr int kMaxSubdivision = 16;

struct ServeOptions {
    std::string host = "127.0.0.1";
    int port = 8080;  ///< 0 picks a free port
    std::optional<std::filesystem::path> static_dir;  ///< viewer bundle, mounted at "/"
};

/// HTTP front end over a ManifoldService; the service must outlive it.
class HttpServer {
public:
    /// Binds immediately; throws Error when binding fails.
    HttpServer(const ManifoldService& service, const ServeOptions& options);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    int port() const { return port_; }
    /// Blocks until stop() is called.
    void run();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int port_ = 0;
};

/// Blocks serving `service` until the process is stopped.
void serve(const ManifoldService& service, const ServeOptions& options);

}  // namespace delayscape::service
