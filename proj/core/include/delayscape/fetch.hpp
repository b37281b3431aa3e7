#pragma once

#include "delayscape/netgraph.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace delayscape::fetch {

/// One ping measurement towards an anchor; `target_probe` is the anchor's probe id.
struct MeasurementSource {
    std::int64_t measurement_id = 0;
    std::int64_t target_probe = 0;
};

struct FetchConfig {
    std::string base_url = "https://atlas.ripe.net";
    std::vector<MeasurementSource> measurements;
    std::optional<std::int64_t> start;  ///< unix seconds, inclusive
    std::optional<std::int64_t> stop;
    std::vector<std::int64_t> probes;  ///< restrict sources; empty keeps every probe seen
    std::optional<std::string> api_key;  ///< sent as "Authorization: Key <key>"
    int max_retries = 5;
    double backoff_initial_s = 1.0;
    double backoff_max_s = 60.0;

    /// Reads ATLAS_API_KEY when set.
    void load_api_key_from_environment();
};

struct HttpResult {
    int status = 0;  ///< 0 for transport failures
    std::string body;
    std::optional<double> retry_after_s;
};

/// GET of a path-and-query relative to the base URL.
using HttpGet = std::function<HttpResult(const std::string& target, const std::map<std::string, std::string>& headers)>;
using Sleep = std::function<void(double seconds)>;

/// Client over cpp-httplib; https requires the build's OpenSSL support.
HttpGet make_http_get(const std::string& base_url);

struct FetchResult {
    netgraph::LatencyMatrix matrix;
    std::vector<std::string> warnings;  ///< pairs without successful pings, skipped probes
};

/// Pulls ping results and probe locations, reducing each (probe, anchor) pair to the
/// minimum RTT in the window. Vantage-point ids are probe ids. Rate limiting (429/503)
/// and transport failures back off exponentially, honouring Retry-After. Throws
/// FetchError on other HTTP errors, exhausted retries or a window with no successful ping.
FetchResult fetch_measurements(const FetchConfig& config, const HttpGet& get, const Sleep& sleep);
FetchResult fetch_measurements(const FetchConfig& config);

}  // namespace delayscape::fetch
