#include "delayscape/fetch.hpp"

#include "delayscape/error.hpp"
#include "delayscape/geo.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <set>
#include <thread>

namespace delayscape::fetch {

namespace {

using json = nlohmann::json;

HttpResult get_with_retry(const FetchConfig& config, const HttpGet& get, const Sleep& sleep, const std::string& target) {
    std::map<std::string, std::string> headers{{"Accept", "application/json"}};
    if (config.api_key) headers["Authorization"] = "Key " + *config.api_key;
    double delay = config.backoff_initial_s;
    for (int attempt = 0;; ++attempt) {
        HttpResult r = get(target, headers);
        if (r.status >= 200 && r.status < 300) return r;
        const bool retryable = r.status == 0 || r.status == 429 || r.status == 502 || r.status == 503 || r.status == 504;
        if (!retryable) throw FetchError("GET " + target + " failed with HTTP " + std::to_string(r.status));
        if (attempt >= config.max_retries) {
            throw FetchError("GET " + target + ": backoff exhausted after " + std::to_string(attempt + 1) +
                             " attempts (last status " + std::to_string(r.status) + ")");
        }
        sleep(std::min(config.backoff_max_s, r.retry_after_s.value_or(delay)));
        delay = std::min(config.backoff_max_s, delay * 2.0);
    }
}

json parse_body(const HttpResult& r, const std::string& target) {
    try {
        return json::parse(r.body);
    } catch (const json::parse_error& e) {
        throw FetchError("GET " + target + ": malformed JSON body: " + e.what());
    }
}

/// Successful RTT samples of one result object, honouring the time window.
std::vector<double> samples(const json& result, const FetchConfig& config) {
    std::vector<double> out;
    if (const auto ts = result.find("timestamp"); ts != result.end() && ts->is_number()) {
        const auto t = ts->get<std::int64_t>();
        if ((config.start && t < *config.start) || (config.stop && t > *config.stop)) return out;
    }
    const auto replies = result.find("result");
    if (replies == result.end() || !replies->is_array()) return out;
    for (const auto& reply : *replies) {
        if (!reply.is_object()) continue;
        const auto rtt = reply.find("rtt");
        if (rtt != reply.end() && rtt->is_number()) {
            const double v = rtt->get<double>();
            if (std::isfinite(v) && v > 0.0) out.push_back(v);
        }
    }
    return out;
}

struct ProbeInfo {
    std::string name;
    geo::GeoPoint location;
};

ProbeInfo probe_info(const FetchConfig& config, const HttpGet& get, const Sleep& sleep, std::int64_t id) {
    const std::string target = "/api/v2/probes/" + std::to_string(id) + "/";
    const json doc = parse_body(get_with_retry(config, get, sleep, target), target);
    const auto geometry = doc.find("geometry");
    if (geometry == doc.end() || !geometry->is_object() || !geometry->contains("coordinates")) {
        throw FetchError("probe " + std::to_string(id) + " has no location");
    }
    const auto& coords = (*geometry)["coordinates"];
    if (!coords.is_array() || coords.size() < 2 || !coords[0].is_number() || !coords[1].is_number()) {
        throw FetchError("probe " + std::to_string(id) + " has malformed coordinates");
    }
    ProbeInfo info;
    // GeoJSON order is (lon, lat).
    info.location = geo::make_point(coords[1].get<double>(), coords[0].get<double>());
    const auto desc = doc.find("description");
    info.name = desc != doc.end() && desc->is_string() ? desc->get<std::string>() : "probe " + std::to_string(id);
    return info;
}

}  // namespace

void FetchConfig::load_api_key_from_environment() {
    if (const char* key = std::getenv("ATLAS_API_KEY"); key && *key) api_key = key;
}

HttpGet make_http_get(const std::string& base_url) {
    return [base_url](const std::string& target, const std::map<std::string, std::string>& headers) {
        httplib::Client client(base_url);
        client.set_connection_timeout(10);
        client.set_read_timeout(60);
        client.set_follow_location(true);
        httplib::Headers h(headers.begin(), headers.end());
        const auto res = client.Get(target, h);
        HttpResult out;
        if (!res) return out;
        out.status = res->status;
        out.body = res->body;
        if (res->has_header("Retry-After")) {
            const std::string value = res->get_header_value("Retry-After");
            char* end = nullptr;
            const double seconds = std::strtod(value.c_str(), &end);
            if (end != value.c_str() && seconds >= 0.0) out.retry_after_s = seconds;
        }
        return out;
    };
}

FetchResult fetch_measurements(const FetchConfig& config, const HttpGet& get, const Sleep& sleep) {
    if (config.measurements.empty()) throw ValidationError("no measurements configured");
    if (config.max_retries < 0) throw ValidationError("max_retries must be >= 0");
    const std::set<std::int64_t> allowed(config.probes.begin(), config.probes.end());

    // (probe, anchor) -> minimum RTT; nullopt when only failed pings were seen.
    std::map<std::pair<std::int64_t, std::int64_t>, std::optional<double>> minima;
    std::size_t successful = 0;
    for (const auto& m : config.measurements) {
        std::string target = "/api/v2/measurements/" + std::to_string(m.measurement_id) + "/results/?format=json";
        if (config.start) target += "&start=" + std::to_string(*config.start);
        if (config.stop) target += "&stop=" + std::to_string(*config.stop);
        const json doc = parse_body(get_with_retry(config, get, sleep, target), target);
        if (!doc.is_array()) throw FetchError("measurement " + std::to_string(m.measurement_id) + ": expected an array");
        for (const auto& result : doc) {
            if (!result.is_object() || !result.contains("prb_id") || !result["prb_id"].is_number_integer()) continue;
            const auto probe = result["prb_id"].get<std::int64_t>();
            if (probe == m.target_probe || (!allowed.empty() && !allowed.count(probe))) continue;
            auto& best = minima[{probe, m.target_probe}];
            for (const double v : samples(result, config)) {
                best = best ? std::min(*best, v) : v;
                ++successful;
            }
        }
    }
    if (successful == 0) throw FetchError("no successful pings in the requested window");

    std::set<std::int64_t> ids;
    for (const auto& [pair, rtt] : minima) {
        if (rtt) {
            ids.insert(pair.first);
            ids.insert(pair.second);
        }
    }
    FetchResult out;
    std::vector<netgraph::VantagePoint> points;
    for (const auto id : ids) {
        const auto info = probe_info(config, get, sleep, id);
        points.push_back({std::to_string(id), info.name, info.location});
    }
    out.matrix = netgraph::LatencyMatrix(std::move(points));
    for (const auto& [pair, rtt] : minima) {
        const std::string a = std::to_string(pair.first);
        const std::string b = std::to_string(pair.second);
        if (!rtt) {
            out.warnings.push_back("no successful pings between probe " + a + " and anchor " + b + "; pair omitted");
            continue;
        }
        out.matrix.add_measurement(a, b, *rtt);
    }
    return out;
}

FetchResult fetch_measurements(const FetchConfig& config) {
    return fetch_measurements(config, make_http_get(config.base_url), [](double seconds) {
        std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
    });
}

}  // namespace delayscape::fetch
