#include "delayscape/netgraph.hpp"

#include "delayscape/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace delayscape::netgraph {

using nlohmann::json;

LatencyMatrix::LatencyMatrix(std::vector<VantagePoint> points) : points_(std::move(points)) {
    std::sort(points_.begin(), points_.end(),
              [](const VantagePoint& a, const VantagePoint& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < points_.size(); ++i) {
        if (points_[i].id == points_[i - 1].id) {
            throw ValidationError("duplicate vantage point id: " + points_[i].id);
        }
    }
}

std::optional<std::size_t> LatencyMatrix::index_of(std::string_view id) const {
    auto it = std::lower_bound(points_.begin(), points_.end(), id,
                               [](const VantagePoint& p, std::string_view key) { return p.id < key; });
    if (it == points_.end() || it->id != id) return std::nullopt;
    return static_cast<std::size_t>(it - points_.begin());
}

std::size_t LatencyMatrix::require_index(std::string_view id) const {
    if (auto idx = index_of(id)) return *idx;
    throw ValidationError("unknown vantage point id: " + std::string(id));
}

void LatencyMatrix::add_measurement(std::size_t a, std::size_t b, double rtt_ms) {
    if (a >= points_.size() || b >= points_.size()) throw ValidationError("vantage point index out of range");
    if (a == b) throw ValidationError("self measurement for " + points_[a].id);
    if (!std::isfinite(rtt_ms) || rtt_ms <= 0.0) {
        throw ValidationError("non-positive RTT between " + points_[a].id + " and " + points_[b].id);
    }
    const PairKey key = PairKey::of(a, b);
    auto [it, inserted] = rtt_.emplace(key, rtt_ms);
    if (!inserted) it->second = std::min(it->second, rtt_ms);
}

void LatencyMatrix::add_measurement(std::string_view a, std::string_view b, double rtt_ms) {
    add_measurement(require_index(a), require_index(b), rtt_ms);
}

std::optional<double> LatencyMatrix::rtt(std::size_t a, std::size_t b) const {
    if (a == b) return std::nullopt;
    auto it = rtt_.find(PairKey::of(a, b));
    if (it == rtt_.end()) return std::nullopt;
    return it->second;
}

namespace {

template <class T>
T field(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(where + ": missing field '" + key + "'");
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw ParseError(where + "." + key + ": wrong type");
    }
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

double parse_number(const std::string& text, const std::string& where) {
    std::size_t used = 0;
    double value = 0.0;
    try {
        value = std::stod(text, &used);
    } catch (const std::exception&) {
        throw ParseError(where + ": not a number: '" + text + "'");
    }
    if (used != text.size()) throw ParseError(where + ": not a number: '" + text + "'");
    return value;
}

using Rows = std::vector<std::vector<std::string>>;

Rows read_csv(std::istream& in, const std::vector<std::string>& header, const std::string& name) {
    std::string line;
    std::size_t line_no = 0;
    Rows rows;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto cells = split_csv_line(line);
        if (!saw_header) {
            if (cells != header) {
                std::string expected;
                for (const auto& h : header) expected += (expected.empty() ? "" : ",") + h;
                throw ParseError(name + " line " + std::to_string(line_no) + ": expected header '" +
                                 expected + "'");
            }
            saw_header = true;
            continue;
        }
        if (cells.size() != header.size()) {
            throw ParseError(name + " line " + std::to_string(line_no) + ": expected " +
                             std::to_string(header.size()) + " fields, got " + std::to_string(cells.size()));
        }
        cells.push_back(std::to_string(line_no));
        rows.push_back(std::move(cells));
    }
    if (!saw_header) throw ParseError(name + ": empty input");
    return rows;
}

}  // namespace

LatencyMatrix load_measurements_json(std::istream& in) {
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("measurement JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("measurement JSON: top level must be an object");
    auto vps = doc.find("vantage_points");
    auto ms = doc.find("measurements");
    if (vps == doc.end() || !vps->is_array()) throw ParseError("measurement JSON: missing array 'vantage_points'");
    if (ms == doc.end() || !ms->is_array()) throw ParseError("measurement JSON: missing array 'measurements'");

    std::vector<VantagePoint> points;
    for (std::size_t i = 0; i < vps->size(); ++i) {
        const std::string where = "vantage_points[" + std::to_string(i) + "]";
        const json& item = (*vps)[i];
        if (!item.is_object()) throw ParseError(where + ": expected object");
        VantagePoint vp;
        vp.id = field<std::string>(item, "id", where);
        vp.name = field<std::string>(item, "name", where);
        try {
            vp.location = geo::make_point(field<double>(item, "lat", where), field<double>(item, "lon", where));
        } catch (const ValidationError& e) {
            throw ParseError(where + ": " + e.what());
        }
        points.push_back(std::move(vp));
    }
    LatencyMatrix matrix(std::move(points));
    for (std::size_t i = 0; i < ms->size(); ++i) {
        const std::string where = "measurements[" + std::to_string(i) + "]";
        const json& item = (*ms)[i];
        if (!item.is_object()) throw ParseError(where + ": expected object");
        const auto src = field<std::string>(item, "src", where);
        const auto dst = field<std::string>(item, "dst", where);
        const auto rtt = field<double>(item, "rtt_ms", where);
        try {
            matrix.add_measurement(src, dst, rtt);
        } catch (const ValidationError& e) {
            throw ValidationError(where + ": " + e.what());
        }
    }
    return matrix;
}

LatencyMatrix load_measurements_csv(std::istream& vantage_points, std::istream& measurements) {
    const Rows vp_rows = read_csv(vantage_points, {"id", "name", "lat", "lon"}, "vantage_points.csv");
    std::vector<VantagePoint> points;
    for (const auto& row : vp_rows) {
        const std::string where = "vantage_points.csv line " + row.back();
        VantagePoint vp;
        vp.id = row[0];
        vp.name = row[1];
        try {
            vp.location = geo::make_point(parse_number(row[2], where + " field lat"),
                                          parse_number(row[3], where + " field lon"));
        } catch (const ValidationError& e) {
            throw ParseError(where + ": " + e.what());
        }
        points.push_back(std::move(vp));
    }
    LatencyMatrix matrix(std::move(points));
    const Rows m_rows = read_csv(measurements, {"src", "dst", "rtt_ms"}, "measurements.csv");
    for (const auto& row : m_rows) {
        const std::string where = "measurements.csv line " + row.back();
        const double rtt = parse_number(row[2], where + " field rtt_ms");
        try {
            matrix.add_measurement(row[0], row[1], rtt);
        } catch (const ValidationError& e) {
            throw ValidationError(where + ": " + e.what());
        }
    }
    return matrix;
}

LatencyMatrix load_measurements(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open measurement file: " + path.string());
    if (path.extension() == ".csv") {
        const auto vp_path = path.parent_path() / "vantage_points.csv";
        std::ifstream vp_in(vp_path);
        if (!vp_in) throw ParseError("cannot open " + vp_path.string());
        return load_measurements_csv(vp_in, in);
    }
    return load_measurements_json(in);
}

std::string to_measurement_json(const LatencyMatrix& matrix) {
    nlohmann::ordered_json doc;
    doc["vantage_points"] = nlohmann::ordered_json::array();
    for (const auto& p : matrix.points()) {
        nlohmann::ordered_json vp;
        vp["id"] = p.id;
        vp["name"] = p.name;
        vp["lat"] = p.location.lat;
        vp["lon"] = p.location.lon;
        doc["vantage_points"].push_back(std::move(vp));
    }
    doc["measurements"] = nlohmann::ordered_json::array();
    for (const auto& [key, rtt] : matrix.pairs()) {
        nlohmann::ordered_json m;
        m["src"] = matrix.points()[key.first].id;
        m["dst"] = matrix.points()[key.second].id;
        m["rtt_ms"] = rtt;
        doc["measurements"].push_back(std::move(m));
    }
    return doc.dump(2) + "\n";
}

std::string_view to_string(ResidualMode mode) {
    switch (mode) {
        case ResidualMode::RttMinusTwoGcl: return "rtt-minus-2gcl";
        case ResidualMode::HalfRttMinusGcl: return "half-rtt-minus-gcl";
    }
    return "rtt-minus-2gcl";
}

ResidualMode residual_mode_from_string(std::string_view name) {
    if (name == "rtt-minus-2gcl") return ResidualMode::RttMinusTwoGcl;
    if (name == "half-rtt-minus-gcl") return ResidualMode::HalfRttMinusGcl;
    throw ParseError("unknown residual mode: " + std::string(name));
}

Residual compute_residual(const LatencyMatrix& matrix, std::size_t a, std::size_t b, ResidualMode mode) {
    const auto rtt = matrix.rtt(a, b);
    if (!rtt) {
        throw ValidationError("no measurement between " + matrix.points().at(a).id + " and " +
                              matrix.points().at(b).id);
    }
    const double gcl = geo::great_circle_latency(matrix.points()[a].location, matrix.points()[b].location);
    const double raw = mode == ResidualMode::RttMinusTwoGcl ? *rtt - 2.0 * gcl : *rtt / 2.0 - gcl;
    if (raw < 0.0) return {0.0, true};
    return {raw, false};
}

std::vector<std::vector<std::size_t>> DelayGraph::adjacency() const {
    std::vector<std::vector<std::size_t>> adj(vertices.size());
    for (const auto& e : edges) {
        adj[e.u].push_back(e.v);
        adj[e.v].push_back(e.u);
    }
    for (auto& list : adj) std::sort(list.begin(), list.end());
    return adj;
}

std::optional<std::size_t> DelayGraph::find_edge(std::size_t a, std::size_t b) const {
    const std::size_t u = std::min(a, b);
    const std::size_t v = std::max(a, b);
    auto it = std::lower_bound(edges.begin(), edges.end(), std::pair{u, v},
                               [](const GraphEdge& e, const std::pair<std::size_t, std::size_t>& key) {
                                   return std::pair{e.u, e.v} < key;
                               });
    if (it == edges.end() || it->u != u || it->v != v) return std::nullopt;
    return static_cast<std::size_t>(it - edges.begin());
}

DelayGraph threshold_graph(const LatencyMatrix& matrix, double epsilon_ms, ResidualMode mode) {
    if (std::isnan(epsilon_ms) || epsilon_ms < 0.0) throw ValidationError("epsilon must be >= 0");
    DelayGraph graph;
    graph.vertices = matrix.points();
    graph.epsilon_ms = epsilon_ms;
    graph.mode = mode;
    for (const auto& [key, rtt] : matrix.pairs()) {
        const Residual r = compute_residual(matrix, key.first, key.second, mode);
        if (r.clamped) ++graph.clamped_residuals;
        if (r.value_ms <= epsilon_ms) {
            graph.edges.push_back(GraphEdge{key.first, key.second, r.value_ms, std::nullopt, std::nullopt});
        }
    }
    return graph;
}

std::optional<double> first_appearance(double residual_ms, const std::vector<double>& sweep) {
    for (double eps : sweep) {
        if (residual_ms <= eps) return eps;
    }
    return std::nullopt;
}

namespace {

struct DisjointSets {
    std::vector<std::size_t> parent;
    explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

}  // namespace

std::vector<std::vector<std::size_t>> single_linkage_clusters(const LatencyMatrix& matrix, double cutoff_km) {
    if (std::isnan(cutoff_km) || cutoff_km < 0.0) throw ValidationError("cluster cutoff must be >= 0");
    const auto& pts = matrix.points();
    const std::size_t n = pts.size();
    // Single linkage stopped at a distance cutoff is exactly the set of connected
    // components of the "closer than cutoff" graph.
    DisjointSets sets(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (geo::great_circle_distance(pts[i].location, pts[j].location) < cutoff_km) sets.unite(i, j);
        }
    }
    std::map<std::size_t, std::vector<std::size_t>> by_root;
    for (std::size_t i = 0; i < n; ++i) by_root[sets.find(i)].push_back(i);
    std::vector<std::vector<std::size_t>> clusters;
    for (auto& [root, members] : by_root) clusters.push_back(std::move(members));
    std::sort(clusters.begin(), clusters.end());
    return clusters;
}

std::size_t cluster_medoid(const LatencyMatrix& matrix, const std::vector<std::size_t>& cluster) {
    if (cluster.empty()) throw ValidationError("empty cluster");
    const auto& pts = matrix.points();
    std::size_t best = cluster.front();
    double best_sum = std::numeric_limits<double>::infinity();
    for (std::size_t candidate : cluster) {
        double sum = 0.0;
        for (std::size_t other : cluster) sum += geo::great_circle_distance(pts[candidate].location, pts[other].location);
        // Members are sorted by index and points are sorted by id, so strict
        // comparison keeps the lexicographically smallest id on ties.
        if (sum < best_sum) {
            best_sum = sum;
            best = candidate;
        }
    }
    return best;
}

LatencyMatrix cluster_vantage_points(const LatencyMatrix& matrix, double cutoff_km) {
    const auto clusters = single_linkage_clusters(matrix, cutoff_km);
    std::vector<std::size_t> cluster_of(matrix.size());
    std::vector<VantagePoint> reps;
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        for (std::size_t m : clusters[c]) cluster_of[m] = c;
        reps.push_back(matrix.points()[cluster_medoid(matrix, clusters[c])]);
    }
    LatencyMatrix out(reps);
    for (const auto& [key, rtt] : matrix.pairs()) {
        const std::size_t ca = cluster_of[key.first];
        const std::size_t cb = cluster_of[key.second];
        if (ca == cb) continue;
        out.add_measurement(reps[ca].id, reps[cb].id, rtt);
    }
    return out;
}

std::vector<TivTriple> detect_tivs(const LatencyMatrix& matrix, double slack_ms) {
    if (std::isnan(slack_ms) || slack_ms < 0.0) throw ValidationError("slack must be >= 0");
    const std::size_t n = matrix.size();
    std::vector<TivTriple> out;
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
            const auto ab = matrix.rtt(a, b);
            if (!ab) continue;
            for (std::size_t c = b + 1; c < n; ++c) {
                const auto ac = matrix.rtt(a, c);
                const auto bc = matrix.rtt(b, c);
                if (!ac || !bc) continue;
                // At most one side of a triangle can exceed the sum of the other two.
                if (*ab > *ac + *bc + slack_ms) {
                    out.push_back({a, b, c, *ab - *ac - *bc});
                } else if (*ac > *ab + *bc + slack_ms) {
                    out.push_back({a, c, b, *ac - *ab - *bc});
                } else if (*bc > *ab + *ac + slack_ms) {
                    out.push_back({b, c, a, *bc - *ab - *ac});
                }
            }
        }
    }
    return out;
}

LatencyMatrix remove_tiv_pairs(const LatencyMatrix& matrix, double slack_ms) {
    LatencyMatrix out = matrix;
    for (;;) {
        const auto tivs = detect_tivs(out, slack_ms);
        if (tivs.empty()) return out;
        std::map<PairKey, std::size_t> counts;
        for (const auto& t : tivs) ++counts[PairKey::of(t.long_a, t.long_b)];
        auto worst = counts.begin();
        for (auto it = counts.begin(); it != counts.end(); ++it) {
            if (it->second > worst->second) worst = it;
        }
        out.erase(worst->first);
    }
}

}  // namespace delayscape::netgraph
