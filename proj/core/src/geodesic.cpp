#include "delayscape/geodesic.hpp"

#include "delayscape/error.hpp"
#include "report_json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>
#include <sstream>

namespace delayscape::geodesic {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Interior edge parameters of level s: every p/q in (0, 1) with q <= s + 1, so each
/// level contains the uniform subdivisions of all coarser levels.
std::vector<double> steiner_fractions(int s) {
    std::vector<double> t;
    for (int q = 2; q <= s + 1; ++q) {
        for (int p = 1; p < q; ++p) {
            if (std::gcd(p, q) == 1) t.push_back(static_cast<double>(p) / q);
        }
    }
    std::sort(t.begin(), t.end());
    return t;
}

/// Implicit Steiner graph. Node ids: mesh vertices, then the Steiner points of each
/// edge, then the source and target query points.
class SteinerGraph {
public:
    SteinerGraph(const mesh::HalfEdgeMesh& mesh, std::span<const double> z, int s)
        : mesh_(mesh), z_(z), t_(steiner_fractions(s)), s_(static_cast<int>(t_.size())) {
        steiner_begin_ = mesh.vertex_count();
        source_ = steiner_begin_ + mesh.edge_count() * static_cast<std::size_t>(s_);
        target_ = source_ + 1;
        positions_.reserve(source_);
        for (std::size_t v = 0; v < steiner_begin_; ++v) positions_.push_back(mesh.position(v, z));
        for (const auto& edge : mesh.edges()) {
            const Vec3 a = positions_[edge.a];
            const Vec3 b = positions_[edge.b];
            for (const double t : t_) positions_.push_back(a + t * (b - a));
        }
    }

    std::size_t source() const { return source_; }
    std::size_t target() const { return target_; }
    std::size_t node_count() const { return target_ + 1; }

    void set_queries(const Vec3& src, std::vector<std::size_t> src_faces, const Vec3& dst,
                     std::vector<std::size_t> dst_faces) {
        src_ = src;
        dst_ = dst;
        src_faces_ = std::move(src_faces);
        dst_faces_ = std::move(dst_faces);
    }

    Vec3 position(std::size_t node) const {
        if (node == source_) return src_;
        if (node == target_) return dst_;
        return positions_[node];
    }

    /// Calls `visit(face)` for every face whose closed triangle holds the node.
    template <typename Visit>
    void for_each_face(std::size_t node, Visit&& visit) const {
        if (node < steiner_begin_) {
            for (const std::size_t f : mesh_.vertex_faces(node)) visit(f);
        } else if (node == source_) {
            for (const std::size_t f : src_faces_) visit(f);
        } else if (node == target_) {
            for (const std::size_t f : dst_faces_) visit(f);
        } else if (s_ > 0) {
            const auto& edge = mesh_.edges()[(node - steiner_begin_) / static_cast<std::size_t>(s_)];
            visit(mesh_.half_edges()[edge.half_edge].face);
            if (edge.twin != mesh::kNone) visit(mesh_.half_edges()[edge.twin].face);
        }
    }

    /// Calls `visit(node)` for every node lying on face f, query points included.
    template <typename Visit>
    void for_each_node(std::size_t f, Visit&& visit) const {
        for (const std::size_t v : mesh_.faces()[f]) visit(v);
        for (int c = 0; c < 3; ++c) {
            const std::size_t e = mesh_.half_edges()[3 * f + static_cast<std::size_t>(c)].edge;
            const std::size_t base = steiner_begin_ + e * static_cast<std::size_t>(s_);
            for (int j = 0; j < s_; ++j) visit(base + static_cast<std::size_t>(j));
        }
        if (std::binary_search(src_faces_.begin(), src_faces_.end(), f)) visit(source_);
        if (std::binary_search(dst_faces_.begin(), dst_faces_.end(), f)) visit(target_);
    }

private:
    const mesh::HalfEdgeMesh& mesh_;
    std::span<const double> z_;
    std::vector<double> t_;
    std::vector<Vec3> positions_;  ///< mesh vertices and Steiner points
    int s_;  ///< Steiner points per edge
    std::size_t steiner_begin_ = 0;
    std::size_t source_ = 0;
    std::size_t target_ = 0;
    Vec3 src_;
    Vec3 dst_;
    std::vector<std::size_t> src_faces_;
    std::vector<std::size_t> dst_faces_;
};

std::vector<std::size_t> query_faces(const mesh::HalfEdgeMesh& mesh, const geo::XY& p) {
    auto faces = mesh.faces_containing(p);
    if (faces.empty()) {
        throw GeometryError("point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                            ") lies outside the mesh domain");
    }
    std::sort(faces.begin(), faces.end());
    return faces;
}

double arc_length(const std::vector<Vec3>& polyline) {
    double length = 0.0;
    for (std::size_t i = 1; i < polyline.size(); ++i) length += norm(polyline[i] - polyline[i - 1]);
    return length;
}

std::string format_number(double v, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

std::string render_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows,
                         const std::vector<bool>& right_align) {
    std::vector<std::size_t> width(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    }
    std::ostringstream out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (c > 0) out << "  ";
            const std::string pad(width[c] - cells[c].size(), ' ');
            out << (right_align[c] ? pad + cells[c] : cells[c] + (c + 1 == cells.size() ? "" : pad));
        }
        out << '\n';
    };
    line(header);
    std::vector<std::string> rule;
    for (const std::size_t w : width) rule.emplace_back(w, '-');
    line(rule);
    for (const auto& row : rows) line(row);
    return out.str();
}

std::string describe(const LinearFit& fit) {
    std::ostringstream out;
    out << "slope=" << format_number(fit.slope, 6);
    if (fit.with_intercept) out << " intercept=" << format_number(fit.intercept, 6);
    out << " r2=" << format_number(fit.r2, 4);
    return out.str();
}

}  // namespace

Vec3 surface_point(const mesh::HalfEdgeMesh& mesh, std::span<const double> z, const geo::XY& p) {
    return {p.x, p.y, mesh.interpolate_height(p, z)};
}

GeodesicResult surface_geodesic(const mesh::HalfEdgeMesh& mesh, std::span<const double> z, const geo::XY& src,
                                const geo::XY& dst, int subdivision) {
    if (subdivision < 0) throw ValidationError("subdivision must be >= 0");
    if (z.size() != mesh.vertex_count()) throw ValidationError("height vector does not match the mesh");
    auto src_faces = query_faces(mesh, src);
    auto dst_faces = query_faces(mesh, dst);
    const Vec3 a = surface_point(mesh, z, src);
    const Vec3 b = surface_point(mesh, z, dst);

    GeodesicResult result;
    result.subdivision = subdivision;
    if (src == dst) {
        result.polyline = {a};
        return result;
    }

    SteinerGraph graph(mesh, z, subdivision);
    graph.set_queries(a, std::move(src_faces), b, std::move(dst_faces));

    std::vector<double> dist(graph.node_count(), kInf);
    std::vector<std::size_t> parent(graph.node_count(), mesh::kNone);
    std::vector<char> settled(graph.node_count(), 0);
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    dist[graph.source()] = 0.0;
    queue.emplace(0.0, graph.source());
    while (!queue.empty()) {
        const auto [d, u] = queue.top();
        queue.pop();
        if (settled[u]) continue;
        settled[u] = 1;
        if (u == graph.target()) break;
        const Vec3 pu = graph.position(u);
        graph.for_each_face(u, [&](std::size_t f) {
            graph.for_each_node(f, [&](std::size_t w) {
                if (settled[w]) return;
                const double nd = d + norm(graph.position(w) - pu);
                if (nd < dist[w]) {
                    dist[w] = nd;
                    parent[w] = u;
                    queue.emplace(nd, w);
                }
            });
        });
    }
    if (!settled[graph.target()]) throw GeometryError("no surface path between the query points");

    for (std::size_t node = graph.target(); node != mesh::kNone; node = parent[node]) {
        result.polyline.push_back(graph.position(node));
    }
    std::reverse(result.polyline.begin(), result.polyline.end());
    result.length = arc_length(result.polyline);
    return result;
}

LinearFit fit_latency_predictor(const std::vector<std::pair<double, double>>& samples, bool with_intercept) {
    if (samples.size() < 2) throw ValidationError("latency predictor needs at least two pairs");
    const double x0 = samples.front().first;
    if (std::all_of(samples.begin(), samples.end(), [&](const auto& s) { return s.first == x0; })) {
        throw ValidationError("latency predictor needs at least two distinct distances");
    }
    for (const auto& [x, y] : samples) {
        if (!std::isfinite(x) || !std::isfinite(y)) throw ValidationError("latency predictor sample is not finite");
    }
    const double n = static_cast<double>(samples.size());
    double mean_x = 0.0;
    double mean_y = 0.0;
    for (const auto& [x, y] : samples) {
        mean_x += x;
        mean_y += y;
    }
    mean_x /= n;
    mean_y /= n;

    LinearFit fit;
    fit.with_intercept = with_intercept;
    if (with_intercept) {
        double sxy = 0.0;
        double sxx = 0.0;
        for (const auto& [x, y] : samples) {
            sxy += (x - mean_x) * (y - mean_y);
            sxx += (x - mean_x) * (x - mean_x);
        }
        fit.slope = sxy / sxx;
        fit.intercept = mean_y - fit.slope * mean_x;
    } else {
        double sxy = 0.0;
        double sxx = 0.0;
        for (const auto& [x, y] : samples) {
            sxy += x * y;
            sxx += x * x;
        }
        fit.slope = sxy / sxx;
    }
    double ss_res = 0.0;
    double ss_tot = 0.0;
    for (const auto& [x, y] : samples) {
        const double r = y - fit.predict(x);
        ss_res += r * r;
        ss_tot += (y - mean_y) * (y - mean_y);
    }
    fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;
    return fit;
}

PredictorReport predictor_report(const netgraph::LatencyMatrix& matrix, const netgraph::DelayGraph& graph,
                                 const mesh::HalfEdgeMesh& mesh, std::span<const double> z,
                                 const geo::Projection& projection, const PredictorOptions& options) {
    if (!std::is_sorted(options.epsilon_sweep.begin(), options.epsilon_sweep.end())) {
        throw ValidationError("epsilon sweep must be ascending");
    }
    const netgraph::LatencyMatrix fitted =
        options.tiv_filter ? netgraph::remove_tiv_pairs(matrix, options.tiv_slack_ms) : matrix;

    std::vector<char> in_graph(matrix.size(), 0);
    for (const auto& v : graph.vertices) {
        if (const auto i = matrix.index_of(v.id)) in_graph[*i] = 1;
    }

    PredictorReport report;
    report.tiv_filtered = options.tiv_filter;
    report.subdivision = options.subdivision;
    std::vector<std::pair<double, double>> gcd_samples;
    std::vector<std::pair<double, double>> geo_samples;
    for (const auto& [key, rtt] : fitted.pairs()) {
        if (!in_graph[key.first] || !in_graph[key.second]) continue;
        const auto& pa = matrix.points()[key.first];
        const auto& pb = matrix.points()[key.second];
        PredictorRow row;
        row.a = pa.id;
        row.b = pb.id;
        row.name_a = pa.name;
        row.name_b = pb.name;
        row.rtt_ms = rtt;
        row.d_gcd_km = geo::great_circle_distance(pa.location, pb.location);
        row.d_geo = surface_geodesic(mesh, z, projection.project(pa.location), projection.project(pb.location),
                                     options.subdivision)
                        .length;
        if (!options.epsilon_sweep.empty()) {
            const auto residual = netgraph::compute_residual(matrix, key.first, key.second, options.residual_mode);
            row.epsilon_first_appearance = netgraph::first_appearance(residual.value_ms, options.epsilon_sweep);
        }
        gcd_samples.emplace_back(row.d_gcd_km, rtt);
        geo_samples.emplace_back(row.d_geo, rtt);
        report.rows.push_back(std::move(row));
    }

    report.gcd = fit_latency_predictor(gcd_samples, options.with_intercept);
    report.geo = fit_latency_predictor(geo_samples, options.with_intercept);
    for (auto& row : report.rows) {
        row.delta_gcd = report.gcd.predict(row.d_gcd_km) - row.rtt_ms;
        row.delta_geo = report.geo.predict(row.d_geo) - row.rtt_ms;
    }
    return report;
}

std::string to_json(const PredictorReport& report) { return detail::canonical_dump(detail::to_json_value(report)); }

std::string to_text(const PredictorReport& report) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : report.rows) {
        rows.push_back({r.epsilon_first_appearance ? format_number(*r.epsilon_first_appearance, 1) : "-",
                        r.name_a.empty() ? r.a : r.name_a, r.name_b.empty() ? r.b : r.name_b,
                        format_number(r.delta_gcd, 1), format_number(r.delta_geo, 1), format_number(r.d_gcd_km, 1)});
    }
    std::ostringstream out;
    out << render_table({"eps", "City A", "City B", "delta_GCD", "delta_Geo", "d_GCD"}, rows,
                        {true, false, false, true, true, true});
    out << '\n'
        << "GCD predictor: " << describe(report.gcd) << '\n'
        << "Geo predictor: " << describe(report.geo) << '\n'
        << "TIV filtered: " << (report.tiv_filtered ? "yes" : "no") << ", subdivision " << report.subdivision << '\n';
    return out.str();
}

StabilityReport stability_from_predictions(
    const std::vector<std::map<std::pair<std::string, std::string>, double>>& runs) {
    StabilityReport report;
    report.snapshots = runs.size();
    if (runs.empty()) return report;
    for (const auto& [pair, first] : runs.front()) {
        double lo = first;
        double hi = first;
        bool complete = true;
        for (std::size_t i = 1; i < runs.size() && complete; ++i) {
            const auto it = runs[i].find(pair);
            if (it == runs[i].end()) {
                complete = false;
                break;
            }
            lo = std::min(lo, it->second);
            hi = std::max(hi, it->second);
        }
        if (complete) report.rows.push_back({pair.first, pair.second, lo, hi, hi - lo});
    }
    return report;
}

std::string to_json(const StabilityReport& report) { return detail::canonical_dump(detail::to_json_value(report)); }

std::string to_text(const StabilityReport& report) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : report.rows) {
        rows.push_back({r.a, r.b, format_number(r.min_ms, 2), format_number(r.max_ms, 2), format_number(r.range_ms, 2)});
    }
    std::ostringstream out;
    out << render_table({"A", "B", "min_ms", "max_ms", "range_ms"}, rows, {false, false, true, true, true});
    out << '\n' << "snapshots: " << report.snapshots << '\n';
    return out.str();
}

}  // namespace delayscape::geodesic

namespace delayscape::detail {

Json to_json_value(const geodesic::LinearFit& fit) {
    Json j = Json::object();
    j["slope"] = fit.slope;
    j["intercept"] = fit.intercept;
    j["r2"] = fit.r2;
    j["with_intercept"] = fit.with_intercept;
    return j;
}

Json to_json_value(const geodesic::PredictorReport& report) {
    Json j = Json::object();
    j["tiv_filtered"] = report.tiv_filtered;
    j["subdivision"] = report.subdivision;
    j["gcd"] = to_json_value(report.gcd);
    j["geo"] = to_json_value(report.geo);
    Json rows = Json::array();
    for (const auto& r : report.rows) {
        Json row = Json::object();
        row["a"] = r.a;
        row["b"] = r.b;
        row["name_a"] = r.name_a;
        row["name_b"] = r.name_b;
        row["epsilon_first_appearance"] = optional_number(r.epsilon_first_appearance);
        row["rtt_ms"] = r.rtt_ms;
        row["d_gcd_km"] = r.d_gcd_km;
        row["d_geo"] = r.d_geo;
        row["delta_gcd"] = r.delta_gcd;
        row["delta_geo"] = r.delta_geo;
        rows.push_back(std::move(row));
    }
    j["rows"] = std::move(rows);
    return j;
}

Json to_json_value(const geodesic::StabilityReport& report) {
    Json j = Json::object();
    j["snapshots"] = report.snapshots;
    Json rows = Json::array();
    for (const auto& r : report.rows) {
        Json row = Json::object();
        row["a"] = r.a;
        row["b"] = r.b;
        row["min_ms"] = r.min_ms;
        row["max_ms"] = r.max_ms;
        row["range_ms"] = r.range_ms;
        rows.push_back(std::move(row));
    }
    j["rows"] = std::move(rows);
    return j;
}

geodesic::LinearFit linear_fit_from_json(const Json& j, const std::string& pointer) {
    geodesic::LinearFit fit;
    fit.slope = number_at(field(j, "slope", pointer), child(pointer, "slope"));
    fit.intercept = number_at(field(j, "intercept", pointer), child(pointer, "intercept"));
    fit.r2 = number_at(field(j, "r2", pointer), child(pointer, "r2"));
    fit.with_intercept = bool_at(field(j, "with_intercept", pointer), child(pointer, "with_intercept"));
    return fit;
}

geodesic::PredictorReport predictor_report_from_json(const Json& j, const std::string& pointer) {
    geodesic::PredictorReport report;
    report.tiv_filtered = bool_at(field(j, "tiv_filtered", pointer), child(pointer, "tiv_filtered"));
    report.subdivision =
        static_cast<int>(integer_at(field(j, "subdivision", pointer), child(pointer, "subdivision")));
    report.gcd = linear_fit_from_json(field(j, "gcd", pointer), child(pointer, "gcd"));
    report.geo = linear_fit_from_json(field(j, "geo", pointer), child(pointer, "geo"));
    const std::string rows_ptr = child(pointer, "rows");
    const Json& rows = array_at(field(j, "rows", pointer), rows_ptr);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::string p = child(rows_ptr, i);
        const Json& r = rows[i];
        geodesic::PredictorRow row;
        row.a = string_at(field(r, "a", p), child(p, "a"));
        row.b = string_at(field(r, "b", p), child(p, "b"));
        row.name_a = string_at(field(r, "name_a", p), child(p, "name_a"));
        row.name_b = string_at(field(r, "name_b", p), child(p, "name_b"));
        row.epsilon_first_appearance = optional_number_at(field(r, "epsilon_first_appearance", p),
                                                          child(p, "epsilon_first_appearance"));
        row.rtt_ms = number_at(field(r, "rtt_ms", p), child(p, "rtt_ms"));
        row.d_gcd_km = number_at(field(r, "d_gcd_km", p), child(p, "d_gcd_km"));
        row.d_geo = number_at(field(r, "d_geo", p), child(p, "d_geo"));
        row.delta_gcd = number_at(field(r, "delta_gcd", p), child(p, "delta_gcd"));
        row.delta_geo = number_at(field(r, "delta_geo", p), child(p, "delta_geo"));
        report.rows.push_back(std::move(row));
    }
    return report;
}

geodesic::StabilityReport stability_report_from_json(const Json& j, const std::string& pointer) {
    geodesic::StabilityReport report;
    const auto snapshots = integer_at(field(j, "snapshots", pointer), child(pointer, "snapshots"));
    if (snapshots < 0) throw ParseError("schema error at '" + child(pointer, "snapshots") + "': negative count");
    report.snapshots = static_cast<std::size_t>(snapshots);
    const std::string rows_ptr = child(pointer, "rows");
    const Json& rows = array_at(field(j, "rows", pointer), rows_ptr);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::string p = child(rows_ptr, i);
        const Json& r = rows[i];
        geodesic::StabilityRow row;
        row.a = string_at(field(r, "a", p), child(p, "a"));
        row.b = string_at(field(r, "b", p), child(p, "b"));
        row.min_ms = number_at(field(r, "min_ms", p), child(p, "min_ms"));
        row.max_ms = number_at(field(r, "max_ms", p), child(p, "max_ms"));
        row.range_ms = number_at(field(r, "range_ms", p), child(p, "range_ms"));
        report.rows.push_back(std::move(row));
    }
    return report;
}

}  // namespace delayscape::detail
