#pragma once

#include "delayscape/geo.hpp"

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace delayscape::netgraph {

struct VantagePoint {
    std::string id;
    std::string name;
    geo::GeoPoint location;

    bool operator==(const VantagePoint&) const = default;
};

/// Unordered pair of vantage-point indices, stored with first < second.
struct PairKey {
    std::size_t first = 0;
    std::size_t second = 0;

    static PairKey of(std::size_t a, std::size_t b) { return a < b ? PairKey{a, b} : PairKey{b, a}; }
    auto operator<=>(const PairKey&) const = default;
};

/// Geo-located vantage points and symmetric minimum RTTs between them.
///
/// Points are kept sorted by id, so every derived structure is independent of
/// input order. Missing pairs are allowed.
class LatencyMatrix {
public:
    LatencyMatrix() = default;
    /// Throws ValidationError on duplicate ids.
    explicit LatencyMatrix(std::vector<VantagePoint> points);

    const std::vector<VantagePoint>& points() const { return points_; }
    std::size_t size() const { return points_.size(); }

    std::optional<std::size_t> index_of(std::string_view id) const;
    /// Throws ValidationError naming the id when unknown.
    std::size_t require_index(std::string_view id) const;

    /// Records a measurement; keeps the minimum when the pair already exists.
    /// Throws ValidationError for non-positive or non-finite RTTs and self pairs.
    void add_measurement(std::size_t a, std::size_t b, double rtt_ms);
    void add_measurement(std::string_view a, std::string_view b, double rtt_ms);

    void erase(PairKey key) { rtt_.erase(key); }

    std::optional<double> rtt(std::size_t a, std::size_t b) const;
    bool has(std::size_t a, std::size_t b) const { return rtt(a, b).has_value(); }

    const std::map<PairKey, double>& pairs() const { return rtt_; }
    std::size_t pair_count() const { return rtt_.size(); }

    bool operator==(const LatencyMatrix&) const = default;

private:
    std::vector<VantagePoint> points_;
    std::map<PairKey, double> rtt_;
};

enum class MeasurementFormat { Json, Csv };

/// Parses the measurement JSON schema.
LatencyMatrix load_measurements_json(std::istream& in);
/// Parses `vantage_points.csv` (id,name,lat,lon) and the measurement CSV (src,dst,rtt_ms).
LatencyMatrix load_measurements_csv(std::istream& vantage_points, std::istream& measurements);
/// Dispatches on extension; CSV expects a sibling `vantage_points.csv`.
LatencyMatrix load_measurements(const std::filesystem::path& path);

/// Serializes to the measurement JSON schema (input order = id order).
std::string to_measurement_json(const LatencyMatrix& matrix);

enum class ResidualMode {
    RttMinusTwoGcl,   ///< RTT - 2 GCL
    HalfRttMinusGcl,  ///< RTT / 2 - GCL
};

std::string_view to_string(ResidualMode mode);
ResidualMode residual_mode_from_string(std::string_view name);

struct Residual {
    double value_ms = 0.0;
    bool clamped = false;  ///< raw residual was negative and was clamped to zero
};

/// Residual latency of a measured pair; throws ValidationError when unmeasured.
Residual compute_residual(const LatencyMatrix& matrix, std::size_t a, std::size_t b,
                          ResidualMode mode = ResidualMode::RttMinusTwoGcl);

struct GraphEdge {
    std::size_t u = 0;  ///< u < v
    std::size_t v = 0;
    double residual_ms = 0.0;
    std::optional<double> ricci;
    std::optional<double> epsilon_first_appearance;

    bool operator==(const GraphEdge&) const = default;
};

/// Thresholded, unweighted graph over vantage points with per-edge annotations.
struct DelayGraph {
    std::vector<VantagePoint> vertices;
    std::vector<GraphEdge> edges;  ///< sorted by (u, v)
    double epsilon_ms = 0.0;
    ResidualMode mode = ResidualMode::RttMinusTwoGcl;
    std::size_t clamped_residuals = 0;

    std::vector<std::vector<std::size_t>> adjacency() const;
    std::optional<std::size_t> find_edge(std::size_t a, std::size_t b) const;

    bool operator==(const DelayGraph&) const = default;
};

/// Edge (u, v) exists iff residual(u, v) <= epsilon_ms. Infinite epsilon keeps every pair.
DelayGraph threshold_graph(const LatencyMatrix& matrix, double epsilon_ms,
                           ResidualMode mode = ResidualMode::RttMinusTwoGcl);

/// Smallest sweep value admitting the residual, if any. `sweep` must be ascending.
std::optional<double> first_appearance(double residual_ms, const std::vector<double>& sweep);

/// Single-linkage clusters on great-circle distance; merging stops once the
/// nearest-cluster distance reaches `cutoff_km`. Clusters hold point indices,
/// sorted, and are ordered by their smallest member.
std::vector<std::vector<std::size_t>> single_linkage_clusters(const LatencyMatrix& matrix,
                                                              double cutoff_km);

/// Index of the cluster medoid (minimal summed distance; ties broken by id).
std::size_t cluster_medoid(const LatencyMatrix& matrix, const std::vector<std::size_t>& cluster);

/// Collapses each cluster to its medoid; inter-cluster RTT is the minimum over member pairs.
LatencyMatrix cluster_vantage_points(const LatencyMatrix& matrix, double cutoff_km);

/// A triangle-inequality violation: rtt(long_a, long_b) > rtt(long_a, via) + rtt(via, long_b) + slack.
struct TivTriple {
    std::size_t long_a = 0;
    std::size_t long_b = 0;
    std::size_t via = 0;
    double excess_ms = 0.0;

    bool operator==(const TivTriple&) const = default;
};

std::vector<TivTriple> detect_tivs(const LatencyMatrix& matrix, double slack_ms = 0.0);

/// Greedily drops the pair that is the long side of the most violations until none remain.
LatencyMatrix remove_tiv_pairs(const LatencyMatrix& matrix, double slack_ms = 0.0);

}  // namespace delayscape::netgraph
