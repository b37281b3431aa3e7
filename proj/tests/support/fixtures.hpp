#pragma once

#include "delayscape/geo.hpp"
#include "delayscape/netgraph.hpp"
#include "delayscape/ricci.hpp"

#include <filesystem>
#include <string>

namespace fixtures {

inline std::filesystem::path path(const std::string& name) {
    return std::filesystem::path(DELAYSCAPE_FIXTURE_DIR) / name;
}

/// Curvature-annotated graph of a fixture at one threshold, with its projection.
struct Network {
    delayscape::netgraph::LatencyMatrix matrix;
    delayscape::netgraph::DelayGraph graph;
    delayscape::geo::Projection projection;
};

inline Network load_network(const std::string& name, double epsilon_ms,
                            delayscape::geo::ProjectionKind kind = delayscape::geo::ProjectionKind::Equirectangular) {
    using namespace delayscape;
    Network n;
    n.matrix = netgraph::load_measurements(path(name));
    n.graph = ricci::curvature_graph(netgraph::threshold_graph(n.matrix, epsilon_ms));
    std::vector<geo::GeoPoint> locations;
    for (const auto& p : n.matrix.points()) locations.push_back(p.location);
    n.projection = geo::Projection::fit(locations, kind);
    return n;
}

/// Three five-node cliques joined in a ring by single bridge links, threshold 10 ms.
inline Network toy() { return load_network("toy.json", 10.0); }

}  // namespace fixtures
