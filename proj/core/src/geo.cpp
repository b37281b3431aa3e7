#include "delayscape/geo.hpp"

#include "delayscape/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace delayscape::geo {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

}  // namespace

double normalize_longitude(double lon) {
    double wrapped = std::fmod(lon + 180.0, 360.0);
    if (wrapped < 0.0) wrapped += 360.0;
    return wrapped - 180.0;
}

GeoPoint make_point(double lat, double lon) {
    if (!std::isfinite(lat) || !std::isfinite(lon)) {
        throw ValidationError("non-finite coordinate");
    }
    if (lat < -90.0 || lat > 90.0) {
        throw ValidationError("latitude out of range: " + std::to_string(lat));
    }
    return GeoPoint{lat, normalize_longitude(lon)};
}

double great_circle_distance(const GeoPoint& a, const GeoPoint& b) {
    const double phi1 = a.lat * kDegToRad;
    const double phi2 = b.lat * kDegToRad;
    const double dphi = phi2 - phi1;
    const double dlambda = (b.lon - a.lon) * kDegToRad;
    const double s1 = std::sin(dphi / 2.0);
    const double s2 = std::sin(dlambda / 2.0);
    double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
    h = std::clamp(h, 0.0, 1.0);
    return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

double great_circle_latency(const GeoPoint& a, const GeoPoint& b) {
    return great_circle_distance(a, b) * kFiberMsPerKm;
}

std::string_view to_string(ProjectionKind kind) {
    switch (kind) {
        case ProjectionKind::WebMercator: return "web-mercator";
        case ProjectionKind::Equirectangular: return "equirectangular";
    }
    return "web-mercator";
}

ProjectionKind projection_kind_from_string(std::string_view name) {
    if (name == "web-mercator") return ProjectionKind::WebMercator;
    if (name == "equirectangular") return ProjectionKind::Equirectangular;
    throw ParseError("unknown projection kind: " + std::string(name));
}

XY raw_project(const GeoPoint& p, ProjectionKind kind) {
    const double lambda = p.lon * kDegToRad;
    if (kind == ProjectionKind::Equirectangular) {
        return {lambda, p.lat * kDegToRad};
    }
    if (std::abs(p.lat) >= kMercatorMaxLat) {
        throw ValidationError("latitude outside web-mercator range: " + std::to_string(p.lat));
    }
    const double phi = p.lat * kDegToRad;
    return {lambda, std::log(std::tan(std::numbers::pi / 4.0 + phi / 2.0))};
}

GeoPoint raw_unproject(const XY& q, ProjectionKind kind) {
    const double lon = q.x / kDegToRad;
    if (kind == ProjectionKind::Equirectangular) {
        return {q.y / kDegToRad, lon};
    }
    const double phi = 2.0 * std::atan(std::exp(q.y)) - std::numbers::pi / 2.0;
    return {phi / kDegToRad, lon};
}

Projection Projection::fit(std::span<const GeoPoint> points, ProjectionKind kind,
                           double margin_fraction) {
    if (points.empty()) throw ValidationError("cannot fit a projection to zero points");
    if (!(margin_fraction > 0.0)) throw ValidationError("margin fraction must be positive");
    double min_x = std::numeric_limits<double>::infinity();
    double min_y = min_x;
    double max_x = -min_x;
    double max_y = -min_x;
    for (const auto& p : points) {
        const XY q = raw_project(p, kind);
        min_x = std::min(min_x, q.x);
        max_x = std::max(max_x, q.x);
        min_y = std::min(min_y, q.y);
        max_y = std::max(max_y, q.y);
    }
    Projection proj;
    proj.kind = kind;
    proj.center_x = 0.5 * (min_x + max_x);
    proj.center_y = 0.5 * (min_y + max_y);
    const double extent = std::max(max_x - min_x, max_y - min_y);
    proj.scale = extent > 0.0 ? 1.0 / extent : 1.0;
    proj.margin_fraction = margin_fraction;
    return proj;
}

XY Projection::project(const GeoPoint& p) const {
    const XY raw = raw_project(p, kind);
    return {(raw.x - center_x) * scale + 0.5, (raw.y - center_y) * scale + 0.5};
}

GeoPoint Projection::unproject(const XY& q) const {
    const XY raw{(q.x - 0.5) / scale + center_x, (q.y - 0.5) / scale + center_y};
    return raw_unproject(raw, kind);
}

bool Projection::inside_domain(const XY& q) const {
    return q.x > domain_min() && q.x < domain_max() && q.y > domain_min() && q.y < domain_max();
}

}  // namespace delayscape::geo
