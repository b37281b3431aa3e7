#pragma once

#include <span>
#include <string>
#include <string_view>

namespace delayscape::geo {

/// Mean Earth radius (IUGG) used for all great-circle computations.
inline constexpr double kEarthRadiusKm = 6371.0088;
/// Speed of light in vacuum, m/s.
inline constexpr double kSpeedOfLight = 299'792'458.0;
/// Milliseconds of one-way fiber propagation per kilometer: 1 / ((2/3) c).
inline constexpr double kFiberMsPerKm = 1.0e3 / (2.0 / 3.0 * kSpeedOfLight) * 1.0e3;
/// Latitude limit for web-mercator.
inline constexpr double kMercatorMaxLat = 85.05;

struct GeoPoint {
    double lat = 0.0;  ///< degrees, [-90, 90]
    double lon = 0.0;  ///< degrees, [-180, 180)

    bool operator==(const GeoPoint&) const = default;
};

/// Builds a validated point, normalizing longitude into [-180, 180).
/// Throws ValidationError for latitudes outside [-90, 90] or non-finite input.
GeoPoint make_point(double lat, double lon);

double normalize_longitude(double lon);

/// Haversine distance in kilometers.
double great_circle_distance(const GeoPoint& a, const GeoPoint& b);

/// One-way fiber propagation time in milliseconds for the great-circle distance.
double great_circle_latency(const GeoPoint& a, const GeoPoint& b);

inline double distance_to_latency_ms(double km) { return km * kFiberMsPerKm; }

struct XY {
    double x = 0.0;
    double y = 0.0;

    bool operator==(const XY&) const = default;
};

enum class ProjectionKind { WebMercator, Equirectangular };

std::string_view to_string(ProjectionKind kind);
ProjectionKind projection_kind_from_string(std::string_view name);

/// Maps geographic points into the normalized mesh domain.
///
/// The node bounding box (in raw projected units) is centered on (0.5, 0.5)
/// and scaled so its larger side has length 1. The mesh domain adds
/// `margin_fraction` on every side: [-margin, 1 + margin]^2.
struct Projection {
    ProjectionKind kind = ProjectionKind::WebMercator;
    double center_x = 0.0;  ///< raw projected units
    double center_y = 0.0;
    double scale = 1.0;  ///< normalized units per raw projected unit
    double margin_fraction = 0.1;

    /// Fits center and scale to the given points.
    static Projection fit(std::span<const GeoPoint> points, ProjectionKind kind,
                          double margin_fraction = 0.1);

    XY project(const GeoPoint& p) const;
    GeoPoint unproject(const XY& q) const;

    double domain_min() const { return -margin_fraction; }
    double domain_max() const { return 1.0 + margin_fraction; }
    bool inside_domain(const XY& q) const;

    bool operator==(const Projection&) const = default;
};

/// Raw projected coordinates (radians-based) before centering/scaling.
XY raw_project(const GeoPoint& p, ProjectionKind kind);
GeoPoint raw_unproject(const XY& q, ProjectionKind kind);

}  // namespace delayscape::geo
