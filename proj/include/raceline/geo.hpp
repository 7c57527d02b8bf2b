#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace raceline {

constexpr double kEarthRadiusM = 6371000.0;
constexpr double kPi = 3.14159265358979323846;

struct GeoPoint {
    double latitude = 0.0;   // degrees, [-90, 90]
    double longitude = 0.0;  // degrees, [-180, 180]
};

struct PlanarPoint {
    double x = 0.0;  // east, metres
    double y = 0.0;  // north, metres
};

inline double deg2rad(double d) { return d * (kPi / 180.0); }

inline bool geo_valid(const GeoPoint& p) {
    return p.latitude >= -90.0 && p.latitude <= 90.0 && p.longitude >= -180.0 &&
           p.longitude <= 180.0;
}

// Great-circle distance on the fixed-radius sphere.
inline double haversine_m(const GeoPoint& a, const GeoPoint& b) {
    double phi1 = deg2rad(a.latitude), phi2 = deg2rad(b.latitude);
    double dphi = phi2 - phi1;
    double dlam = deg2rad(b.longitude - a.longitude);
    double s1 = std::sin(0.5 * dphi), s2 = std::sin(0.5 * dlam);
    double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
    h = std::min(1.0, std::max(0.0, h));  // guard rounding before asin
    return 2.0 * kEarthRadiusM * std::asin(std::sqrt(h));
}

// Local east/north displacement of p from origin, one haversine arc per axis.
// The east arc runs along the parallel at the mean latitude; for spans under
// 3 km the decomposition error is below 0.1 m.
inline PlanarPoint geo_to_plane(const GeoPoint& p, const GeoPoint& origin) {
    if (!geo_valid(p) || !geo_valid(origin))
        throw std::invalid_argument("geo_to_plane: coordinates out of range");
    double mean_lat = 0.5 * (p.latitude + origin.latitude);
    GeoPoint ea{mean_lat, origin.longitude}, eb{mean_lat, p.longitude};
    double x = haversine_m(ea, eb);
    if (p.longitude < origin.longitude) x = -x;
    GeoPoint na{origin.latitude, origin.longitude}, nb{p.latitude, origin.longitude};
    double y = haversine_m(na, nb);
    if (p.latitude < origin.latitude) y = -y;
    return {x, y};
}

// Inverse of geo_to_plane (exact for the per-axis construction above).
inline GeoPoint plane_to_geo(const PlanarPoint& p, const GeoPoint& origin) {
    double lat = origin.latitude + (p.y / kEarthRadiusM) * (180.0 / kPi);
    double mean_lat = deg2rad(0.5 * (lat + origin.latitude));
    double half = std::sin(std::fabs(p.x) / (2.0 * kEarthRadiusM)) / std::cos(mean_lat);
    double dlam = 2.0 * std::asin(std::min(1.0, half)) * (180.0 / kPi);
    double lon = origin.longitude + (p.x < 0.0 ? -dlam : dlam);
    return {lat, lon};
}

// Rigid rotation about a fixed centre, shared by the outline and every
// competitor point of the same track.
struct PlaneRotation {
    PlanarPoint center{};
    double angle = 0.0;  // radians, applied counter-clockwise

    PlanarPoint apply(const PlanarPoint& p) const {
        double c = std::cos(angle), s = std::sin(angle);
        double dx = p.x - center.x, dy = p.y - center.y;
        return {center.x + c * dx - s * dy, center.y + s * dx + c * dy};
    }
};

struct OrientedOutline {
    std::vector<PlanarPoint> points;
    PlaneRotation rotation;
};

// Rotates the outline about its centroid so the principal axis is horizontal.
// Returns the rotation so the caller can apply it to other points.
inline OrientedOutline normalize_orientation(const std::vector<PlanarPoint>& outline) {
    if (outline.size() < 3)
        throw std::invalid_argument("normalize_orientation: need at least 3 points");
    double mx = 0.0, my = 0.0;
    for (const auto& p : outline) {
        mx += p.x;
        my += p.y;
    }
    mx /= static_cast<double>(outline.size());
    my /= static_cast<double>(outline.size());
    double cxx = 0.0, cyy = 0.0, cxy = 0.0;
    for (const auto& p : outline) {
        double dx = p.x - mx, dy = p.y - my;
        cxx += dx * dx;
        cyy += dy * dy;
        cxy += dx * dy;
    }
    if (cxx + cyy < 1e-9)
        throw std::runtime_error("normalize_orientation: outline has zero spread");
    double theta = 0.5 * std::atan2(2.0 * cxy, cxx - cyy);  // principal axis angle
    PlaneRotation rot{{mx, my}, -theta};
    OrientedOutline out;
    out.rotation = rot;
    out.points.reserve(outline.size());
    for (const auto& p : outline) out.points.push_back(rot.apply(p));
    return out;
}

}  // namespace raceline
