#pragma once

// Tile addressing, Web Mercator transforms, polyline clipping/simplification
// and pixel quantization. All functions are pure; values are freely shareable
// across threads.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace roadnet {

inline constexpr int kTileSizePx = 1280;
inline constexpr int kMaxZoom = 22;
// Latitude band where the Web Mercator projection is defined.
inline constexpr double kMercatorMaxLatDeg = 85.05112878;
inline constexpr double kPi = 3.141592653589793238462643383279502884;

struct GeoPoint {
    double lon = 0.0;  // degrees, [-180, 180)
    double lat = 0.0;  // degrees, [-85.05112878, 85.05112878]

    bool operator==(const GeoPoint&) const = default;
};

inline bool geo_point_valid(const GeoPoint& p) {
    return std::isfinite(p.lon) && std::isfinite(p.lat) &&
           p.lon >= -180.0 && p.lon < 180.0 &&
           p.lat >= -kMercatorMaxLatDeg && p.lat <= kMercatorMaxLatDeg;
}

struct GeoLineString {
    std::vector<GeoPoint> vertices;  // length >= 2, no consecutive duplicates

    bool operator==(const GeoLineString&) const = default;
};

struct TileId {
    int zoom = 0;
    std::int64_t x = 0;
    std::int64_t y = 0;

    bool operator==(const TileId&) const = default;
};

inline bool tile_id_valid(const TileId& t) {
    if (t.zoom < 0 || t.zoom > kMaxZoom) return false;
    const std::int64_t n = std::int64_t{1} << t.zoom;
    return t.x >= 0 && t.x < n && t.y >= 0 && t.y < n;
}

struct PixelPoint {
    int px = 0;  // [0, 1279]
    int py = 0;  // [0, 1279], origin top-left, py grows downward

    bool operator==(const PixelPoint&) const = default;
};

struct PixelPolyline {
    std::vector<PixelPoint> vertices;  // length >= 2, no consecutive duplicates

    bool operator==(const PixelPolyline&) const = default;
};

// Continuous point in tile-local pixel space.
struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    bool operator==(const Vec2&) const = default;
};

// Continuous clipping window in tile-local pixel space; the full tile is
// (0, 0, 1280, 1280).
struct TileRect {
    double min_x = 0.0;
    double min_y = 0.0;
    double max_x = kTileSizePx;
    double max_y = kTileSizePx;
};

inline TileRect full_tile_rect(int tile_size = kTileSizePx) {
    return TileRect{0.0, 0.0, static_cast<double>(tile_size), static_cast<double>(tile_size)};
}

// ---------------------------------------------------------------------------
// Tile math (standard XYZ / slippy-map addressing on Web Mercator)

namespace detail {

// Global fractional tile coordinates at a zoom.
inline double mercator_x(double lon_deg, int zoom) {
    return (lon_deg + 180.0) / 360.0 * static_cast<double>(std::int64_t{1} << zoom);
}

inline double mercator_y(double lat_deg, int zoom) {
    const double phi = lat_deg * kPi / 180.0;
    const double y = (1.0 - std::log(std::tan(phi) + 1.0 / std::cos(phi)) / kPi) / 2.0;
    return y * static_cast<double>(std::int64_t{1} << zoom);
}

inline double lon_from_mercator_x(double x, int zoom) {
    return x / static_cast<double>(std::int64_t{1} << zoom) * 360.0 - 180.0;
}

inline double lat_from_mercator_y(double y, int zoom) {
    const double t = kPi * (1.0 - 2.0 * y / static_cast<double>(std::int64_t{1} << zoom));
    return std::atan(std::sinh(t)) * 180.0 / kPi;
}

}  // namespace detail

inline TileId lonlat_to_tile(const GeoPoint& p, int zoom) {
    if (zoom < 0 || zoom > kMaxZoom) throw std::domain_error("zoom out of range [0, 22]");
    if (!std::isfinite(p.lat) || p.lat < -kMercatorMaxLatDeg || p.lat > kMercatorMaxLatDeg)
        throw std::domain_error("latitude outside Web Mercator band");
    if (!std::isfinite(p.lon) || p.lon < -180.0 || p.lon >= 180.0)
        throw std::domain_error("longitude outside [-180, 180)");
    const std::int64_t n = std::int64_t{1} << zoom;
    auto clamp_idx = [n](double v) {
        auto i = static_cast<std::int64_t>(std::floor(v));
        return std::clamp(i, std::int64_t{0}, n - 1);
    };
    return TileId{zoom, clamp_idx(detail::mercator_x(p.lon, zoom)),
                  clamp_idx(detail::mercator_y(p.lat, zoom))};
}

// Returns {northwest corner, southeast corner}.
inline std::pair<GeoPoint, GeoPoint> tile_geo_bounds(const TileId& t) {
    if (!tile_id_valid(t)) throw std::domain_error("invalid tile id");
    GeoPoint nw{detail::lon_from_mercator_x(static_cast<double>(t.x), t.zoom),
                detail::lat_from_mercator_y(static_cast<double>(t.y), t.zoom)};
    GeoPoint se{detail::lon_from_mercator_x(static_cast<double>(t.x + 1), t.zoom),
                detail::lat_from_mercator_y(static_cast<double>(t.y + 1), t.zoom)};
    return {nw, se};
}

// Continuous, unrounded tile-local pixel coordinates of p in tile t. Values
// outside [0, tile_size) are legal; clipping handles them.
inline Vec2 geo_to_pixel(const GeoPoint& p, const TileId& t, int tile_size = kTileSizePx) {
    const double fx = (detail::mercator_x(p.lon, t.zoom) - static_cast<double>(t.x)) * tile_size;
    const double fy = (detail::mercator_y(p.lat, t.zoom) - static_cast<double>(t.y)) * tile_size;
    return Vec2{fx, fy};
}

inline GeoPoint pixel_to_geo(double fx, double fy, const TileId& t, int tile_size = kTileSizePx) {
    const double gx = static_cast<double>(t.x) + fx / tile_size;
    const double gy = static_cast<double>(t.y) + fy / tile_size;
    return GeoPoint{detail::lon_from_mercator_x(gx, t.zoom),
                    detail::lat_from_mercator_y(gy, t.zoom)};
}

// ---------------------------------------------------------------------------
// Polyline kernels

inline double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = 0.0;
    if (len2 > 0.0) t = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0);
    const double qx = a.x + t * dx - p.x, qy = a.y + t * dy - p.y;
    return std::sqrt(qx * qx + qy * qy);
}

inline double arc_length(std::span<const Vec2> line) {
    double len = 0.0;
    for (std::size_t i = 1; i < line.size(); ++i)
        len += std::hypot(line[i].x - line[i - 1].x, line[i].y - line[i - 1].y);
    return len;
}

inline double polyline_arc_length(const PixelPolyline& line) {
    double len = 0.0;
    for (std::size_t i = 1; i < line.vertices.size(); ++i)
        len += std::hypot(static_cast<double>(line.vertices[i].px - line.vertices[i - 1].px),
                          static_cast<double>(line.vertices[i].py - line.vertices[i - 1].py));
    return len;
}

namespace detail {

// Liang-Barsky against a closed window. Returns false when the segment misses
// the window entirely; otherwise [t0, t1] is the parameter range inside.
inline bool clip_segment(const Vec2& a, const Vec2& b, const TileRect& r, double& t0, double& t1) {
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double p[4] = {-dx, dx, -dy, dy};
    const double q[4] = {a.x - r.min_x, r.max_x - a.x, a.y - r.min_y, r.max_y - a.y};
    t0 = 0.0;
    t1 = 1.0;
    for (int i = 0; i < 4; ++i) {
        if (p[i] == 0.0) {
            if (q[i] < 0.0) return false;  // parallel, fully outside this edge
        } else {
            const double t = q[i] / p[i];
            if (p[i] < 0.0) {
                if (t > t1) return false;
                if (t > t0) t0 = t;
            } else {
                if (t < t0) return false;
                if (t < t1) t1 = t;
            }
        }
    }
    return t0 <= t1;
}

inline Vec2 clamp_to_rect(Vec2 v, const TileRect& r) {
    v.x = std::clamp(v.x, r.min_x, r.max_x);
    v.y = std::clamp(v.y, r.min_y, r.max_y);
    return v;
}

}  // namespace detail

// Clips a polyline to a rectangular window. Each maximal connected run inside
// the (closed) window becomes one piece; boundary vertices are retained; runs
// with fewer than two distinct vertices are dropped. Input order is preserved
// within and across pieces.
inline std::vector<std::vector<Vec2>> clip_polyline(std::span<const Vec2> line,
                                                    const TileRect& rect) {
    constexpr double kWeldEps = 1e-9;
    std::vector<std::vector<Vec2>> pieces;
    std::vector<Vec2> cur;

    auto flush = [&]() {
        if (cur.size() >= 2) {
            bool distinct = false;
            for (std::size_t i = 1; i < cur.size() && !distinct; ++i)
                distinct = cur[i].x != cur[0].x || cur[i].y != cur[0].y;
            if (distinct) pieces.push_back(cur);
        }
        cur.clear();
    };

    for (std::size_t i = 0; i + 1 < line.size(); ++i) {
        const Vec2& a = line[i];
        const Vec2& b = line[i + 1];
        if (a.x == b.x && a.y == b.y) continue;  // keeps the current run open
        double t0, t1;
        if (!detail::clip_segment(a, b, rect, t0, t1)) {
            flush();
            continue;
        }
        const Vec2 pa = detail::clamp_to_rect(
            Vec2{a.x + t0 * (b.x - a.x), a.y + t0 * (b.y - a.y)}, rect);
        const Vec2 pb = detail::clamp_to_rect(
            Vec2{a.x + t1 * (b.x - a.x), a.y + t1 * (b.y - a.y)}, rect);
        if (!cur.empty() &&
            (std::abs(cur.back().x - pa.x) > kWeldEps || std::abs(cur.back().y - pa.y) > kWeldEps)) {
            flush();  // re-entry at a different point: a new piece begins
        }
        if (cur.empty()) cur.push_back(pa);
        if (pb.x != cur.back().x || pb.y != cur.back().y) cur.push_back(pb);
        if (t1 < 1.0) flush();  // exits the window mid-segment
    }
    flush();
    return pieces;
}

// Douglas-Peucker. Endpoints kept; every dropped vertex lies within epsilon_px
// of the simplified line.
inline std::vector<Vec2> simplify_polyline(std::span<const Vec2> line, double epsilon_px) {
    if (epsilon_px < 0.0) throw std::domain_error("epsilon_px must be >= 0");
    const std::size_t n = line.size();
    if (n < 3) return {line.begin(), line.end()};

    std::vector<bool> keep(n, false);
    keep.front() = keep.back() = true;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, n - 1}};
    while (!stack.empty()) {
        auto [lo, hi] = stack.back();
        stack.pop_back();
        if (hi <= lo + 1) continue;
        double dmax = -1.0;
        std::size_t imax = lo;
        for (std::size_t i = lo + 1; i < hi; ++i) {
            const double d = point_segment_distance(line[i], line[lo], line[hi]);
            if (d > dmax) {
                dmax = d;
                imax = i;
            }
        }
        if (dmax > epsilon_px) {
            keep[imax] = true;
            stack.emplace_back(lo, imax);
            stack.emplace_back(imax, hi);
        }
    }
    std::vector<Vec2> out;
    for (std::size_t i = 0; i < n; ++i)
        if (keep[i]) out.push_back(line[i]);
    return out;
}

// Rounds half away from zero, clamps into [0, tile_size-1], collapses
// consecutive duplicates. Returns nothing when fewer than two vertices remain
// or the quantized arc length is below min_road_px.
inline std::optional<PixelPolyline> quantize_polyline(std::span<const Vec2> line,
                                                      double min_road_px = 8.0,
                                                      int tile_size = kTileSizePx) {
    PixelPolyline out;
    for (const Vec2& v : line) {
        PixelPoint p{static_cast<int>(std::llround(v.x)), static_cast<int>(std::llround(v.y))};
        p.px = std::clamp(p.px, 0, tile_size - 1);
        p.py = std::clamp(p.py, 0, tile_size - 1);
        if (out.vertices.empty() || !(out.vertices.back() == p)) out.vertices.push_back(p);
    }
    if (out.vertices.size() < 2) return std::nullopt;
    if (polyline_arc_length(out) < min_road_px) return std::nullopt;
    return out;
}

// Deterministic display order for the roads of one tile: first vertex y, then
// first vertex x, then arc length, then lexicographic as a final tiebreak.
inline bool road_order_less(const PixelPolyline& a, const PixelPolyline& b) {
    const PixelPoint& fa = a.vertices.front();
    const PixelPoint& fb = b.vertices.front();
    if (fa.py != fb.py) return fa.py < fb.py;
    if (fa.px != fb.px) return fa.px < fb.px;
    const double la = polyline_arc_length(a), lb = polyline_arc_length(b);
    if (la != lb) return la < lb;
    return std::lexicographical_compare(
        a.vertices.begin(), a.vertices.end(), b.vertices.begin(), b.vertices.end(),
        [](const PixelPoint& p, const PixelPoint& q) {
            return p.py != q.py ? p.py < q.py : p.px < q.px;
        });
}

}  // namespace roadnet
