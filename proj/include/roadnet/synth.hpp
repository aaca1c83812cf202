#pragma once

// Procedural road-network worlds with a raster renderer and a classical
// RANSAC baseline detector. Stands in for the proprietary aerial imagery the
// training corpus was sourced from: every byte is a pure function of the
// seeds, so the whole dataset -> prediction -> evaluation loop runs at desk
// scale with known ground truth.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "roadnet/caption.hpp"
#include "roadnet/dataset.hpp"
#include "roadnet/geo.hpp"
#include "roadnet/raster.hpp"
#include "roadnet/rng.hpp"

namespace roadnet {

struct GeoBBox {
    double min_lon = 0.0;
    double min_lat = 0.0;
    double max_lon = 0.0;
    double max_lat = 0.0;
};

// Western-Europe-ish default footprint.
inline GeoBBox default_synth_region() { return GeoBBox{-5.0, 45.0, 15.0, 55.0}; }

struct SynthScene {
    TileId tile;
    std::vector<GeoLineString> roads_geo;  // 0-4 per tile, each crossing the tile
    std::uint64_t terrain_seed = 0;
};

struct SynthConfig {
    double negative_fraction = 0.40;
    int zoom = 16;
    GeoBBox region = default_synth_region();
    int min_roads = 1;
    int max_roads = 4;
    int min_vertices = 2;
    int max_vertices = 6;
    double min_chord_px = 600.0;   // minimum chord span across the tile
    double jitter_sd_px = 1.2;     // perpendicular jitter of interior vertices
    double max_jitter_px = 2.5;
    double curvature = 0.0;        // reserved knob; chords stay straight at 0
    // Pairs of roads closer than this while nearly parallel confuse any
    // segment detector; such draws are rejected.
    double min_parallel_gap_px = 60.0;
    double min_parallel_angle_deg = 15.0;
    int tile_size = kTileSizePx;
};

struct SynthError : std::runtime_error {
    explicit SynthError(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {

struct ChordSampler {
    const SynthConfig& cfg;
    Rng& rng;

    // A point on the tile border, edge index 0..3 = N, E, S, W.
    Vec2 border_point(int edge) const {
        const double s = static_cast<double>(cfg.tile_size);
        const double t = rng.uniform(0.0, s);
        switch (edge) {
            case 0: return Vec2{t, 0.0};
            case 1: return Vec2{s, t};
            case 2: return Vec2{t, s};
            default: return Vec2{0.0, t};
        }
    }

    static double angle_between_deg(const Vec2& u, const Vec2& v) {
        const double du = std::hypot(u.x, u.y), dv = std::hypot(v.x, v.y);
        if (du == 0.0 || dv == 0.0) return 0.0;
        double c = std::abs(u.x * v.x + u.y * v.y) / (du * dv);
        c = std::clamp(c, -1.0, 1.0);
        return std::acos(c) * 180.0 / kPi;
    }

    static double segment_gap(const Vec2& a0, const Vec2& a1, const Vec2& b0, const Vec2& b1) {
        // Segments that intersect have zero gap.
        auto orient = [](const Vec2& p, const Vec2& q, const Vec2& r) {
            return (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x);
        };
        const double o1 = orient(a0, a1, b0), o2 = orient(a0, a1, b1);
        const double o3 = orient(b0, b1, a0), o4 = orient(b0, b1, a1);
        if (((o1 > 0) != (o2 > 0)) && ((o3 > 0) != (o4 > 0))) return 0.0;
        return std::min(std::min(point_segment_distance(b0, a0, a1),
                                 point_segment_distance(b1, a0, a1)),
                        std::min(point_segment_distance(a0, b0, b1),
                                 point_segment_distance(a1, b0, b1)));
    }

    // One jittered chord across the tile, rejecting draws that sit nearly
    // parallel and close to an already accepted chord.
    std::vector<Vec2> sample(const std::vector<std::array<Vec2, 2>>& accepted) const {
        for (int attempt = 0; attempt < 64; ++attempt) {
            const int e1 = static_cast<int>(rng.uniform_int(0, 3));
            int e2 = static_cast<int>(rng.uniform_int(0, 2));
            if (e2 >= e1) ++e2;  // distinct edges
            const Vec2 a = border_point(e1);
            const Vec2 b = border_point(e2);
            const double len = std::hypot(b.x - a.x, b.y - a.y);
            if (len < cfg.min_chord_px) continue;

            bool ok = true;
            for (const auto& prev : accepted) {
                const Vec2 du{b.x - a.x, b.y - a.y};
                const Vec2 dv{prev[1].x - prev[0].x, prev[1].y - prev[0].y};
                if (angle_between_deg(du, dv) < cfg.min_parallel_angle_deg &&
                    segment_gap(a, b, prev[0], prev[1]) < cfg.min_parallel_gap_px) {
                    ok = false;
                    break;
                }
            }
            if (!ok) continue;

            const int n_vertices =
                static_cast<int>(rng.uniform_int(cfg.min_vertices, cfg.max_vertices));
            const Vec2 dir{(b.x - a.x) / len, (b.y - a.y) / len};
            const Vec2 nrm{-dir.y, dir.x};
            std::vector<Vec2> chord;
            chord.push_back(a);
            const double margin = 2.0;
            for (int k = 1; k + 1 < n_vertices; ++k) {
                const double t = static_cast<double>(k) / (n_vertices - 1) +
                                 rng.uniform(-0.04, 0.04);
                const double off = std::clamp(rng.normal(0.0, cfg.jitter_sd_px),
                                              -cfg.max_jitter_px, cfg.max_jitter_px);
                Vec2 v{a.x + dir.x * t * len + nrm.x * off,
                       a.y + dir.y * t * len + nrm.y * off};
                v.x = std::clamp(v.x, margin, cfg.tile_size - margin);
                v.y = std::clamp(v.y, margin, cfg.tile_size - margin);
                if (!(v == chord.back())) chord.push_back(v);
            }
            if (!(b == chord.back())) chord.push_back(b);
            if (chord.size() < 2) continue;
            return chord;
        }
        return {};  // no acceptable draw; the caller settles for fewer roads
    }
};

inline std::vector<GeoLineString> sample_scene_roads(Rng& rng, const TileId& tile,
                                                     const SynthConfig& cfg) {
    ChordSampler sampler{cfg, rng};
    const int want = static_cast<int>(rng.uniform_int(cfg.min_roads, cfg.max_roads));
    std::vector<std::array<Vec2, 2>> accepted;
    std::vector<GeoLineString> roads;
    for (int r = 0; r < want; ++r) {
        const auto chord = sampler.sample(accepted);
        if (chord.empty()) break;
        accepted.push_back({chord.front(), chord.back()});
        GeoLineString line;
        for (const Vec2& v : chord) {
            const GeoPoint p = pixel_to_geo(v.x, v.y, tile, cfg.tile_size);
            if (line.vertices.empty() || !(line.vertices.back() == p))
                line.vertices.push_back(p);
        }
        if (line.vertices.size() >= 2) roads.push_back(std::move(line));
    }
    return roads;
}

}  // namespace detail

// Deterministic world: exactly round(n_tiles * negative_fraction) scenes carry
// zero roads; positive scenes carry jittered chords. One seeded generator,
// fixed stream order.
inline std::vector<SynthScene> generate_world(std::uint64_t seed, int n_tiles,
                                              const SynthConfig& cfg = {}) {
    if (n_tiles < 1) throw SynthError("n_tiles must be >= 1");
    if (!(cfg.region.min_lon < cfg.region.max_lon && cfg.region.min_lat < cfg.region.max_lat))
        throw SynthError("degenerate region");
    if (!(cfg.negative_fraction >= 0.0 && cfg.negative_fraction <= 1.0))
        throw SynthError("negative_fraction must be in [0, 1]");

    const TileId nw_tile =
        lonlat_to_tile(GeoPoint{cfg.region.min_lon, cfg.region.max_lat}, cfg.zoom);
    const TileId se_tile =
        lonlat_to_tile(GeoPoint{cfg.region.max_lon, cfg.region.min_lat}, cfg.zoom);
    const std::int64_t xs = se_tile.x - nw_tile.x + 1;
    const std::int64_t ys = se_tile.y - nw_tile.y + 1;
    if (xs * ys < n_tiles)
        throw SynthError("degenerate region: only " + std::to_string(xs * ys) +
                         " tiles available for " + std::to_string(n_tiles) + " scenes");

    Rng rng(seed);
    std::vector<TileId> tiles;
    tiles.reserve(static_cast<std::size_t>(n_tiles));
    std::unordered_set<std::uint64_t> used;
    while (tiles.size() < static_cast<std::size_t>(n_tiles)) {
        const std::int64_t x = nw_tile.x + rng.uniform_int(0, xs - 1);
        const std::int64_t y = nw_tile.y + rng.uniform_int(0, ys - 1);
        const auto key = static_cast<std::uint64_t>(x) << 32 | static_cast<std::uint64_t>(y);
        if (used.insert(key).second) tiles.push_back(TileId{cfg.zoom, x, y});
    }

    const auto n_negative =
        static_cast<std::size_t>(std::llround(n_tiles * cfg.negative_fraction));
    std::vector<bool> negative(static_cast<std::size_t>(n_tiles), false);
    for (std::size_t i = 0; i < n_negative && i < negative.size(); ++i) negative[i] = true;
    // Fisher-Yates on the flag vector, same stream as everything else.
    for (std::size_t i = negative.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
        const bool tmp = negative[i - 1];
        negative[i - 1] = negative[j];
        negative[j] = tmp;
    }

    std::vector<SynthScene> scenes;
    scenes.reserve(tiles.size());
    for (std::size_t i = 0; i < tiles.size(); ++i) {
        SynthScene scene;
        scene.tile = tiles[i];
        scene.terrain_seed = rng.next_u64();
        if (!negative[i]) scene.roads_geo = detail::sample_scene_roads(rng, scene.tile, cfg);
        scenes.push_back(std::move(scene));
    }
    return scenes;
}

// Scene for one tile address, derived purely from (world_seed, z, x, y).
// Backs the tile server's generator mode: any URL is answerable and repeated
// requests are byte-identical.
inline SynthScene scene_for_tile(std::uint64_t world_seed, const TileId& tile,
                                 const SynthConfig& cfg = {}) {
    Rng rng(hash_mix(world_seed, static_cast<std::uint64_t>(tile.zoom),
                     static_cast<std::uint64_t>(tile.x), static_cast<std::uint64_t>(tile.y)));
    SynthScene scene;
    scene.tile = tile;
    scene.terrain_seed = rng.next_u64();
    if (rng.next_double() >= cfg.negative_fraction)
        scene.roads_geo = detail::sample_scene_roads(rng, tile, cfg);
    return scene;
}

// ---------------------------------------------------------------------------
// Renderer

struct RenderStyle {
    int road_width_px = 9;
    std::uint8_t road_r = 204, road_g = 204, road_b = 204;  // luma 204
    // Terrain palette endpoints; both keep luma well under 120.
    std::uint8_t soil_r = 94, soil_g = 76, soil_b = 48;
    std::uint8_t grass_r = 58, grass_g = 106, grass_b = 44;
};

namespace detail {

// Two-octave value noise on integer lattices, hashed from the seed.
inline double value_noise(std::uint64_t seed, double x, double y, double cell) {
    const double gx = x / cell, gy = y / cell;
    const auto ix = static_cast<std::int64_t>(std::floor(gx));
    const auto iy = static_cast<std::int64_t>(std::floor(gy));
    auto lattice = [seed](std::int64_t cx, std::int64_t cy) {
        const std::uint64_t h = hash_mix(seed, static_cast<std::uint64_t>(cx),
                                         static_cast<std::uint64_t>(cy));
        return static_cast<double>(h >> 11) * 0x1.0p-53;
    };
    auto smooth = [](double t) { return t * t * (3.0 - 2.0 * t); };
    const double fx = smooth(gx - static_cast<double>(ix));
    const double fy = smooth(gy - static_cast<double>(iy));
    const double v00 = lattice(ix, iy), v10 = lattice(ix + 1, iy);
    const double v01 = lattice(ix, iy + 1), v11 = lattice(ix + 1, iy + 1);
    const double a = v00 + (v10 - v00) * fx;
    const double b = v01 + (v11 - v01) * fx;
    return a + (b - a) * fy;
}

inline void stroke_segment(RasterTile& img, const Vec2& a, const Vec2& b, double half_width,
                           std::uint8_t r, std::uint8_t g, std::uint8_t b_) {
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - half_width - 1)));
    const int x1 = std::min(img.width - 1,
                            static_cast<int>(std::ceil(std::max(a.x, b.x) + half_width + 1)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - half_width - 1)));
    const int y1 = std::min(img.height - 1,
                            static_cast<int>(std::ceil(std::max(a.y, b.y) + half_width + 1)));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x)
            if (point_segment_distance(Vec2{static_cast<double>(x), static_cast<double>(y)}, a,
                                       b) <= half_width)
                img.set_px(x, y, r, g, b_);
}

}  // namespace detail

inline RasterTile render_tile(const SynthScene& scene, const RenderStyle& style = {}) {
    RasterTile img;
    img.width = kTileSizePx;
    img.height = kTileSizePx;
    img.pixels.resize(static_cast<std::size_t>(kTileSizePx) * kTileSizePx * 3);

    const std::uint64_t s1 = hash_mix(scene.terrain_seed, 1);
    const std::uint64_t s2 = hash_mix(scene.terrain_seed, 2);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const double v = 0.65 * detail::value_noise(s1, x, y, 64.0) +
                             0.35 * detail::value_noise(s2, x, y, 16.0);
            const auto lerp = [v](std::uint8_t lo, std::uint8_t hi) {
                return static_cast<std::uint8_t>(std::lround(lo + (hi - lo) * v));
            };
            img.set_px(x, y, lerp(style.soil_r, style.grass_r), lerp(style.soil_g, style.grass_g),
                       lerp(style.soil_b, style.grass_b));
        }
    }

    const double half_width = style.road_width_px / 2.0;
    for (const GeoLineString& road : scene.roads_geo) {
        std::vector<Vec2> px;
        px.reserve(road.vertices.size());
        for (const GeoPoint& p : road.vertices) px.push_back(geo_to_pixel(p, scene.tile));
        for (std::size_t i = 1; i < px.size(); ++i)
            detail::stroke_segment(img, px[i - 1], px[i], half_width, style.road_r, style.road_g,
                                   style.road_b);
    }
    return img;
}

// ---------------------------------------------------------------------------
// Baseline detector

struct DetectParams {
    double lum_threshold = 160.0;
    double band_px = 6.0;
    int max_roads = 4;
    int min_inliers = 400;
    std::uint64_t seed = 0;
    int iterations = 300;       // RANSAC samples per accepted segment
    double min_pair_dist = 40.0;  // minimum sample-pair separation
};

namespace detail {

struct FittedLine {
    Vec2 point;  // a point on the line
    Vec2 dir;    // unit direction
    double dist(const Vec2& p) const {
        return std::abs((p.x - point.x) * -dir.y + (p.y - point.y) * dir.x);
    }
    double coord(const Vec2& p) const {
        return (p.x - point.x) * dir.x + (p.y - point.y) * dir.y;
    }
};

// Total-least-squares line through a point set (principal axis).
inline FittedLine fit_line(const std::vector<Vec2>& pts, const std::vector<int>& idx) {
    double mx = 0.0, my = 0.0;
    for (int i : idx) {
        mx += pts[static_cast<std::size_t>(i)].x;
        my += pts[static_cast<std::size_t>(i)].y;
    }
    mx /= static_cast<double>(idx.size());
    my /= static_cast<double>(idx.size());
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (int i : idx) {
        const double dx = pts[static_cast<std::size_t>(i)].x - mx;
        const double dy = pts[static_cast<std::size_t>(i)].y - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    const double theta = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
    return FittedLine{Vec2{mx, my}, Vec2{std::cos(theta), std::sin(theta)}};
}

// Fraction of 16 px bins along the extent that contain at least one inlier.
// Rejects "ghost" lines threading two separate strokes.
inline double extent_occupancy(const FittedLine& line, const std::vector<Vec2>& pts,
                               const std::vector<int>& idx) {
    double tmin = 1e300, tmax = -1e300;
    for (int i : idx) {
        const double t = line.coord(pts[static_cast<std::size_t>(i)]);
        tmin = std::min(tmin, t);
        tmax = std::max(tmax, t);
    }
    const double span = tmax - tmin;
    if (span <= 16.0) return 1.0;
    const int bins = static_cast<int>(std::ceil(span / 16.0));
    std::vector<char> hit(static_cast<std::size_t>(bins), 0);
    for (int i : idx) {
        const double t = line.coord(pts[static_cast<std::size_t>(i)]);
        auto b = static_cast<int>((t - tmin) / span * bins);
        b = std::clamp(b, 0, bins - 1);
        hit[static_cast<std::size_t>(b)] = 1;
    }
    int occupied = 0;
    for (char h : hit) occupied += h;
    return static_cast<double>(occupied) / bins;
}

}  // namespace detail

// Thresholds bright pixels and iteratively fits straight segments by seeded
// RANSAC, removing inliers after each accepted fit. Each accepted segment
// spans its inlier extent and becomes a 2-vertex road.
inline Caption baseline_detect(const RasterTile& img, const DetectParams& params = {}) {
    std::vector<Vec2> pts;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            if (img.luminance(x, y) >= params.lum_threshold)
                pts.push_back(Vec2{static_cast<double>(x), static_cast<double>(y)});

    Rng rng(params.seed);
    std::vector<char> removed(pts.size(), 0);
    std::vector<int> active;
    active.reserve(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) active.push_back(static_cast<int>(i));

    std::vector<PixelPolyline> roads;
    for (int round = 0; round < params.max_roads; ++round) {
        if (static_cast<int>(active.size()) < params.min_inliers) break;

        detail::FittedLine best{};
        int best_count = 0;
        for (int it = 0; it < params.iterations; ++it) {
            const auto ia = static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(active.size()) - 1));
            const auto ib = static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(active.size()) - 1));
            const Vec2& a = pts[static_cast<std::size_t>(active[ia])];
            const Vec2& b = pts[static_cast<std::size_t>(active[ib])];
            const double len = std::hypot(b.x - a.x, b.y - a.y);
            if (len < params.min_pair_dist) continue;
            const detail::FittedLine cand{a, Vec2{(b.x - a.x) / len, (b.y - a.y) / len}};
            int count = 0;
            for (int i : active)
                if (cand.dist(pts[static_cast<std::size_t>(i)]) <= params.band_px) ++count;
            if (count > best_count) {
                best_count = count;
                best = cand;
            }
        }
        if (best_count < params.min_inliers) break;

        // Refine with a least-squares fit over the sample consensus, then
        // re-collect inliers against the refined line.
        std::vector<int> inliers;
        for (int i : active)
            if (best.dist(pts[static_cast<std::size_t>(i)]) <= params.band_px) inliers.push_back(i);
        const detail::FittedLine refined = detail::fit_line(pts, inliers);
        inliers.clear();
        for (int i : active)
            if (refined.dist(pts[static_cast<std::size_t>(i)]) <= params.band_px)
                inliers.push_back(i);
        if (static_cast<int>(inliers.size()) < params.min_inliers) break;
        if (detail::extent_occupancy(refined, pts, inliers) < 0.6) break;

        double tmin = 1e300, tmax = -1e300;
        for (int i : inliers) {
            const double t = refined.coord(pts[static_cast<std::size_t>(i)]);
            tmin = std::min(tmin, t);
            tmax = std::max(tmax, t);
        }
        const std::vector<Vec2> seg{
            Vec2{refined.point.x + refined.dir.x * tmin, refined.point.y + refined.dir.y * tmin},
            Vec2{refined.point.x + refined.dir.x * tmax, refined.point.y + refined.dir.y * tmax}};
        if (auto q = quantize_polyline(seg)) roads.push_back(std::move(*q));

        for (int i : inliers) removed[static_cast<std::size_t>(i)] = 1;
        std::vector<int> next;
        next.reserve(active.size() - inliers.size());
        for (int i : active)
            if (!removed[static_cast<std::size_t>(i)]) next.push_back(i);
        active = std::move(next);
    }

    if (roads.empty()) return Caption::no_roads();
    std::sort(roads.begin(), roads.end(), road_order_less);
    return Caption::with_roads(std::move(roads));
}

// ---------------------------------------------------------------------------
// Scenes -> dataset records

inline std::pair<std::vector<InstructionPair>, std::vector<GroundTruthRecord>> build_pairs_from_scenes(
    std::span<const SynthScene> scenes, CaptionSchema schema, const BuildConfig& cfg = {}) {
    if (scenes.empty()) throw DatasetError(DatasetError::Kind::EmptyInput, "no scenes");
    std::vector<InstructionPair> pairs;
    std::vector<GroundTruthRecord> gts;
    pairs.reserve(scenes.size());
    gts.reserve(scenes.size());
    for (const SynthScene& scene : scenes) {
        auto roads = tile_roads(scene.roads_geo, scene.tile, cfg);
        const std::string id = to_image_id(scene.tile);
        pairs.push_back({id, serialize_caption(caption_for_roads(roads, schema))});
        gts.push_back({id, scene.tile, std::move(roads)});
    }
    detail::sort_by_image_id(pairs, gts);
    return {std::move(pairs), std::move(gts)};
}

}  // namespace roadnet
