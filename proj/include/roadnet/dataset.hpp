#pragma once

// Joins road geometries with tiles into image-instruction pairs, balances the
// negative share, splits train/test and round-trips the on-disk dataset
// layout (pairs.json + ground_truth.json + manifest.json).

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "roadnet/caption.hpp"
#include "roadnet/geo.hpp"
#include "roadnet/rng.hpp"
#include "roadnet/version.hpp"

namespace roadnet {

struct InstructionPair {
    std::string image_id;  // "{x}_{y}"
    std::string caption;   // caption-grammar wire form

    bool operator==(const InstructionPair&) const = default;
};

struct GroundTruthRecord {
    std::string image_id;
    TileId tile;
    std::vector<PixelPolyline> roads;  // empty for negative tiles

    bool operator==(const GroundTruthRecord&) const = default;
};

struct DatasetManifest {
    int zoom = 16;
    int tile_size = kTileSizePx;
    std::string schema = "coordinates";  // "presence" | "coordinates"
    long long total = 0;
    long long positive = 0;
    long long negative = 0;
    long long train_size = 0;
    long long test_size = 0;
    std::uint64_t seed = 0;
    std::string toolkit_version = kToolkitVersion;
};

struct Dataset {
    std::vector<InstructionPair> pairs;
    std::vector<GroundTruthRecord> ground_truth;
    DatasetManifest manifest;
};

struct DatasetError : std::runtime_error {
    enum class Kind {
        MixedZoom,
        EmptyInput,
        Unachievable,
        TestTooLarge,
        Io,
        SchemaViolation,
        BadInput
    };
    Kind kind;
    DatasetError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

struct SchemaViolationError : DatasetError {
    std::size_t index;  // record index within the offending file
    std::string file;
    SchemaViolationError(std::string file_, std::size_t idx, const std::string& reason)
        : DatasetError(Kind::SchemaViolation,
                       file_ + " record " + std::to_string(idx) + ": " + reason),
          index(idx),
          file(std::move(file_)) {}
};

enum class CaptionSchema { Presence, Coordinates };

inline const char* schema_name(CaptionSchema s) {
    return s == CaptionSchema::Presence ? "presence" : "coordinates";
}

inline std::optional<CaptionSchema> schema_from_name(std::string_view s) {
    if (s == "presence") return CaptionSchema::Presence;
    if (s == "coordinates") return CaptionSchema::Coordinates;
    return std::nullopt;
}

struct BuildConfig {
    double simplify_epsilon_px = 2.0;
    double min_road_px = 8.0;
    int tile_size = kTileSizePx;
};

inline std::string to_image_id(const TileId& t) {
    return std::to_string(t.x) + "_" + std::to_string(t.y);
}

inline std::optional<std::pair<std::int64_t, std::int64_t>> parse_image_id(std::string_view s) {
    const auto us = s.find('_');
    if (us == std::string_view::npos || us == 0 || us + 1 >= s.size()) return std::nullopt;
    std::int64_t x = 0, y = 0;
    for (std::size_t i = 0; i < us; ++i) {
        if (s[i] < '0' || s[i] > '9') return std::nullopt;
        x = x * 10 + (s[i] - '0');
        if (x > (std::int64_t{1} << 40)) return std::nullopt;
    }
    for (std::size_t i = us + 1; i < s.size(); ++i) {
        if (s[i] < '0' || s[i] > '9') return std::nullopt;
        y = y * 10 + (s[i] - '0');
        if (y > (std::int64_t{1} << 40)) return std::nullopt;
    }
    return std::make_pair(x, y);
}

// Projects every road into the tile's pixel space, clips to the tile window,
// simplifies and quantizes. Surviving pieces come back in display order.
inline std::vector<PixelPolyline> tile_roads(std::span<const GeoLineString> roads,
                                             const TileId& tile, const BuildConfig& cfg = {}) {
    const TileRect window = full_tile_rect(cfg.tile_size);
    std::vector<PixelPolyline> out;
    std::vector<Vec2> projected;
    for (const GeoLineString& road : roads) {
        projected.clear();
        projected.reserve(road.vertices.size());
        for (const GeoPoint& p : road.vertices)
            projected.push_back(geo_to_pixel(p, tile, cfg.tile_size));
        for (const auto& piece : clip_polyline(projected, window)) {
            const auto slim = simplify_polyline(piece, cfg.simplify_epsilon_px);
            if (auto q = quantize_polyline(slim, cfg.min_road_px, cfg.tile_size))
                out.push_back(std::move(*q));
        }
    }
    std::sort(out.begin(), out.end(), road_order_less);
    return out;
}

inline Caption caption_for_roads(const std::vector<PixelPolyline>& roads, CaptionSchema schema) {
    if (roads.empty()) return Caption::no_roads();
    if (schema == CaptionSchema::Presence) return Caption::presence_found();
    return Caption::with_roads(roads);
}

inline std::pair<std::vector<InstructionPair>, std::vector<GroundTruthRecord>> build_pairs(
    std::span<const GeoLineString> roads, std::span<const TileId> tiles, CaptionSchema schema,
    const BuildConfig& cfg = {}) {
    if (tiles.empty()) throw DatasetError(DatasetError::Kind::EmptyInput, "no tiles to build");
    for (const TileId& t : tiles)
        if (t.zoom != tiles.front().zoom)
            throw DatasetError(DatasetError::Kind::MixedZoom,
                               "tiles span more than one zoom level");

    // Geographic bbox prefilter keeps the tile x road product tractable.
    struct Bounds {
        double min_lon, min_lat, max_lon, max_lat;
    };
    std::vector<Bounds> road_bounds;
    road_bounds.reserve(roads.size());
    for (const GeoLineString& r : roads) {
        Bounds b{180.0, 90.0, -180.0, -90.0};
        for (const GeoPoint& p : r.vertices) {
            b.min_lon = std::min(b.min_lon, p.lon);
            b.max_lon = std::max(b.max_lon, p.lon);
            b.min_lat = std::min(b.min_lat, p.lat);
            b.max_lat = std::max(b.max_lat, p.lat);
        }
        road_bounds.push_back(b);
    }

    std::vector<InstructionPair> pairs;
    std::vector<GroundTruthRecord> gts;
    pairs.reserve(tiles.size());
    gts.reserve(tiles.size());
    std::vector<GeoLineString> candidates;
    for (const TileId& tile : tiles) {
        const auto [nw, se] = tile_geo_bounds(tile);
        candidates.clear();
        for (std::size_t i = 0; i < roads.size(); ++i) {
            const Bounds& b = road_bounds[i];
            if (b.max_lon < nw.lon || b.min_lon > se.lon || b.max_lat < se.lat ||
                b.min_lat > nw.lat)
                continue;
            candidates.push_back(roads[i]);
        }
        auto tr = tile_roads(candidates, tile, cfg);
        const std::string id = to_image_id(tile);
        pairs.push_back({id, serialize_caption(caption_for_roads(tr, schema))});
        gts.push_back({id, tile, std::move(tr)});
    }

    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return pairs[a].image_id < pairs[b].image_id;
    });
    std::vector<InstructionPair> sp;
    std::vector<GroundTruthRecord> sg;
    sp.reserve(pairs.size());
    sg.reserve(gts.size());
    for (std::size_t i : order) {
        sp.push_back(std::move(pairs[i]));
        sg.push_back(std::move(gts[i]));
    }
    return {std::move(sp), std::move(sg)};
}

namespace detail {

inline void sort_by_image_id(std::vector<InstructionPair>& pairs,
                             std::vector<GroundTruthRecord>& gts) {
    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return pairs[a].image_id < pairs[b].image_id; });
    std::vector<InstructionPair> sp;
    std::vector<GroundTruthRecord> sg;
    sp.reserve(pairs.size());
    sg.reserve(gts.size());
    for (std::size_t i : order) {
        sp.push_back(std::move(pairs[i]));
        sg.push_back(std::move(gts[i]));
    }
    pairs = std::move(sp);
    gts = std::move(sg);
}

}  // namespace detail

// Subsamples the over-represented class (uniformly under `seed`) until the
// negative share is as close to `target_negative_fraction` as pure removal
// allows. Never fabricates pairs.
inline std::pair<std::vector<InstructionPair>, std::vector<GroundTruthRecord>> balance_negatives(
    std::vector<InstructionPair> pairs, std::vector<GroundTruthRecord> gts,
    double target_negative_fraction = 0.40, std::uint64_t seed = 0) {
    if (!(target_negative_fraction >= 0.0 && target_negative_fraction < 1.0))
        throw DatasetError(DatasetError::Kind::BadInput,
                           "target negative fraction must be in [0, 1)");
    if (pairs.size() != gts.size())
        throw DatasetError(DatasetError::Kind::BadInput, "pairs/ground-truth size mismatch");
    if (pairs.empty()) throw DatasetError(DatasetError::Kind::EmptyInput, "nothing to balance");

    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < gts.size(); ++i)
        (gts[i].roads.empty() ? neg : pos).push_back(i);
    const double f = target_negative_fraction;
    const auto P = static_cast<double>(pos.size());
    const auto N = static_cast<double>(neg.size());

    if (neg.empty() && f > 0.0)
        throw DatasetError(DatasetError::Kind::Unachievable,
                           "no negative pairs available; target fraction unachievable");
    if (pos.empty() && f < 1.0 && f > 0.0)
        throw DatasetError(DatasetError::Kind::Unachievable,
                           "no positive pairs available; target fraction unachievable");

    auto frac_of = [](double n_keep, double other) {
        const double t = n_keep + other;
        return t > 0.0 ? n_keep / t : 0.0;
    };

    Rng rng(seed);
    std::size_t keep_pos = pos.size(), keep_neg = neg.size();
    const double current = frac_of(N, P);
    if (current > f) {
        // trim negatives toward n = f*P/(1-f)
        const double ideal = f * P / (1.0 - f);
        std::size_t best = neg.size();
        double best_err = std::abs(frac_of(N, P) - f);
        for (double cand : {std::floor(ideal), std::ceil(ideal)}) {
            if (cand < 0.0 || cand > N) continue;
            const double err = std::abs(frac_of(cand, P) - f);
            if (err < best_err) {
                best_err = err;
                best = static_cast<std::size_t>(cand);
            }
        }
        keep_neg = best;
        rng.shuffle(neg);
        neg.resize(keep_neg);
    } else if (current < f) {
        // trim positives toward p = N*(1-f)/f
        const double ideal = N * (1.0 - f) / f;
        std::size_t best = pos.size();
        double best_err = std::abs(frac_of(N, P) - f);
        for (double cand : {std::floor(ideal), std::ceil(ideal)}) {
            if (cand < 0.0 || cand > P) continue;
            const double err = std::abs(N / (cand + N) - f);
            if (err < best_err) {
                best_err = err;
                best = static_cast<std::size_t>(cand);
            }
        }
        keep_pos = best;
        rng.shuffle(pos);
        pos.resize(keep_pos);
    }

    std::vector<std::size_t> keep;
    keep.reserve(pos.size() + neg.size());
    keep.insert(keep.end(), pos.begin(), pos.end());
    keep.insert(keep.end(), neg.begin(), neg.end());
    std::sort(keep.begin(), keep.end());

    std::vector<InstructionPair> out_pairs;
    std::vector<GroundTruthRecord> out_gts;
    out_pairs.reserve(keep.size());
    out_gts.reserve(keep.size());
    for (std::size_t i : keep) {
        out_pairs.push_back(std::move(pairs[i]));
        out_gts.push_back(std::move(gts[i]));
    }
    detail::sort_by_image_id(out_pairs, out_gts);
    return {std::move(out_pairs), std::move(out_gts)};
}

struct DatasetSplit {
    std::vector<InstructionPair> train_pairs;
    std::vector<GroundTruthRecord> train_gts;
    std::vector<InstructionPair> test_pairs;
    std::vector<GroundTruthRecord> test_gts;
};

// Uniform draw without replacement under `seed`; both halves sorted by
// image_id, disjoint and exhaustive.
inline DatasetSplit split_dataset(std::vector<InstructionPair> pairs,
                                  std::vector<GroundTruthRecord> gts, std::size_t test_size = 100,
                                  std::uint64_t seed = 0) {
    if (pairs.size() != gts.size())
        throw DatasetError(DatasetError::Kind::BadInput, "pairs/ground-truth size mismatch");
    if (test_size > pairs.size())
        throw DatasetError(DatasetError::Kind::TestTooLarge,
                           "test size " + std::to_string(test_size) + " exceeds dataset size " +
                               std::to_string(pairs.size()));
    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);

    DatasetSplit split;
    for (std::size_t k = 0; k < order.size(); ++k) {
        const std::size_t i = order[k];
        if (k < test_size) {
            split.test_pairs.push_back(std::move(pairs[i]));
            split.test_gts.push_back(std::move(gts[i]));
        } else {
            split.train_pairs.push_back(std::move(pairs[i]));
            split.train_gts.push_back(std::move(gts[i]));
        }
    }
    detail::sort_by_image_id(split.train_pairs, split.train_gts);
    detail::sort_by_image_id(split.test_pairs, split.test_gts);
    return split;
}

// ---------------------------------------------------------------------------
// On-disk layout

namespace detail {

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DatasetError(DatasetError::Kind::Io, "cannot open " + path.string());
    os << text;
    if (!os) throw DatasetError(DatasetError::Kind::Io, "short write to " + path.string());
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DatasetError(DatasetError::Kind::Io, "cannot open " + path.string());
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DatasetError(DatasetError::Kind::Io, path.string() + ": " + e.what());
    }
    return j;
}

}  // namespace detail

inline nlohmann::ordered_json pairs_to_json(std::span<const InstructionPair> pairs) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const InstructionPair& p : pairs) {
        nlohmann::ordered_json o;
        o["image_id"] = p.image_id;
        o["caption"] = p.caption;
        arr.push_back(std::move(o));
    }
    return arr;
}

inline nlohmann::ordered_json ground_truth_to_json(std::span<const GroundTruthRecord> gts) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const GroundTruthRecord& g : gts) {
        nlohmann::ordered_json o;
        o["image_id"] = g.image_id;
        o["zoom"] = g.tile.zoom;
        o["x"] = g.tile.x;
        o["y"] = g.tile.y;
        nlohmann::ordered_json roads = nlohmann::ordered_json::array();
        for (const PixelPolyline& r : g.roads) {
            nlohmann::ordered_json line = nlohmann::ordered_json::array();
            for (const PixelPoint& p : r.vertices)
                line.push_back(nlohmann::ordered_json::array({p.px, p.py}));
            roads.push_back(std::move(line));
        }
        o["roads"] = std::move(roads);
        arr.push_back(std::move(o));
    }
    return arr;
}

inline nlohmann::ordered_json manifest_to_json(const DatasetManifest& m) {
    nlohmann::ordered_json o;
    o["zoom"] = m.zoom;
    o["tile_size"] = m.tile_size;
    o["schema"] = m.schema;
    o["counts"] = {{"total", m.total}, {"positive", m.positive}, {"negative", m.negative}};
    o["split"] = {{"train", m.train_size}, {"test", m.test_size}};
    o["seed"] = m.seed;
    o["toolkit_version"] = m.toolkit_version;
    return o;
}

inline void write_dataset(std::span<const InstructionPair> pairs,
                          std::span<const GroundTruthRecord> gts, const DatasetManifest& manifest,
                          const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    detail::write_text_file(dir / "pairs.json", pairs_to_json(pairs).dump(2) + "\n");
    detail::write_text_file(dir / "ground_truth.json", ground_truth_to_json(gts).dump(2) + "\n");
    detail::write_text_file(dir / "manifest.json", manifest_to_json(manifest).dump(2) + "\n");
}

struct ValidationIssue {
    std::string file;        // "pairs" | "ground_truth" | "manifest"
    std::ptrdiff_t index;    // record index; -1 for file-level issues
    std::string reason;
};

inline std::vector<InstructionPair> pairs_from_json(const nlohmann::json& arr,
                                                    const std::string& label = "pairs") {
    if (!arr.is_array())
        throw SchemaViolationError(label, 0, "top-level JSON value must be an array");
    std::vector<InstructionPair> out;
    out.reserve(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const auto& o = arr[i];
        if (!o.is_object() || !o.contains("image_id") || !o.contains("caption") ||
            !o["image_id"].is_string() || !o["caption"].is_string())
            throw SchemaViolationError(label, i, "record must carry string image_id and caption");
        out.push_back({o["image_id"].get<std::string>(), o["caption"].get<std::string>()});
    }
    return out;
}

inline std::vector<GroundTruthRecord> ground_truth_from_json(const nlohmann::json& arr) {
    if (!arr.is_array())
        throw SchemaViolationError("ground_truth", 0, "top-level JSON value must be an array");
    std::vector<GroundTruthRecord> out;
    out.reserve(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const auto& o = arr[i];
        if (!o.is_object() || !o.contains("image_id") || !o.contains("zoom") ||
            !o.contains("x") || !o.contains("y") || !o.contains("roads") ||
            !o["image_id"].is_string() || !o["zoom"].is_number_integer() ||
            !o["x"].is_number_integer() || !o["y"].is_number_integer() || !o["roads"].is_array())
            throw SchemaViolationError("ground_truth", i,
                                       "record must carry image_id, zoom, x, y, roads");
        GroundTruthRecord g;
        g.image_id = o["image_id"].get<std::string>();
        g.tile = TileId{o["zoom"].get<int>(), o["x"].get<std::int64_t>(),
                        o["y"].get<std::int64_t>()};
        for (const auto& line : o["roads"]) {
            if (!line.is_array())
                throw SchemaViolationError("ground_truth", i, "road must be an array of [x, y]");
            PixelPolyline pl;
            for (const auto& pt : line) {
                if (!pt.is_array() || pt.size() != 2 || !pt[0].is_number_integer() ||
                    !pt[1].is_number_integer())
                    throw SchemaViolationError("ground_truth", i, "road vertex must be [x, y]");
                pl.vertices.push_back({pt[0].get<int>(), pt[1].get<int>()});
            }
            g.roads.push_back(std::move(pl));
        }
        out.push_back(std::move(g));
    }
    return out;
}

inline DatasetManifest manifest_from_json(const nlohmann::json& o) {
    try {
        DatasetManifest m;
        m.zoom = o.at("zoom").get<int>();
        m.tile_size = o.at("tile_size").get<int>();
        m.schema = o.at("schema").get<std::string>();
        m.total = o.at("counts").at("total").get<long long>();
        m.positive = o.at("counts").at("positive").get<long long>();
        m.negative = o.at("counts").at("negative").get<long long>();
        m.train_size = o.at("split").at("train").get<long long>();
        m.test_size = o.at("split").at("test").get<long long>();
        m.seed = o.at("seed").get<std::uint64_t>();
        m.toolkit_version = o.at("toolkit_version").get<std::string>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaViolationError("manifest", 0, e.what());
    }
}

// Runs every dataset invariant and collects all violations (empty = clean).
inline std::vector<ValidationIssue> validate_dataset(const Dataset& ds) {
    std::vector<ValidationIssue> issues;
    const auto schema = schema_from_name(ds.manifest.schema);
    if (!schema)
        issues.push_back({"manifest", -1, "unknown schema \"" + ds.manifest.schema + "\""});

    if (ds.pairs.size() != ds.ground_truth.size())
        issues.push_back({"ground_truth", -1,
                          "pairs.json and ground_truth.json carry different record counts"});

    std::set<std::string> seen;
    long long positives = 0;
    const std::int64_t tile_limit = ds.manifest.zoom <= kMaxZoom
                                        ? (std::int64_t{1} << ds.manifest.zoom)
                                        : 0;
    for (std::size_t i = 0; i < ds.pairs.size(); ++i) {
        const InstructionPair& p = ds.pairs[i];
        if (!parse_image_id(p.image_id))
            issues.push_back({"pairs", static_cast<std::ptrdiff_t>(i),
                              "image_id \"" + p.image_id + "\" does not match {x}_{y}"});
        if (!seen.insert(p.image_id).second)
            issues.push_back({"pairs", static_cast<std::ptrdiff_t>(i),
                              "duplicate image_id \"" + p.image_id + "\""});
        if (i > 0 && ds.pairs[i - 1].image_id > p.image_id)
            issues.push_back({"pairs", static_cast<std::ptrdiff_t>(i),
                              "records not sorted by image_id"});
        try {
            parse_caption(p.caption);
        } catch (const CaptionError& e) {
            issues.push_back({"pairs", static_cast<std::ptrdiff_t>(i), e.what()});
            continue;
        }
        if (i < ds.ground_truth.size()) {
            const GroundTruthRecord& g = ds.ground_truth[i];
            if (g.image_id != p.image_id)
                issues.push_back({"ground_truth", static_cast<std::ptrdiff_t>(i),
                                  "image_id \"" + g.image_id + "\" does not match pairs entry \"" +
                                      p.image_id + "\""});
            if (g.tile.zoom != ds.manifest.zoom)
                issues.push_back({"ground_truth", static_cast<std::ptrdiff_t>(i),
                                  "tile zoom differs from manifest zoom"});
            if (tile_limit > 0 && (g.tile.x < 0 || g.tile.x >= tile_limit || g.tile.y < 0 ||
                                   g.tile.y >= tile_limit))
                issues.push_back({"ground_truth", static_cast<std::ptrdiff_t>(i),
                                  "tile index outside declared zoom"});
            if (to_image_id(g.tile) != g.image_id)
                issues.push_back({"ground_truth", static_cast<std::ptrdiff_t>(i),
                                  "image_id does not encode the tile x/y"});
            bool roads_ok = true;
            for (const PixelPolyline& r : g.roads) {
                if (r.vertices.size() < 2) {
                    issues.push_back({"ground_truth", static_cast<std::ptrdiff_t>(i),
                                      "road with fewer than 2 vertices"});
                    roads_ok = false;
                    break;
                }
                for (std::size_t v = 0; v < r.vertices.size(); ++v) {
                    const PixelPoint& pt = r.vertices[v];
                    if (pt.px < 0 || pt.px >= ds.manifest.tile_size || pt.py < 0 ||
                        pt.py >= ds.manifest.tile_size) {
                        issues.push_back({"ground_truth", static_cast<std::ptrdiff_t>(i),
                                          "pixel coordinate outside tile"});
                        roads_ok = false;
                        break;
                    }
                    if (v > 0 && r.vertices[v] == r.vertices[v - 1]) {
                        issues.push_back({"ground_truth", static_cast<std::ptrdiff_t>(i),
                                          "consecutive duplicate road vertex"});
                        roads_ok = false;
                        break;
                    }
                }
                if (!roads_ok) break;
            }
            if (!g.roads.empty()) ++positives;
            if (roads_ok && schema) {
                const std::string expect =
                    serialize_caption(caption_for_roads(g.roads, *schema));
                if (expect != p.caption)
                    issues.push_back({"pairs", static_cast<std::ptrdiff_t>(i),
                                      "caption does not match ground-truth geometry (expected \"" +
                                          expect + "\")"});
            }
        }
    }

    const auto total = static_cast<long long>(ds.pairs.size());
    if (ds.manifest.total != total)
        issues.push_back({"manifest", -1,
                          "counts.total = " + std::to_string(ds.manifest.total) +
                              " but dataset carries " + std::to_string(total) + " records"});
    if (ds.manifest.positive != positives)
        issues.push_back({"manifest", -1,
                          "counts.positive = " + std::to_string(ds.manifest.positive) +
                              " but dataset carries " + std::to_string(positives)});
    if (ds.manifest.negative != total - positives)
        issues.push_back({"manifest", -1,
                          "counts.negative = " + std::to_string(ds.manifest.negative) +
                              " but dataset carries " + std::to_string(total - positives)});
    if (ds.manifest.positive + ds.manifest.negative != ds.manifest.total)
        issues.push_back({"manifest", -1, "counts.positive + counts.negative != counts.total"});
    if (ds.manifest.train_size + ds.manifest.test_size != ds.manifest.total)
        issues.push_back({"manifest", -1, "split sizes do not sum to counts.total"});
    return issues;
}

// Reads a dataset directory; with `validate` set, the first invariant
// violation is thrown as SchemaViolationError.
inline Dataset read_dataset(const std::filesystem::path& dir, bool validate = true) {
    Dataset ds;
    ds.pairs = pairs_from_json(detail::read_json_file(dir / "pairs.json"));
    ds.ground_truth = ground_truth_from_json(detail::read_json_file(dir / "ground_truth.json"));
    ds.manifest = manifest_from_json(detail::read_json_file(dir / "manifest.json"));
    if (validate) {
        const auto issues = validate_dataset(ds);
        if (!issues.empty()) {
            const ValidationIssue& v = issues.front();
            throw SchemaViolationError(v.file, v.index < 0 ? 0 : static_cast<std::size_t>(v.index),
                                       v.reason);
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------
// GeoJSON ingestion

struct GeoJsonRoads {
    std::vector<GeoLineString> roads;
    int skipped_features = 0;  // non-LineString features
};

inline GeoJsonRoads read_geojson_roads(const std::filesystem::path& path) {
    const nlohmann::json j = detail::read_json_file(path);
    if (!j.is_object() || j.value("type", "") != "FeatureCollection" || !j.contains("features") ||
        !j["features"].is_array())
        throw DatasetError(DatasetError::Kind::SchemaViolation,
                           path.string() + ": expected a GeoJSON FeatureCollection");
    GeoJsonRoads out;
    const auto& features = j["features"];
    for (std::size_t i = 0; i < features.size(); ++i) {
        const auto& f = features[i];
        if (!f.is_object() || !f.contains("geometry") || !f["geometry"].is_object() ||
            f["geometry"].value("type", "") != "LineString") {
            ++out.skipped_features;
            continue;
        }
        const auto& coords = f["geometry"]["coordinates"];
        if (!coords.is_array() || coords.size() < 2)
            throw SchemaViolationError("geojson", i, "LineString needs >= 2 coordinates");
        GeoLineString line;
        for (const auto& c : coords) {
            if (!c.is_array() || c.size() < 2 || !c[0].is_number() || !c[1].is_number())
                throw SchemaViolationError("geojson", i, "coordinate must be [lon, lat]");
            GeoPoint p{c[0].get<double>(), c[1].get<double>()};
            if (!geo_point_valid(p))
                throw SchemaViolationError("geojson", i,
                                           "coordinate outside the Web Mercator validity band");
            if (line.vertices.empty() || !(line.vertices.back() == p)) line.vertices.push_back(p);
        }
        if (line.vertices.size() < 2)
            throw SchemaViolationError("geojson", i, "LineString collapses to a single point");
        out.roads.push_back(std::move(line));
    }
    return out;
}

}  // namespace roadnet
