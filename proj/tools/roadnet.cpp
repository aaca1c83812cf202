// roadnet: synthesize road-network worlds, serve/fetch aerial tiles, build
// image-instruction datasets, run a classical baseline detector and score
// prediction files against ground truth.
//
// Exit codes: 0 success, 1 data/validation failure, 2 usage/config error.

#include <unistd.h>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "roadnet/dataset.hpp"
#include "roadnet/eval.hpp"
#include "roadnet/png_io.hpp"
#include "roadnet/synth.hpp"
#include "roadnet/tile_service.hpp"
#include "roadnet/version.hpp"

namespace fs = std::filesystem;
using namespace roadnet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDataError = 1;
constexpr int kExitUsageError = 2;

volatile std::sig_atomic_t g_stop_requested = 0;
void on_signal(int) { g_stop_requested = 1; }

struct GlobalOpts {
    std::uint64_t seed = 42;
    int zoom = 16;
    bool verbose = false;
};

struct SynthOpts {
    std::string out;
    int n_tiles = 0;
    double negative_fraction = 0.40;
    std::string schema = "coordinates";
    long long test_size = -1;  // -1: min(100, n/10)
    bool no_render = false;
    std::vector<double> region;  // w,s,e,n
    int road_width_px = 9;
    double epsilon_px = 2.0;
    double min_road_px = 8.0;
};

struct BuildOpts {
    std::string roads_path;
    std::string tiles_from;
    std::vector<double> bbox;  // w,s,e,n
    std::string schema = "coordinates";
    std::string out;
    double epsilon_px = 2.0;
    double min_road_px = 8.0;
    double balance_to = -1.0;  // <0: no balancing
    long long test_size = -1;
};

struct ServeOpts {
    int port = 8080;
    std::string bind = "127.0.0.1";
    std::string dir;
    std::uint64_t world_seed = 0;
    bool have_world_seed = false;
    double negative_fraction = 0.40;
};

struct FetchOpts {
    std::string source;
    std::string tiles_file;
    std::string out;
    std::string url_template = "/tiles/{z}/{x}/{y}.png";
    int max_concurrent = 8;
    int attempts = 3;
    int backoff_ms = 200;
    int timeout_ms = 10000;
    std::string api_key;
};

struct BaselineOpts {
    std::string images;
    std::string out;
    double lum_threshold = 160.0;
    double band_px = 6.0;
    int min_inliers = 400;
    int max_roads = 4;
};

struct EvalOpts {
    std::string gt_path;
    std::string pred_path;
    std::string report_path;
    std::string format = "text";
    std::string count_rule = "both_found";
    std::string strictness = "strict";
    double sample_step_px = 1.0;
    double max_match_chamfer_px = 50.0;
};

struct ValidateOpts {
    std::string dataset;
};

long long auto_test_size(long long requested, long long total) {
    if (requested >= 0) return requested;
    return std::min<long long>(100, total / 10);
}

DatasetManifest make_manifest(const GlobalOpts& g, const std::string& schema,
                              std::span<const GroundTruthRecord> gts, long long train_size,
                              long long test_size) {
    DatasetManifest m;
    m.zoom = g.zoom;
    m.schema = schema;
    m.total = static_cast<long long>(gts.size());
    m.positive = 0;
    for (const auto& gt : gts)
        if (!gt.roads.empty()) ++m.positive;
    m.negative = m.total - m.positive;
    m.train_size = train_size;
    m.test_size = test_size;
    m.seed = g.seed;
    return m;
}

// Writes the root dataset plus train/ and test/ subdirectories.
void write_split_dataset(const GlobalOpts& g, const std::string& schema,
                         const std::vector<InstructionPair>& pairs,
                         const std::vector<GroundTruthRecord>& gts, long long test_size,
                         const fs::path& out) {
    const auto split = split_dataset(pairs, gts, static_cast<std::size_t>(test_size), g.seed);
    const auto train_n = static_cast<long long>(split.train_pairs.size());
    const auto test_n = static_cast<long long>(split.test_pairs.size());
    write_dataset(pairs, gts, make_manifest(g, schema, gts, train_n, test_n), out);
    write_dataset(split.train_pairs, split.train_gts,
                  make_manifest(g, schema, split.train_gts, train_n, 0), out / "train");
    if (test_n > 0)
        write_dataset(split.test_pairs, split.test_gts,
                      make_manifest(g, schema, split.test_gts, 0, test_n), out / "test");
}

GeoBBox bbox_from_flag(const std::vector<double>& v) {
    return GeoBBox{v[0], v[1], v[2], v[3]};
}

int run_synth(const GlobalOpts& g, const SynthOpts& o) {
    SynthConfig cfg;
    cfg.zoom = g.zoom;
    cfg.negative_fraction = o.negative_fraction;
    if (!o.region.empty()) cfg.region = bbox_from_flag(o.region);

    BuildConfig bcfg;
    bcfg.simplify_epsilon_px = o.epsilon_px;
    bcfg.min_road_px = o.min_road_px;

    const auto schema = schema_from_name(o.schema);
    const auto scenes = generate_world(g.seed, o.n_tiles, cfg);
    const auto [pairs, gts] = build_pairs_from_scenes(scenes, *schema, bcfg);
    const long long test_size = auto_test_size(o.test_size, static_cast<long long>(pairs.size()));
    write_split_dataset(g, o.schema, pairs, gts, test_size, o.out);

    if (!o.no_render) {
        RenderStyle style;
        style.road_width_px = o.road_width_px;
        const fs::path images = fs::path(o.out) / "images";
        fs::create_directories(images);
        for (const auto& scene : scenes) {
            const auto name = to_image_id(scene.tile) + ".png";
            write_png_file(images / name, render_tile(scene, style));
            if (g.verbose) std::cout << "rendered " << name << "\n";
        }
    }

    long long negatives = 0;
    for (const auto& gt : gts)
        if (gt.roads.empty()) ++negatives;
    std::cout << "synth: " << pairs.size() << " pairs (" << negatives << " negative) -> " << o.out
              << (o.no_render ? " [no images]" : " [+ images/]") << "\n";
    return kExitOk;
}

std::vector<TileId> tiles_from_dir(const fs::path& dir, int zoom) {
    std::vector<TileId> tiles;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".png") continue;
        if (const auto xy = parse_image_id(entry.path().stem().string()))
            tiles.push_back(TileId{zoom, xy->first, xy->second});
    }
    std::sort(tiles.begin(), tiles.end(), [](const TileId& a, const TileId& b) {
        return std::pair{a.x, a.y} < std::pair{b.x, b.y};
    });
    return tiles;
}

std::vector<TileId> tiles_from_bbox(const GeoBBox& bbox, int zoom) {
    const TileId nw = lonlat_to_tile(GeoPoint{bbox.min_lon, bbox.max_lat}, zoom);
    const TileId se = lonlat_to_tile(GeoPoint{bbox.max_lon, bbox.min_lat}, zoom);
    const std::int64_t count = (se.x - nw.x + 1) * (se.y - nw.y + 1);
    if (count > 262144)
        throw CLI::ValidationError("--bbox",
                                   "bbox spans " + std::to_string(count) +
                                       " tiles at zoom " + std::to_string(zoom) +
                                       "; refusing more than 262144");
    std::vector<TileId> tiles;
    tiles.reserve(static_cast<std::size_t>(count));
    for (std::int64_t x = nw.x; x <= se.x; ++x)
        for (std::int64_t y = nw.y; y <= se.y; ++y) tiles.push_back(TileId{zoom, x, y});
    return tiles;
}

int run_build(const GlobalOpts& g, const BuildOpts& o) {
    const auto geo = read_geojson_roads(o.roads_path);
    if (geo.skipped_features > 0)
        std::cerr << "warning: skipped " << geo.skipped_features
                  << " non-LineString feature(s)\n";

    std::vector<TileId> tiles;
    if (!o.tiles_from.empty())
        tiles = tiles_from_dir(o.tiles_from, g.zoom);
    else
        tiles = tiles_from_bbox(bbox_from_flag(o.bbox), g.zoom);
    if (tiles.empty()) {
        std::cerr << "error: no tiles to build\n";
        return kExitDataError;
    }

    BuildConfig bcfg;
    bcfg.simplify_epsilon_px = o.epsilon_px;
    bcfg.min_road_px = o.min_road_px;
    const auto schema = schema_from_name(o.schema);
    auto [pairs, gts] = build_pairs(geo.roads, tiles, *schema, bcfg);
    if (o.balance_to >= 0.0)
        std::tie(pairs, gts) = balance_negatives(std::move(pairs), std::move(gts), o.balance_to,
                                                 g.seed);
    const long long test_size = auto_test_size(o.test_size, static_cast<long long>(pairs.size()));
    write_split_dataset(g, o.schema, pairs, gts, test_size, o.out);

    long long negatives = 0;
    for (const auto& gt : gts)
        if (gt.roads.empty()) ++negatives;
    std::cout << "build: " << pairs.size() << " pairs (" << negatives << " negative) from "
              << geo.roads.size() << " road(s) -> " << o.out << "\n";
    return kExitOk;
}

int run_serve(const GlobalOpts& g, const ServeOpts& o) {
    TileServer::Options opts;
    opts.bind_address = o.bind;
    opts.port = o.port;
    if (!o.dir.empty()) {
        opts.dir = o.dir;
    } else {
        opts.world_seed = o.world_seed;
        opts.synth.zoom = g.zoom;
        opts.synth.negative_fraction = o.negative_fraction;
        opts.generator_zoom = g.zoom;
    }
    TileServer server(std::move(opts));
    std::cout << "roadnet tile server listening on " << server.base_url() << " (pid " << ::getpid()
              << ")" << std::endl;

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    while (!g_stop_requested) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    server.stop();
    std::cout << "shutting down\n";
    return kExitOk;
}

std::vector<TileId> parse_tiles_file(const fs::path& path, int default_zoom) {
    std::ifstream is(path);
    if (!is) throw CLI::ValidationError("--tiles", "cannot open " + path.string());
    std::vector<TileId> tiles;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream ls(line);
        std::string first;
        if (!(ls >> first)) continue;  // blank
        TileId t;
        if (first.find('_') != std::string::npos) {
            const auto xy = parse_image_id(first);
            if (!xy)
                throw CLI::ValidationError("--tiles", "line " + std::to_string(lineno) +
                                                          ": bad tile id \"" + first + "\"");
            t = TileId{default_zoom, xy->first, xy->second};
        } else {
            std::int64_t x = 0, y = 0;
            int z = 0;
            try {
                z = std::stoi(first);
            } catch (...) {
                throw CLI::ValidationError("--tiles",
                                           "line " + std::to_string(lineno) + ": bad zoom");
            }
            if (!(ls >> x >> y))
                throw CLI::ValidationError("--tiles", "line " + std::to_string(lineno) +
                                                          ": expected \"z x y\" or \"x_y\"");
            t = TileId{z, x, y};
        }
        if (!tile_id_valid(t))
            throw CLI::ValidationError("--tiles", "line " + std::to_string(lineno) +
                                                      ": tile outside its zoom range");
        tiles.push_back(t);
    }
    return tiles;
}

int run_fetch(const GlobalOpts& g, const FetchOpts& o) {
    const auto tiles = parse_tiles_file(o.tiles_file, g.zoom);
    if (tiles.empty()) {
        std::cerr << "error: tile list is empty\n";
        return kExitDataError;
    }
    TileSourceConfig cfg;
    cfg.base_url = o.source;
    cfg.url_template = o.url_template;
    cfg.max_concurrent_fetches = o.max_concurrent;
    cfg.retry_attempts = o.attempts;
    cfg.retry_initial_backoff_ms = o.backoff_ms;
    cfg.timeout_ms = o.timeout_ms;
    cfg.api_key = o.api_key;

    const auto results = fetch_tiles(cfg, tiles);
    const int written = cache_tiles(results, o.out);
    long long not_found = 0, transport = 0, decode = 0;
    for (const auto& r : results) {
        switch (r.status) {
            case TileFetchResult::Status::Image: break;
            case TileFetchResult::Status::NotFound: ++not_found; break;
            case TileFetchResult::Status::TransportError: ++transport; break;
            case TileFetchResult::Status::DecodeError: ++decode; break;
        }
        if (g.verbose && r.status != TileFetchResult::Status::Image)
            std::cerr << to_image_id(r.tile) << ": " << r.detail << "\n";
    }
    std::cout << "fetch: " << written << " image(s) cached, " << not_found << " not found, "
              << transport << " transport error(s), " << decode << " decode error(s)\n";
    return (not_found + transport + decode) == 0 ? kExitOk : kExitDataError;
}

int run_baseline(const GlobalOpts& g, const BaselineOpts& o) {
    DetectParams params;
    params.lum_threshold = o.lum_threshold;
    params.band_px = o.band_px;
    params.min_inliers = o.min_inliers;
    params.max_roads = o.max_roads;
    params.seed = g.seed;

    std::vector<InstructionPair> records;
    for (const auto& entry : fs::directory_iterator(o.images)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".png") continue;
        const auto xy = parse_image_id(entry.path().stem().string());
        if (!xy) continue;
        const RasterTile img = read_png_file(entry.path());
        records.push_back({entry.path().stem().string(),
                           serialize_caption(baseline_detect(img, params))});
        if (g.verbose) std::cout << "detected " << records.back().image_id << "\n";
    }
    if (records.empty()) {
        std::cerr << "error: no {x}_{y}.png images under " << o.images << "\n";
        return kExitDataError;
    }
    std::sort(records.begin(), records.end(),
              [](const InstructionPair& a, const InstructionPair& b) {
                  return a.image_id < b.image_id;
              });
    detail::write_text_file(o.out, pairs_to_json(records).dump(2) + "\n");
    std::cout << "baseline: " << records.size() << " prediction(s) -> " << o.out << "\n";
    return kExitOk;
}

int run_eval(const GlobalOpts&, const EvalOpts& o) {
    EvalConfig cfg;
    cfg.count_rule = *count_rule_from_name(o.count_rule);
    cfg.strictness =
        o.strictness == "lenient" ? ParseStrictness::Lenient : ParseStrictness::Strict;
    cfg.sample_step_px = o.sample_step_px;
    cfg.max_match_chamfer_px = o.max_match_chamfer_px;

    const EvalReport report = evaluate(o.gt_path, o.pred_path, cfg);
    const std::string rendered = o.format == "json" ? report_to_json(report).dump(2) + "\n"
                                                    : render_text_report(report);
    if (o.report_path.empty()) {
        std::cout << rendered;
    } else {
        detail::write_text_file(o.report_path, rendered);
        std::cout << "report written to " << o.report_path << "\n";
    }
    return kExitOk;
}

int run_validate(const GlobalOpts&, const ValidateOpts& o) {
    const Dataset ds = read_dataset(o.dataset, /*validate=*/false);
    const auto issues = validate_dataset(ds);
    if (issues.empty()) {
        std::cout << "ok: " << ds.pairs.size() << " records, " << ds.manifest.positive
                  << " positive / " << ds.manifest.negative << " negative\n";
        return kExitOk;
    }
    for (const auto& issue : issues) {
        if (issue.index < 0)
            std::cout << issue.file << ": " << issue.reason << "\n";
        else
            std::cout << issue.file << " record " << issue.index << ": " << issue.reason << "\n";
    }
    std::cout << issues.size() << " violation(s)\n";
    return kExitDataError;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"roadnet: aerial road-network instruction datasets and evaluation"};
    app.set_version_flag("--version", kToolkitVersion);
    app.set_config("--config", "", "TOML config file (flags override file values)");
    app.allow_config_extras(false);
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--seed", g.seed, "global RNG seed")->capture_default_str();
    app.add_option("--zoom", g.zoom, "tile zoom level")
        ->check(CLI::Range(0, kMaxZoom))
        ->capture_default_str();
    app.add_flag("--verbose", g.verbose, "chatty progress output");

    SynthOpts synth;
    auto* synth_cmd =
        app.add_subcommand("synth", "generate a synthetic world dataset (images + ground truth)");
    synth_cmd->add_option("--out", synth.out, "output dataset directory")->required();
    synth_cmd->add_option("--n-tiles", synth.n_tiles, "number of tiles to generate")
        ->required()
        ->check(CLI::PositiveNumber);
    synth_cmd->add_option("--negative-fraction", synth.negative_fraction,
                          "share of tiles without roads")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    synth_cmd->add_option("--schema", synth.schema, "caption schema")
        ->check(CLI::IsMember({"presence", "coordinates"}))
        ->capture_default_str();
    synth_cmd->add_option("--test-size", synth.test_size,
                          "held-out pairs (default: min(100, n/10))");
    synth_cmd->add_flag("--no-render", synth.no_render, "skip writing PNG tiles");
    synth_cmd->add_option("--region", synth.region, "west,south,east,north bounding box")
        ->delimiter(',')
        ->expected(4);
    synth_cmd->add_option("--road-width", synth.road_width_px, "stroke width in px")
        ->check(CLI::Range(1, 64))
        ->capture_default_str();
    synth_cmd->add_option("--epsilon", synth.epsilon_px, "simplification tolerance in px")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    synth_cmd->add_option("--min-road-px", synth.min_road_px, "minimum road arc length in px")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();

    BuildOpts build;
    auto* build_cmd =
        app.add_subcommand("build", "build instruction pairs from GeoJSON roads and tiles");
    build_cmd->add_option("--roads", build.roads_path, "GeoJSON FeatureCollection of LineStrings")
        ->required()
        ->check(CLI::ExistingFile);
    auto* tiles_from_opt =
        build_cmd->add_option("--tiles-from", build.tiles_from, "directory of {x}_{y}.png tiles")
            ->check(CLI::ExistingDirectory);
    auto* bbox_opt = build_cmd->add_option("--bbox", build.bbox, "west,south,east,north")
                         ->delimiter(',')
                         ->expected(4);
    tiles_from_opt->excludes(bbox_opt);
    build_cmd->add_option("--schema", build.schema, "caption schema")
        ->check(CLI::IsMember({"presence", "coordinates"}))
        ->capture_default_str();
    build_cmd->add_option("--out", build.out, "output dataset directory")->required();
    build_cmd->add_option("--epsilon", build.epsilon_px, "simplification tolerance in px")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    build_cmd->add_option("--min-road-px", build.min_road_px, "minimum road arc length in px")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    build_cmd->add_option("--balance-to", build.balance_to,
                          "subsample toward this negative fraction (off by default)")
        ->check(CLI::Range(0.0, 0.999));
    build_cmd->add_option("--test-size", build.test_size,
                          "held-out pairs (default: min(100, n/10))");

    ServeOpts serve;
    auto* serve_cmd = app.add_subcommand("serve", "run the mock XYZ tile server");
    serve_cmd->add_option("--port", serve.port, "listen port (0 picks a free port)")
        ->check(CLI::Range(0, 65535))
        ->capture_default_str();
    serve_cmd->add_option("--bind", serve.bind, "bind address")->capture_default_str();
    auto* dir_opt = serve_cmd->add_option("--dir", serve.dir, "serve PNG tiles from a directory")
                        ->check(CLI::ExistingDirectory);
    auto* seed_opt = serve_cmd->add_option("--world-seed", serve.world_seed,
                                           "render synthetic tiles from this world seed");
    dir_opt->excludes(seed_opt);
    serve_cmd->add_option("--negative-fraction", serve.negative_fraction,
                          "generator share of empty tiles")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();

    FetchOpts fetch;
    auto* fetch_cmd = app.add_subcommand("fetch", "fetch tiles from an XYZ endpoint");
    fetch_cmd->add_option("--source", fetch.source, "base URL, e.g. http://127.0.0.1:8080")
        ->required();
    fetch_cmd->add_option("--tiles", fetch.tiles_file, "tile list file (\"z x y\" or \"x_y\" lines)")
        ->required()
        ->check(CLI::ExistingFile);
    fetch_cmd->add_option("--out", fetch.out, "cache directory")->required();
    fetch_cmd->add_option("--template", fetch.url_template, "URL path template")
        ->capture_default_str();
    fetch_cmd->add_option("--max-concurrent", fetch.max_concurrent, "in-flight request bound")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    fetch_cmd->add_option("--attempts", fetch.attempts, "total attempts per tile")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    fetch_cmd->add_option("--backoff-ms", fetch.backoff_ms, "initial retry backoff")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    fetch_cmd->add_option("--timeout-ms", fetch.timeout_ms, "per-request timeout")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    fetch_cmd->add_option("--api-key", fetch.api_key,
                          "X-Api-Key header (ROADNET_TILE_API_KEY overrides)");

    BaselineOpts baseline;
    auto* baseline_cmd =
        app.add_subcommand("baseline", "run the RANSAC baseline detector over rendered tiles");
    baseline_cmd->add_option("--images", baseline.images, "directory of {x}_{y}.png tiles")
        ->required()
        ->check(CLI::ExistingDirectory);
    baseline_cmd->add_option("--out", baseline.out, "prediction JSON path")->required();
    baseline_cmd->add_option("--lum-threshold", baseline.lum_threshold, "road luminance threshold")
        ->capture_default_str();
    baseline_cmd->add_option("--band", baseline.band_px, "RANSAC inlier band in px")
        ->capture_default_str();
    baseline_cmd->add_option("--min-inliers", baseline.min_inliers, "minimum inliers per road")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    baseline_cmd->add_option("--max-roads", baseline.max_roads, "maximum roads per tile")
        ->check(CLI::Range(1, 16))
        ->capture_default_str();

    EvalOpts eval_opts;
    auto* eval_cmd = app.add_subcommand("eval", "score predictions against ground truth");
    eval_cmd->add_option("--gt", eval_opts.gt_path, "ground_truth.json")
        ->required()
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--pred", eval_opts.pred_path, "prediction JSON file")
        ->required()
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--report", eval_opts.report_path, "write the report here (else stdout)");
    eval_cmd->add_option("--format", eval_opts.format, "report format")
        ->check(CLI::IsMember({"text", "json"}))
        ->capture_default_str();
    eval_cmd->add_option("--count-rule", eval_opts.count_rule, "count-matrix inclusion rule")
        ->check(CLI::IsMember({"both_found", "gt_found", "all"}))
        ->capture_default_str();
    eval_cmd->add_option("--strictness", eval_opts.strictness, "caption parser strictness")
        ->check(CLI::IsMember({"strict", "lenient"}))
        ->capture_default_str();
    eval_cmd->add_option("--step", eval_opts.sample_step_px, "resampling step in px")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    eval_cmd->add_option("--max-match-chamfer", eval_opts.max_match_chamfer_px,
                         "matching threshold in px")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    ValidateOpts validate;
    auto* validate_cmd = app.add_subcommand("validate", "check every dataset invariant");
    validate_cmd->add_option("--dataset", validate.dataset, "dataset directory")
        ->required()
        ->check(CLI::ExistingDirectory);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsageError;
    }

    if (serve_cmd->parsed()) {
        serve.have_world_seed = seed_opt->count() > 0;
        if (serve.dir.empty() && !serve.have_world_seed) {
            std::cerr << "error: serve needs --dir or --world-seed\n";
            return kExitUsageError;
        }
    }

    try {
        if (synth_cmd->parsed()) return run_synth(g, synth);
        if (build_cmd->parsed()) {
            if (build.tiles_from.empty() && build.bbox.empty()) {
                std::cerr << "error: build needs --tiles-from or --bbox\n";
                return kExitUsageError;
            }
            return run_build(g, build);
        }
        if (serve_cmd->parsed()) return run_serve(g, serve);
        if (fetch_cmd->parsed()) return run_fetch(g, fetch);
        if (baseline_cmd->parsed()) return run_baseline(g, baseline);
        if (eval_cmd->parsed()) return run_eval(g, eval_opts);
        if (validate_cmd->parsed()) return run_validate(g, validate);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsageError;
    } catch (const SynthError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsageError;  // generator parameters come from flags
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDataError;
    }
    return kExitUsageError;
}
