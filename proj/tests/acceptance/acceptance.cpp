// Acceptance suite: runs every toolkit-level criterion at its stated
// tolerance and prints one pass/fail line per criterion. Exits nonzero if
// any criterion fails.

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "roadnet/dataset.hpp"
#include "roadnet/eval.hpp"
#include "roadnet/png_io.hpp"
#include "roadnet/synth.hpp"
#include "roadnet/tile_service.hpp"

#include "../oracles.hpp"

namespace fs = std::filesystem;
using namespace roadnet;
using Clock = std::chrono::steady_clock;

namespace {

const std::string kCli = ROADNET_CLI_PATH;
const fs::path kFixtures = ROADNET_FIXTURES_DIR;

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void expect(bool ok, const std::string& what) {
    if (!ok) throw Failure(what);
}

struct CmdResult {
    int exit_code = -1;
    std::string output;
};

CmdResult run_cmd(const std::string& cmd) {
    CmdResult result;
    FILE* pipe = ::popen((cmd + " 2>&1").c_str(), "r");
    if (!pipe) throw Failure("popen failed for: " + cmd);
    char buf[4096];
    while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) result.output.append(buf, n);
    const int status = ::pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

fs::path temp_root() {
    static const fs::path root =
        fs::temp_directory_path() / ("roadnet_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(root);
    return root;
}

// --------------------------------------------------------------------------

std::string criterion1_captions() {
    const auto t0 = Clock::now();
    const Caption one = Caption::with_roads({PixelPolyline{{{219, 114}, {283, 271}}}});
    expect(serialize_caption(one) ==
               "Found 1 road. Image coordinates are as follows: [[(219, 114), (283, 271)]]",
           "one-road golden string mismatch");
    const Caption two = Caption::with_roads({PixelPolyline{{{0, 775}, {0, 731}, {644, 28}}},
                                             PixelPolyline{{{365, 0}, {629, 3}, {644, 28}}}});
    expect(serialize_caption(two) ==
               "Found 2 roads. Image coordinates are as follows: "
               "[[(0, 775), (0, 731), (644, 28)], [(365, 0), (629, 3), (644, 28)]]",
           "two-road golden string mismatch");
    expect(serialize_caption(Caption::no_roads()) == "No roads found", "NoRoads golden mismatch");
    expect(serialize_caption(Caption::presence_found()) == "Found a road",
           "PresenceFound golden mismatch");

    Rng rng(10101);
    for (int i = 0; i < 10000; ++i) {
        Caption c;
        const auto kind = rng.uniform_int(0, 2);
        if (kind == 0) {
            c = Caption::no_roads();
        } else if (kind == 1) {
            c = Caption::presence_found();
        } else {
            std::vector<PixelPolyline> roads;
            const int n_roads = static_cast<int>(rng.uniform_int(1, 4));
            for (int r = 0; r < n_roads; ++r) {
                PixelPolyline line;
                const int n_pts = static_cast<int>(rng.uniform_int(2, 6));
                while (static_cast<int>(line.vertices.size()) < n_pts) {
                    const PixelPoint p{static_cast<int>(rng.uniform_int(0, 1279)),
                                       static_cast<int>(rng.uniform_int(0, 1279))};
                    if (line.vertices.empty() || !(line.vertices.back() == p))
                        line.vertices.push_back(p);
                }
                roads.push_back(std::move(line));
            }
            c = Caption::with_roads(std::move(roads));
        }
        const Caption back = parse_caption(serialize_caption(c));
        expect(back == c, "round-trip mismatch at iteration " + std::to_string(i));
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    expect(secs < 5.0, "round-trip battery took " + std::to_string(secs) + "s (budget 5s)");
    char buf[128];
    std::snprintf(buf, sizeof buf, "4 golden strings + 10000 round-trips in %.2fs", secs);
    return buf;
}

std::string criterion2_table1() {
    const EvalReport r =
        evaluate(kFixtures / "table1_gt.json", kFixtures / "table1_pred.json");
    expect(r.presence.c11 == 61 && r.presence.c12 == 13 && r.presence.c21 == 18 &&
               r.presence.c22 == 8,
           "presence cells differ from 61/13/18/8");
    expect(format_accuracy4(r.presence.accuracy()) == "0.6900", "accuracy at 4 decimals != 0.6900");
    expect(format_accuracy2(r.presence.accuracy()) == "0.69", "accuracy at 2 decimals != 0.69");
    const std::string text = render_text_report(r);
    expect(text.find("accuracy: 0.69") != std::string::npos,
           "text report does not print \"accuracy: 0.69\"");
    return "cells 61/13/18/8, accuracy 0.6900 printed \"0.69\"";
}

std::string criterion3_table2() {
    const EvalReport r =
        evaluate(kFixtures / "table2_gt.json", kFixtures / "table2_pred.json");
    expect(r.count.c11 == 12 && r.count.c12 == 3 && r.count.c21 == 19 && r.count.c22 == 1,
           "count cells differ from 12/3/19/1");
    expect(r.count.total() == 35, "count matrix total != 35");
    expect(format_accuracy4(r.count.accuracy()) == "0.3714", "accuracy at 4 decimals != 0.3714");
    expect(format_accuracy2(r.count.accuracy()) == "0.37", "accuracy at 2 decimals != 0.37");
    return "cells 12/3/19/1, accuracy 13/35 = 0.3714 printed \"0.37\"";
}

std::string criterion4_kernels() {
    const auto t0 = Clock::now();

    // Clipping vs the 10,000-sample parametric oracle.
    Rng rng(20240401);
    for (int trial = 0; trial < 1000; ++trial) {
        const TileRect rect{rng.uniform(0.0, 400.0), rng.uniform(0.0, 400.0),
                            rng.uniform(700.0, 1280.0), rng.uniform(700.0, 1280.0)};
        const int n = static_cast<int>(rng.uniform_int(2, 7));
        std::vector<Vec2> line;
        for (int i = 0; i < n; ++i)
            line.push_back(Vec2{rng.uniform(-400.0, 1700.0), rng.uniform(-400.0, 1700.0)});
        const auto pieces = clip_polyline(line, rect);
        const auto runs = oracle::clip_runs_by_sampling(line, rect, 10000);
        expect(pieces.size() == runs.size(),
               "clip piece count disagrees with oracle at trial " + std::to_string(trial));
        for (std::size_t k = 0; k < pieces.size(); ++k) {
            double gap = 0.0;
            for (const Vec2& s : runs[k].samples)
                gap = std::max(gap, oracle::point_to_polyline(s, pieces[k]));
            expect(gap <= 1e-6, "clip Hausdorff gap " + std::to_string(gap) + " > 1e-6");
        }
    }

    // Simplification: exhaustive deviation check.
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Vec2> line;
        for (int i = 0; i < 50; ++i)
            line.push_back(Vec2{rng.uniform(0.0, 1280.0), rng.uniform(0.0, 1280.0)});
        const auto out = simplify_polyline(line, 2.0);
        const double dev = oracle::max_vertex_deviation(line, out);
        expect(dev <= 2.0 + 1e-12, "simplification deviation " + std::to_string(dev) + " > 2");
    }

    // Chamfer vs the 0.01 px dense-sampling oracle.
    for (int trial = 0; trial < 200; ++trial) {
        auto rand_line = [&](double cx, double cy) {
            PixelPolyline pl;
            const int n = static_cast<int>(rng.uniform_int(2, 4));
            while (static_cast<int>(pl.vertices.size()) < n) {
                const PixelPoint p{
                    static_cast<int>(std::clamp(cx + rng.uniform(-80.0, 80.0), 0.0, 1279.0)),
                    static_cast<int>(std::clamp(cy + rng.uniform(-80.0, 80.0), 0.0, 1279.0))};
                if (pl.vertices.empty() || !(pl.vertices.back() == p)) pl.vertices.push_back(p);
            }
            return pl;
        };
        const double cx = rng.uniform(100.0, 1100.0), cy = rng.uniform(100.0, 1100.0);
        const PixelPolyline a = rand_line(cx, cy);
        const PixelPolyline b = rand_line(cx + rng.uniform(2.0, 40.0), cy + rng.uniform(0.0, 20.0));
        const double fast = polyline_distance(a, b).chamfer;
        const double dense = oracle::dense_chamfer(a, b);
        expect(std::abs(fast - dense) <= 0.1,
               "chamfer disagrees with dense oracle by " + std::to_string(std::abs(fast - dense)));
    }

    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    expect(secs < 60.0, "kernel battery took " + std::to_string(secs) + "s (budget 60s)");
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "1000 clip cases, 200 simplifications, 200 chamfer pairs in %.1fs", secs);
    return buf;
}

std::string criterion5_dataset_composition() {
    const fs::path root = temp_root();
    const fs::path a = root / "ds10k_a";
    const fs::path b = root / "ds10k_b";
    const std::string flags = " --seed 42 synth --n-tiles 10000 --no-render --out ";
    const auto ra = run_cmd(kCli + flags + a.string());
    expect(ra.exit_code == 0, "first synth run failed: " + ra.output);
    const auto rb = run_cmd(kCli + flags + b.string());
    expect(rb.exit_code == 0, "second synth run failed: " + rb.output);

    const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
    const double total = manifest["counts"]["total"].get<double>();
    const double negative = manifest["counts"]["negative"].get<double>();
    const double frac = negative / total;
    expect(total == 10000.0, "total != 10000");
    expect(frac >= 0.38 && frac <= 0.42,
           "negative fraction " + std::to_string(frac) + " outside [0.38, 0.42]");
    expect(manifest["split"]["train"] == 9900 && manifest["split"]["test"] == 100,
           "split is not 9900/100");

    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(a))
        if (e.is_regular_file()) files.push_back(fs::relative(e.path(), a));
    expect(!files.empty(), "no dataset files written");
    for (const auto& rel : files)
        expect(slurp(a / rel) == slurp(b / rel),
               "re-run differs at " + rel.string());

    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "10000 pairs, negative fraction %.4f, split 9900/100, %zu files byte-identical",
                  frac, files.size());
    return buf;
}

std::string criterion6_end_to_end() {
    const auto t0 = Clock::now();
    const auto scenes = generate_world(42, 200);
    const auto [pairs, gts] = build_pairs_from_scenes(scenes, CaptionSchema::Coordinates);

    std::vector<InstructionPair> predictions;
    predictions.reserve(scenes.size());
    DetectParams params;
    params.seed = 42;
    for (const auto& scene : scenes) {
        const RasterTile img = render_tile(scene);
        predictions.push_back(
            {to_image_id(scene.tile), serialize_caption(baseline_detect(img, params))});
    }

    const fs::path root = temp_root();
    const fs::path gt_path = root / "e2e_gt.json";
    const fs::path pred_path = root / "e2e_pred.json";
    std::ofstream(gt_path) << ground_truth_to_json(gts).dump(2) << "\n";
    std::ofstream(pred_path) << pairs_to_json(predictions).dump(2) << "\n";

    const EvalReport r = evaluate(gt_path, pred_path);
    const double presence_acc = r.presence.accuracy();
    const double count_acc = r.count.accuracy();
    const double mean_chamfer = r.geometry.mean_chamfer_px;
    expect(presence_acc >= 0.95,
           "presence accuracy " + format_accuracy4(presence_acc) + " < 0.95");
    expect(count_acc >= 0.80, "count accuracy " + format_accuracy4(count_acc) + " < 0.80");
    expect(r.geometry.matched_pairs > 0, "no matched roads");
    expect(mean_chamfer <= 3.0, "mean chamfer " + std::to_string(mean_chamfer) + " > 3 px");
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    expect(secs < 300.0, "end-to-end loop took " + std::to_string(secs) + "s (budget 300s)");

    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "200 tiles: presence %.4f, count %.4f (both_found), mean chamfer %.2f px in %.0fs",
                  presence_acc, count_acc, mean_chamfer, secs);
    return buf;
}

std::string criterion7_tile_service() {
    const fs::path root = temp_root();
    const fs::path dir = root / "tiles100";
    fs::create_directories(dir);

    std::vector<TileId> tiles;
    for (int i = 0; i < 100; ++i) {
        const TileId t{16, 1000 + i, 2000};
        tiles.push_back(t);
        RasterTile img = RasterTile::filled(1280, 1280,
                                            static_cast<std::uint8_t>(40 + (i % 60)),
                                            static_cast<std::uint8_t>(80),
                                            static_cast<std::uint8_t>(30 + (i % 40)));
        detail::stroke_segment(img, Vec2{0.0, 100.0 + i * 10.0}, Vec2{1279.0, 300.0 + i * 8.0},
                               4.5, 204, 204, 204);
        write_png_file(dir / (to_image_id(t) + ".png"), img);
    }

    TileServer::Options opts;
    opts.dir = dir;
    opts.artificial_delay_ms = 2;
    TileServer server(std::move(opts));

    TileSourceConfig cfg;
    cfg.base_url = server.base_url();
    cfg.max_concurrent_fetches = 8;
    cfg.retry_initial_backoff_ms = 30;

    const auto results = fetch_tiles(cfg, tiles);
    expect(results.size() == 100, "expected 100 results");
    for (std::size_t i = 0; i < results.size(); ++i) {
        expect(results[i].tile == tiles[i], "result order broke at " + std::to_string(i));
        expect(results[i].status == TileFetchResult::Status::Image,
               "tile " + to_image_id(tiles[i]) + " not fetched: " + results[i].detail);
        const auto disk = slurp(dir / (to_image_id(tiles[i]) + ".png"));
        expect(std::string(results[i].png_bytes.begin(), results[i].png_bytes.end()) == disk,
               "payload bytes differ from disk for " + to_image_id(tiles[i]));
    }
    const int peak = server.max_observed_concurrency();
    expect(peak <= 8, "in-flight concurrency " + std::to_string(peak) + " exceeded the bound 8");

    // Scripted transient failure: fail twice, then succeed, attempts = 3.
    server.script_failures(2, 500);
    const auto retried = fetch_tiles(cfg, {tiles[0]});
    expect(retried[0].status == TileFetchResult::Status::Image, "retried fetch did not recover");
    const std::string path = expand_url_template(cfg.url_template, tiles[0]);
    const long long hits = server.request_count(path) - 1;  // one hit from the batch above
    expect(hits == 3, "expected exactly 3 requests, observed " + std::to_string(hits));

    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "100 tiles byte-identical, peak concurrency %d <= 8, fail-twice recovered in 3 requests",
                  peak);
    return buf;
}

std::string criterion8_validation() {
    const fs::path root = temp_root();
    const fs::path clean = root / "validate_clean";
    const auto synth = run_cmd(kCli + " --seed 7 synth --n-tiles 12 --no-render --test-size 0 --out " +
                               clean.string());
    expect(synth.exit_code == 0, "synth for validation fixture failed: " + synth.output);
    const auto ok = run_cmd(kCli + " validate --dataset " + clean.string());
    expect(ok.exit_code == 0, "clean dataset did not validate: " + ok.output);

    struct Corruption {
        const char* name;
        std::function<void(nlohmann::ordered_json& pairs, nlohmann::ordered_json& gt,
                           nlohmann::ordered_json& manifest, std::size_t& index)>
            apply;
        bool expect_manifest = false;
    };

    // Index of a record whose caption declares exactly one road.
    auto find_one_road = [](const nlohmann::ordered_json& pairs) -> std::size_t {
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            const std::string cap = pairs[i]["caption"].get<std::string>();
            if (cap.rfind("Found 1 road.", 0) == 0) return i;
        }
        throw Failure("fixture has no single-road caption");
    };

    const std::vector<Corruption> corruptions{
        {"bad id pattern",
         [](auto& pairs, auto& gt, auto&, std::size_t& index) {
             index = 3;
             pairs[3]["image_id"] = "bad-id";
             gt[3]["image_id"] = "bad-id";
         },
         false},
        {"grammar violation",
         [](auto& pairs, auto&, auto&, std::size_t& index) {
             index = 2;
             pairs[2]["caption"] = "Found two roads";
         },
         false},
        {"count mismatch",
         [&](auto& pairs, auto&, auto&, std::size_t& index) {
             index = find_one_road(pairs);
             pairs[index]["caption"] =
                 "Found 2 roads. Image coordinates are as follows: [[(10, 10), (200, 10)]]";
         },
         false},
        {"out-of-range coordinate",
         [&](auto& pairs, auto&, auto&, std::size_t& index) {
             index = find_one_road(pairs);
             pairs[index]["caption"] =
                 "Found 1 road. Image coordinates are as follows: [[(1400, 10), (200, 10)]]";
         },
         false},
        {"duplicate id",
         [](auto& pairs, auto& gt, auto&, std::size_t& index) {
             index = 5;
             pairs[5] = pairs[4];
             gt[5] = gt[4];
         },
         false},
        {"manifest miscount",
         [](auto&, auto&, auto& manifest, std::size_t&) {
             manifest["counts"]["total"] =
                 manifest["counts"]["total"].template get<long long>() + 1;
         },
         true},
    };

    for (std::size_t c = 0; c < corruptions.size(); ++c) {
        const fs::path dir = root / ("validate_corrupt_" + std::to_string(c));
        fs::remove_all(dir);
        fs::create_directories(dir);
        auto pairs = nlohmann::ordered_json::parse(slurp(clean / "pairs.json"));
        auto gt = nlohmann::ordered_json::parse(slurp(clean / "ground_truth.json"));
        auto manifest = nlohmann::ordered_json::parse(slurp(clean / "manifest.json"));
        std::size_t index = 0;
        corruptions[c].apply(pairs, gt, manifest, index);
        std::ofstream(dir / "pairs.json") << pairs.dump(2) << "\n";
        std::ofstream(dir / "ground_truth.json") << gt.dump(2) << "\n";
        std::ofstream(dir / "manifest.json") << manifest.dump(2) << "\n";

        const auto res = run_cmd(kCli + " validate --dataset " + dir.string());
        expect(res.exit_code == 1, std::string(corruptions[c].name) + ": expected exit 1, got " +
                                       std::to_string(res.exit_code) + "\n" + res.output);
        if (corruptions[c].expect_manifest) {
            expect(res.output.find("manifest") != std::string::npos,
                   std::string(corruptions[c].name) + ": report does not mention the manifest");
        } else {
            const std::string needle = "record " + std::to_string(index);
            expect(res.output.find(needle) != std::string::npos,
                   std::string(corruptions[c].name) + ": report lacks \"" + needle + "\"\n" +
                       res.output);
        }
    }
    return "clean dataset passes; all 6 corruption classes detected at the right record";
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* title;
        std::function<std::string()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "caption grammar goldens and round-trip", criterion1_captions},
        {2, "Table 1 presence-matrix reproduction", criterion2_table1},
        {3, "Table 2 count-matrix reproduction", criterion3_table2},
        {4, "geometry kernels against independent oracles", criterion4_kernels},
        {5, "dataset composition, split and determinism", criterion5_dataset_composition},
        {6, "synthetic end-to-end loop (render, detect, evaluate)", criterion6_end_to_end},
        {7, "tile service round-trip, concurrency bound and retry", criterion7_tile_service},
        {8, "dataset validation catches seeded corruption", criterion8_validation},
    };

    int failures = 0;
    for (const auto& criterion : criteria) {
        std::string detail;
        bool ok = true;
        try {
            detail = criterion.run();
        } catch (const std::exception& e) {
            ok = false;
            detail = e.what();
        }
        std::printf("criterion %d: %s - %s (%s)\n", criterion.id, ok ? "PASS" : "FAIL",
                    criterion.title, detail.c_str());
        std::fflush(stdout);
        if (!ok) ++failures;
    }
    std::error_code ec;
    fs::remove_all(temp_root(), ec);
    if (failures) std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
