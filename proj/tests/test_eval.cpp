#include <catch2/catch_amalgamated.hpp>

#include <unistd.h>

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "roadnet/eval.hpp"
#include "roadnet/rng.hpp"

using namespace roadnet;

namespace {

GroundTruthRecord gt_record(std::int64_t x, int n_roads) {
    GroundTruthRecord g;
    g.tile = TileId{16, x, 0};
    g.image_id = to_image_id(g.tile);
    for (int r = 0; r < n_roads; ++r)
        g.roads.push_back(PixelPolyline{{{10, 10 + 40 * r}, {200, 10 + 40 * r}}});
    return g;
}

// Ground truth and predictions realizing the published presence matrix
// (cells 61 / 13 / 18 / 8 over 100 pairs).
std::pair<std::vector<GroundTruthRecord>, PredictionSet> presence_fixture() {
    std::vector<GroundTruthRecord> gts;
    PredictionSet preds;
    std::int64_t next = 1000;
    auto add = [&](int n, bool gt_found, bool pred_found) {
        for (int i = 0; i < n; ++i) {
            gts.push_back(gt_record(next, gt_found ? 1 : 0));
            preds.records.push_back(
                {gts.back().image_id, pred_found ? "Found a road" : "No roads found"});
            ++next;
        }
    };
    add(61, true, true);
    add(13, true, false);
    add(18, false, true);
    add(8, false, false);
    return {gts, preds};
}

// Count matrix fixture: cells 12 / 3 / 19 / 1 over 35 both-found pairs.
std::pair<std::vector<GroundTruthRecord>, PredictionSet> count_fixture() {
    std::vector<GroundTruthRecord> gts;
    PredictionSet preds;
    std::int64_t next = 5000;
    const char* one_road =
        "Found 1 road. Image coordinates are as follows: [[(10, 10), (200, 10)]]";
    const char* two_roads =
        "Found 2 roads. Image coordinates are as follows: "
        "[[(10, 10), (200, 10)], [(10, 50), (200, 50)]]";
    auto add = [&](int n, int gt_roads, const char* caption) {
        for (int i = 0; i < n; ++i) {
            gts.push_back(gt_record(next, gt_roads));
            preds.records.push_back({gts.back().image_id, caption});
            ++next;
        }
    };
    add(12, 1, one_road);
    add(3, 1, two_roads);
    add(19, 2, one_road);
    add(1, 2, two_roads);
    return {gts, preds};
}

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& name) {
        path = std::filesystem::temp_directory_path() / (name + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("presence confusion reproduces the published table") {
    const auto [gts, preds] = presence_fixture();
    const EvalReport r = evaluate_records(gts, preds);
    CHECK(r.presence.c11 == 61);
    CHECK(r.presence.c12 == 13);
    CHECK(r.presence.c21 == 18);
    CHECK(r.presence.c22 == 8);
    CHECK(r.presence.total() == 100);
    CHECK(format_accuracy4(r.presence.accuracy()) == "0.6900");
    CHECK(format_accuracy2(r.presence.accuracy()) == "0.69");
    const std::string text = render_text_report(r);
    CHECK(text.find("accuracy: 0.69") != std::string::npos);
}

TEST_CASE("count confusion reproduces the published table") {
    const auto [gts, preds] = count_fixture();
    const EvalReport r = evaluate_records(gts, preds);
    CHECK(r.count.c11 == 12);
    CHECK(r.count.c12 == 3);
    CHECK(r.count.c21 == 19);
    CHECK(r.count.c22 == 1);
    CHECK(r.count.total() == 35);
    CHECK(format_accuracy4(r.count.accuracy()) == "0.3714");
    CHECK(format_accuracy2(r.count.accuracy()) == "0.37");
    CHECK(r.count_inclusion_rule == "both_found");
}

TEST_CASE("perfect predictions score 1.0 everywhere") {
    std::vector<GroundTruthRecord> gts;
    PredictionSet preds;
    for (int i = 0; i < 20; ++i) {
        gts.push_back(gt_record(2000 + i, i % 3));
        preds.records.push_back(
            {gts.back().image_id,
             serialize_caption(caption_for_roads(gts.back().roads, CaptionSchema::Coordinates))});
    }
    const EvalReport r = evaluate_records(gts, preds);
    CHECK(r.presence.c12 == 0);
    CHECK(r.presence.c21 == 0);
    CHECK(r.presence.accuracy() == 1.0);
    CHECK(r.count.accuracy() == 1.0);
    CHECK_THAT(r.geometry.mean_chamfer_px, Catch::Matchers::WithinAbs(0.0, 1e-9));
    CHECK(r.geometry.unmatched_gt == 0);
    CHECK(r.geometry.unmatched_pred == 0);
}

TEST_CASE("all-negative predictions score the negative share") {
    std::vector<GroundTruthRecord> gts;
    PredictionSet preds;
    for (int i = 0; i < 100; ++i) {
        gts.push_back(gt_record(3000 + i, i < 60 ? 1 : 0));
        preds.records.push_back({gts.back().image_id, "No roads found"});
    }
    const EvalReport r = evaluate_records(gts, preds);
    CHECK(r.presence.accuracy() == Catch::Approx(0.40));
}

TEST_CASE("polyline distance basics") {
    const PixelPolyline a{{{0, 0}, {0, 10}}};
    const auto same = polyline_distance(a, a);
    CHECK(same.chamfer == 0.0);
    CHECK(same.endpoint == 0.0);

    const PixelPolyline b{{{3, 0}, {3, 10}}};
    const auto off = polyline_distance(a, b);
    CHECK(off.chamfer == Catch::Approx(3.0));
    CHECK(off.endpoint == Catch::Approx(3.0));

    // Orientation-insensitive endpoints.
    const PixelPolyline rev{{{3, 10}, {3, 0}}};
    CHECK(polyline_distance(a, rev).endpoint == Catch::Approx(3.0));
}

TEST_CASE("chamfer is symmetric and non-negative") {
    Rng rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        auto rand_line = [&]() {
            PixelPolyline pl;
            const int n = static_cast<int>(rng.uniform_int(2, 5));
            while (static_cast<int>(pl.vertices.size()) < n) {
                const PixelPoint p{static_cast<int>(rng.uniform_int(0, 1279)),
                                   static_cast<int>(rng.uniform_int(0, 1279))};
                if (pl.vertices.empty() || !(pl.vertices.back() == p)) pl.vertices.push_back(p);
            }
            return pl;
        };
        const PixelPolyline a = rand_line(), b = rand_line();
        const double ab = polyline_distance(a, b).chamfer;
        const double ba = polyline_distance(b, a).chamfer;
        CHECK(ab == ba);
        CHECK(ab >= 0.0);
    }
}

TEST_CASE("chamfer agrees with the dense-sampling oracle") {
    Rng rng(606);
    for (int trial = 0; trial < 50; ++trial) {
        // Moderate lengths keep the dense oracle affordable.
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
        const PixelPolyline b = rand_line(cx + rng.uniform(2.0, 40.0), cy);
        const double fast = polyline_distance(a, b).chamfer;
        const double dense = oracle::dense_chamfer(a, b);
        CHECK(std::abs(fast - dense) <= 0.1);
    }
}

TEST_CASE("match_roads pairs the obvious and leaves the distant unmatched") {
    const std::vector<PixelPolyline> gt{PixelPolyline{{{0, 0}, {100, 0}}}};
    const std::vector<PixelPolyline> close{PixelPolyline{{{0, 3}, {100, 3}}}};
    CHECK(match_roads(gt, close) == std::vector<std::pair<int, int>>{{0, 0}});
    const std::vector<PixelPolyline> far{PixelPolyline{{{0, 900}, {100, 900}}}};
    CHECK(match_roads(gt, far).empty());
}

TEST_CASE("greedy matching tracks the exhaustive assignment oracle") {
    Rng rng(11);
    for (int trial = 0; trial < 40; ++trial) {
        auto rand_line = [&]() {
            const int y = static_cast<int>(rng.uniform_int(0, 1200));
            const int x0 = static_cast<int>(rng.uniform_int(0, 600));
            return PixelPolyline{{{x0, y}, {x0 + 300, y}}};
        };
        std::vector<PixelPolyline> gt{rand_line(), rand_line(), rand_line()};
        std::vector<PixelPolyline> pred{rand_line(), rand_line(), rand_line()};

        std::vector<std::vector<PolylineDistance>> dist;
        const auto greedy = match_roads(gt, pred, 50.0, 1.0, &dist);
        std::vector<std::vector<double>> chamfer(gt.size(), std::vector<double>(pred.size()));
        for (std::size_t i = 0; i < gt.size(); ++i)
            for (std::size_t j = 0; j < pred.size(); ++j) chamfer[i][j] = dist[i][j].chamfer;
        const auto optimal = oracle::exhaustive_match(chamfer, 50.0);

        REQUIRE(greedy.size() == optimal.cardinality);
        double greedy_total = 0.0;
        for (const auto& [i, j] : greedy)
            greedy_total += chamfer[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        CHECK(greedy_total <= 1.2 * optimal.total_chamfer + 1e-9);
    }
}

TEST_CASE("matching is exactly optimal on well-separated fixtures") {
    const std::vector<PixelPolyline> gt{PixelPolyline{{{0, 100}, {300, 100}}},
                                        PixelPolyline{{{0, 600}, {300, 600}}},
                                        PixelPolyline{{{0, 1100}, {300, 1100}}}};
    const std::vector<PixelPolyline> pred{PixelPolyline{{{0, 1102}, {300, 1102}}},
                                          PixelPolyline{{{0, 98}, {300, 98}}},
                                          PixelPolyline{{{0, 603}, {300, 603}}}};
    const auto matches = match_roads(gt, pred);
    CHECK(matches == std::vector<std::pair<int, int>>{{0, 1}, {1, 2}, {2, 0}});
}

TEST_CASE("presence-schema predictions are excluded from the count matrix") {
    std::vector<GroundTruthRecord> gts{gt_record(8000, 1), gt_record(8001, 2)};
    PredictionSet preds;
    preds.records.push_back({gts[0].image_id, "Found a road"});
    preds.records.push_back(
        {gts[1].image_id,
         "Found 2 roads. Image coordinates are as follows: [[(1, 1), (9, 9)], [(3, 3), (9, 0)]]"});
    const EvalReport r = evaluate_records(gts, preds);
    CHECK(r.count.total() == 1);
    bool found = false;
    for (const auto& s : r.skipped)
        if (s.stage == "count" && s.reason.find("presence-schema") != std::string::npos)
            found = true;
    CHECK(found);
    // Presence still counts the presence-schema prediction as "found".
    CHECK(r.presence.c11 == 2);
}

TEST_CASE("malformed captions count as not-found and are excluded downstream") {
    std::vector<GroundTruthRecord> gts{gt_record(8100, 1), gt_record(8101, 0)};
    PredictionSet preds;
    preds.records.push_back({gts[0].image_id, "Found lots of roads!!"});
    preds.records.push_back({gts[1].image_id, "No roads found"});
    const EvalReport r = evaluate_records(gts, preds);
    CHECK(r.presence.c12 == 1);  // gt found, prediction treated as not found
    CHECK(r.presence.c22 == 1);
    CHECK(r.count.total() == 0);
    REQUIRE_FALSE(r.parse_diagnostics.empty());
    CHECK(r.parse_diagnostics[0].image_id == gts[0].image_id);
}

TEST_CASE("predictions outside the ground truth are skipped with a reason") {
    std::vector<GroundTruthRecord> gts{gt_record(8200, 1)};
    PredictionSet preds;
    preds.records.push_back({gts[0].image_id, "Found a road"});
    preds.records.push_back({"9999_9999", "Found a road"});
    const EvalReport r = evaluate_records(gts, preds);
    CHECK(r.overlap == 1);
    REQUIRE_FALSE(r.skipped.empty());
    CHECK(r.skipped[0].image_id == "9999_9999");
    CHECK(r.skipped[0].stage == "input");
}

TEST_CASE("no overlapping ids raises EmptyOverlap") {
    std::vector<GroundTruthRecord> gts{gt_record(8300, 1)};
    PredictionSet preds;
    preds.records.push_back({"1_1", "Found a road"});
    CHECK_THROWS_AS(evaluate_records(gts, preds), EvalError);
}

TEST_CASE("alternate inclusion rules only rearrange the skip bookkeeping") {
    const auto [gts, preds] = count_fixture();
    EvalConfig gt_found;
    gt_found.count_rule = CountInclusionRule::GtFound;
    const EvalReport r = evaluate_records(gts, preds, gt_found);
    CHECK(r.count.total() == 35);
    CHECK(r.count_inclusion_rule == "gt_found");

    EvalConfig all;
    all.count_rule = CountInclusionRule::All;
    const EvalReport r2 = evaluate_records(gts, preds, all);
    CHECK(r2.count.total() == 35);
}

TEST_CASE("accuracy formatting rounds half up on the 4-decimal value") {
    CHECK(format_accuracy4(13.0 / 35.0) == "0.3714");
    CHECK(format_accuracy2(13.0 / 35.0) == "0.37");
    CHECK(format_accuracy2(0.375) == "0.38");
    CHECK(format_accuracy2(0.69) == "0.69");
    CHECK(format_accuracy2(1.0) == "1.00");
    CHECK(format_accuracy2(0.0) == "0.00");
    CHECK(format_accuracy4(0.69) == "0.6900");
}

TEST_CASE("record order never changes the reported numbers") {
    auto [gts, preds] = presence_fixture();
    const EvalReport before = evaluate_records(gts, preds);
    Rng rng(5);
    rng.shuffle(preds.records);
    std::reverse(gts.begin(), gts.end());
    const EvalReport after = evaluate_records(gts, preds);
    CHECK(before.presence.c11 == after.presence.c11);
    CHECK(before.presence.c12 == after.presence.c12);
    CHECK(before.presence.c21 == after.presence.c21);
    CHECK(before.presence.c22 == after.presence.c22);
    CHECK(before.count.total() == after.count.total());
}

TEST_CASE("duplicate prediction ids are rejected") {
    TempDir dir("roadnet_eval_dup");
    std::ofstream os(dir.path / "pred.json");
    os << R"([{"image_id": "1_1", "caption": "Found a road"},
              {"image_id": "1_1", "caption": "No roads found"}])";
    os.close();
    CHECK_THROWS_AS(load_predictions(dir.path / "pred.json"), SchemaViolationError);
}

TEST_CASE("evaluate composes from files") {
    TempDir dir("roadnet_eval_files");
    const auto [gts, preds] = presence_fixture();
    {
        std::ofstream os(dir.path / "ground_truth.json");
        os << ground_truth_to_json(gts).dump(2);
    }
    {
        std::ofstream os(dir.path / "pred.json");
        os << pairs_to_json(preds.records).dump(2);
    }
    const EvalReport r = evaluate(dir.path / "ground_truth.json", dir.path / "pred.json");
    CHECK(format_accuracy2(r.presence.accuracy()) == "0.69");
    const auto j = report_to_json(r);
    CHECK(j["presence"]["accuracy_2dp"] == "0.69");
    CHECK(j["toolkit_version"] == kToolkitVersion);
}
