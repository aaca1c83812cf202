#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "roadnet/dataset.hpp"
#include "roadnet/png_io.hpp"
#include "roadnet/synth.hpp"

using namespace roadnet;

namespace {

SynthScene straight_road_scene(const Vec2& a, const Vec2& b, std::uint64_t terrain_seed = 99) {
    SynthScene scene;
    scene.tile = TileId{16, 35203, 21493};
    scene.terrain_seed = terrain_seed;
    GeoLineString road;
    road.vertices.push_back(pixel_to_geo(a.x, a.y, scene.tile));
    road.vertices.push_back(pixel_to_geo(b.x, b.y, scene.tile));
    scene.roads_geo.push_back(road);
    return scene;
}

int bright_pixels(const RasterTile& img, double threshold = 180.0) {
    int n = 0;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            if (img.luminance(x, y) >= threshold) ++n;
    return n;
}

}  // namespace

TEST_CASE("generate_world hits the negative count exactly") {
    const auto scenes = generate_world(1, 10);
    REQUIRE(scenes.size() == 10);
    int neg = 0;
    for (const auto& s : scenes)
        if (s.roads_geo.empty()) ++neg;
    CHECK(neg == 4);  // round(10 * 0.40)

    SynthConfig cfg;
    cfg.negative_fraction = 0.25;
    const auto scenes2 = generate_world(2, 10, cfg);
    int neg2 = 0;
    for (const auto& s : scenes2)
        if (s.roads_geo.empty()) ++neg2;
    CHECK(neg2 == 3);  // round(10 * 0.25) = 3 (half away from zero)
}

TEST_CASE("generate_world is deterministic and ids are unique") {
    const auto a = generate_world(77, 60);
    const auto b = generate_world(77, 60);
    REQUIRE(a.size() == b.size());
    std::set<std::string> ids;
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].tile == b[i].tile);
        CHECK(a[i].terrain_seed == b[i].terrain_seed);
        CHECK(a[i].roads_geo == b[i].roads_geo);
        ids.insert(to_image_id(a[i].tile));
    }
    CHECK(ids.size() == a.size());
}

TEST_CASE("positive scenes carry 1-4 chords that survive the dataset pipeline") {
    const auto scenes = generate_world(5, 40);
    for (const auto& s : scenes) {
        if (s.roads_geo.empty()) continue;
        CHECK(s.roads_geo.size() >= 1);
        CHECK(s.roads_geo.size() <= 4);
        for (const auto& road : s.roads_geo) {
            CHECK(road.vertices.size() >= 2);
            CHECK(road.vertices.size() <= 6);
        }
        const auto roads = tile_roads(s.roads_geo, s.tile);
        CHECK(roads.size() == s.roads_geo.size());  // chords stay single pieces
    }
}

TEST_CASE("world generation rejects bad parameters") {
    CHECK_THROWS_AS(generate_world(1, 0), SynthError);
    SynthConfig cfg;
    cfg.region = GeoBBox{10.0, 50.0, 10.0, 50.0};
    CHECK_THROWS_AS(generate_world(1, 10, cfg), SynthError);
    SynthConfig tiny;
    tiny.zoom = 2;
    tiny.region = GeoBBox{-1.0, 40.0, 1.0, 41.0};
    CHECK_THROWS_AS(generate_world(1, 1000, tiny), SynthError);
}

TEST_CASE("rendering is deterministic byte for byte") {
    const auto scenes = generate_world(42, 3);
    for (const auto& s : scenes) {
        const RasterTile a = render_tile(s);
        const RasterTile b = render_tile(s);
        CHECK(a == b);
        CHECK(encode_png(a) == encode_png(b));
    }
}

TEST_CASE("a sceneless render stays dark") {
    SynthScene scene;
    scene.tile = TileId{16, 100, 100};
    scene.terrain_seed = 7;
    const RasterTile img = render_tile(scene);
    CHECK(img.width == 1280);
    CHECK(img.height == 1280);
    CHECK(bright_pixels(img) == 0);
}

TEST_CASE("a stroked road covers at least 80% of its nominal area") {
    const SynthScene scene = straight_road_scene({0, 640}, {1280, 640});
    const RasterTile img = render_tile(scene);
    const double expected_area = 1280.0 * 9.0;
    CHECK(bright_pixels(img) >= static_cast<int>(expected_area * 0.8));

    // Stroke hugs the centerline: bright pixels stay within half-width + 0.5.
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            if (img.luminance(x, y) >= 180.0) {
                CHECK(std::abs(y - 640.0) <= 5.0);
            }
}

TEST_CASE("baseline detector returns NoRoads on a blank tile") {
    SynthScene scene;
    scene.tile = TileId{16, 200, 300};
    scene.terrain_seed = 123;
    const Caption c = baseline_detect(render_tile(scene));
    CHECK(c.kind == CaptionKind::NoRoads);
}

TEST_CASE("baseline detector recovers a clean road within 5 px at the endpoints") {
    const SynthScene scene = straight_road_scene({0, 200}, {1280, 1100});
    const Caption c = baseline_detect(render_tile(scene));
    REQUIRE(c.kind == CaptionKind::Roads);
    REQUIRE(c.roads.size() == 1);
    const auto& detected = c.roads[0].vertices;
    REQUIRE(detected.size() == 2);

    const auto gt = tile_roads(scene.roads_geo, scene.tile);
    REQUIRE(gt.size() == 1);
    const auto& truth = gt[0].vertices;
    const auto d = [](const PixelPoint& a, const PixelPoint& b) {
        return std::hypot(static_cast<double>(a.px - b.px), static_cast<double>(a.py - b.py));
    };
    const double same = std::max(d(detected.front(), truth.front()), d(detected.back(), truth.back()));
    const double flip = std::max(d(detected.front(), truth.back()), d(detected.back(), truth.front()));
    CHECK(std::min(same, flip) <= 5.0);
}

TEST_CASE("baseline detector counts two crossing roads") {
    SynthScene scene = straight_road_scene({0, 100}, {1280, 1200});
    GeoLineString second;
    second.vertices.push_back(pixel_to_geo(0.0, 1100.0, scene.tile));
    second.vertices.push_back(pixel_to_geo(1280.0, 150.0, scene.tile));
    scene.roads_geo.push_back(second);
    const Caption c = baseline_detect(render_tile(scene));
    REQUIRE(c.kind == CaptionKind::Roads);
    CHECK(c.roads.size() == 2);
}

TEST_CASE("baseline detector is deterministic") {
    const auto scenes = generate_world(9, 4);
    for (const auto& s : scenes) {
        const RasterTile img = render_tile(s);
        CHECK(serialize_caption(baseline_detect(img)) == serialize_caption(baseline_detect(img)));
    }
}

TEST_CASE("scene_for_tile is a pure function of seed and address") {
    const TileId t{16, 34000, 22000};
    const SynthScene a = scene_for_tile(99, t);
    const SynthScene b = scene_for_tile(99, t);
    CHECK(a.roads_geo == b.roads_geo);
    CHECK(a.terrain_seed == b.terrain_seed);
    const SynthScene c = scene_for_tile(100, t);
    CHECK((c.terrain_seed != a.terrain_seed));
}

TEST_CASE("scenes convert into a coherent dataset") {
    const auto scenes = generate_world(4242, 50);
    const auto [pairs, gts] = build_pairs_from_scenes(scenes, CaptionSchema::Coordinates);
    REQUIRE(pairs.size() == 50);
    long long negatives = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (gts[i].roads.empty()) ++negatives;
        CHECK(serialize_caption(caption_for_roads(gts[i].roads, CaptionSchema::Coordinates)) ==
              pairs[i].caption);
    }
    CHECK(negatives == 20);
    Dataset ds{pairs, gts, {}};
    ds.manifest.zoom = 16;
    ds.manifest.total = 50;
    ds.manifest.positive = 30;
    ds.manifest.negative = 20;
    ds.manifest.train_size = 50;
    ds.manifest.test_size = 0;
    CHECK(validate_dataset(ds).empty());
}
