#include <doctest.h>

#include <fstream>

#include "georef/mapgen.hpp"
#include "georef/render.hpp"
#include "support.hpp"

using namespace georef;

namespace {

/// Fixture features by name, regional duplicates removed.
FeatureMap fixture_features(std::initializer_list<const char*> names, const std::string& region = "") {
  const auto gz = LocalGazetteer::load(test::fixtures() / "nz_gazetteer.geojson", "fixture");
  FeatureMap out;
  for (const char* n : names)
    for (const auto& f : gz.features())
      if (f.name == n && (region.empty() || !f.region || f.region->empty() || *f.region == region) &&
          !out.contains(n))
        out.emplace(n, f);
  return out;
}

ParseResult parsed(const std::string& text) { return parse_locality(text, HeuristicExtractor()); }

std::vector<ContainmentPair> pairs(std::initializer_list<std::pair<const char*, const char*>> ps) {
  std::vector<ContainmentPair> out;
  for (auto [p, c] : ps) {
    ContainmentPair cp;
    cp.parent.surface = p;
    cp.child.surface = c;
    out.push_back(cp);
  }
  return out;
}

}  // namespace

TEST_SUITE("mapgen") {
  TEST_CASE("containment parents are dropped") {
    const auto fm = fixture_features({"North Island", "Bay of Islands County", "Puketi"}, "Northland");
    const auto p = parsed("North Island, Bay of Islands County, Ca 2km north of Puketi");
    const ExtentPlan plan = plan_extent(
        fm, p.triples, pairs({{"North Island", "Bay of Islands County"}, {"Bay of Islands County", "Puketi"}}));
    CHECK(plan.dropped_parents == std::vector<std::string>{"Bay of Islands County", "North Island"});
    const GeoBox puketi = buffered(fm.at("Puketi").geometry.bbox(), 2.0 * 1.5);
    CHECK(plan.extent.contains(puketi));
    const GeoBox county = fm.at("Bay of Islands County").geometry.bbox();
    CHECK(intersection(plan.extent, county).area_km2() < 0.1 * county.area_km2());
  }

  TEST_CASE("single point gets the minimum extent") {
    const auto fm = fixture_features({"Puketi"}, "Northland");
    ExtentOptions o;
    o.padding = 0.0;
    const MapExtent e = compute_extent(fm, {}, {}, o);
    CHECK(e.width_km() == doctest::Approx(1.0).epsilon(0.01));
    CHECK(e.height_km() == doctest::Approx(1.0).epsilon(0.01));
    CHECK(e.contains(GeoPoint{-35.2167, 173.7667}));
  }

  TEST_CASE("siblings are kept in full") {
    const auto fm = fixture_features({"Mount George", "Elizabeth Burn"}, "Southland");
    const auto p = parsed("Fiordland, Mount George, south slope above Elizabeth Burn, 2km north of peak");
    const MapExtent e = compute_extent(fm, p.triples, {});
    CHECK(e.contains(fm.at("Mount George").geometry.bbox()));
    CHECK(e.contains(fm.at("Elizabeth Burn").geometry.bbox()));
  }

  TEST_CASE("nothing to map") {
    CHECK_THROWS_WITH_AS(plan_extent({}, {}, {}), "nothing to map", MapgenError);
  }

  TEST_CASE("long rivers are clipped to the other features") {
    const auto fm = fixture_features({"Blythe River", "Napenape Scenic Reserve"});
    const auto p = parsed("Napenape Scenic Reserve, 3km south of mouth of Blythe River, coastal forest remnant");
    const ExtentPlan clipped = plan_extent(fm, p.triples, {});
    CHECK(clipped.clipped == std::vector<std::string>{"Blythe River"});
    CHECK(clipped.extent.contains(fm.at("Napenape Scenic Reserve").geometry.bbox()));
    CHECK(clipped.features.at("Blythe River").geometry.bbox().area_km2() <
          fm.at("Blythe River").geometry.bbox().area_km2());
    const double fine = grid_for_extent(clipped.extent).grid.cell_km;

    ExtentOptions whole;
    whole.clip_lines = false;
    const ExtentPlan unclipped = plan_extent(fm, p.triples, {}, whole);
    CHECK(unclipped.clipped.empty());
    const double coarse = grid_for_extent(unclipped.extent).grid.cell_km;
    CHECK(fine <= 0.5);
    CHECK(coarse >= 1.0);
  }

  TEST_CASE("clip_linear_features") {
    const auto fm = fixture_features({"Napenape Scenic Reserve"});
    const GeoBox window = fm.at("Napenape Scenic Reserve").geometry.bbox();
    CHECK(clip_linear_features(fm, window) == fm);

    FeatureMap inside;
    inside.emplace("Creek", GazetteerFeature{"Creek", "t", 0,
                                             Geometry::line({{-42.91, 173.165}, {-42.92, 173.18}}), "", {}, {}});
    CHECK(clip_linear_features(inside, window) == inside);

    FeatureMap away;
    away.emplace("Far", GazetteerFeature{"Far", "t", 0, Geometry::line({{-42.80, 173.17}, {-42.70, 173.17}}), "", {}, {}});
    const auto clipped = clip_linear_features(away, window);
    REQUIRE(clipped.contains("Far"));
    CHECK_FALSE(clipped.at("Far").geometry.empty());
    CHECK(clipped.at("Far").geometry.bbox().height_km() < 11.0);
  }

  TEST_CASE("pad_to_aspect") {
    const MapExtent e = pad_to_aspect({-41.3, 175.0, -41.0, 175.1}, 0.1, 1.0);
    const auto s = project(e).sizes();
    CHECK(s.x() == doctest::Approx(s.y()).epsilon(1e-9));
    CHECK(e.contains(GeoBox{-41.3, 175.0, -41.0, 175.1}));
  }

  TEST_CASE("Lake Wairarapa and Napenape cell sizes") {
    // fixture outlines are approximate, so these are loose
    const auto lake = fixture_features({"Lake Wairarapa"}, "Wellington");
    const auto lp = parsed("J.K. Donald Wildlife Reserve, NE shore of L. Wairarapa - about 400m from lake");
    const double lake_km = grid_for_extent(compute_extent(lake, lp.triples, {})).grid.cell_km;
    MESSAGE("Lake Wairarapa cell_km = " << lake_km);
    CHECK(lake_km == doctest::Approx(1.88).epsilon(0.25));

    const auto np = fixture_features({"Blythe River", "Napenape Scenic Reserve"});
    const auto pp = parsed("Napenape Scenic Reserve, 3km south of mouth of Blythe River, coastal forest remnant");
    const double np_km = grid_for_extent(compute_extent(np, pp.triples, {})).grid.cell_km;
    MESSAGE("Napenape cell_km = " << np_km);
    CHECK(np_km == doctest::Approx(0.45).epsilon(0.15));
  }
}

TEST_SUITE("render") {
  TEST_CASE("offline render is deterministic and labelled") {
    const auto fm = fixture_features({"Napenape Scenic Reserve", "Puketi"});
    GazetteerFeature point = fm.at("Puketi");
    point.geometry = Geometry::point({-42.92, 173.175});
    const std::vector<GazetteerFeature> features{fm.at("Napenape Scenic Reserve"), point};
    const GridLayout layout = make_grid({-42.94, 173.15, -42.90, 173.20}, 0.35, 12);
    MapStyle style = load_style(test::data_dir() / "style.json");
    const MapExcerpt a = render_map(layout, features, {"J.K. Donald Wildlife Reserve"}, style, {600, nullptr});
    const MapExcerpt b = render_map(layout, features, {"J.K. Donald Wildlife Reserve"}, style, {600, nullptr});
    CHECK(a.features_drawn == std::vector<std::string>{"Napenape Scenic Reserve", "Puketi"});
    CHECK(a.unresolved_names == std::vector<std::string>{"J.K. Donald Wildlife Reserve"});
    CHECK(a.png == b.png);
    CHECK(pixel_hash(a.png) == pixel_hash(b.png));
    CHECK(a.georef.image_width_px % a.georef.grid.cols == 0);

    std::ifstream golden(test::golden() / "render_pixel_hash.txt");
    std::string expected;
    golden >> expected;
    MESSAGE("pixel hash " << pixel_hash(a.png));
    CHECK(pixel_hash(a.png) == expected);
  }

  TEST_CASE("12 x 12 grid has 144 labels") {
    const auto g = test::square_grid({-41.0, 175.0}, 12, 12, 500.0);
    const MapExcerpt ex = render_map({g.extent, g.grid}, {}, {}, MapStyle{}, {600, nullptr});
    CHECK(ex.cell_labels.size() == 144);
    CHECK(ex.cell_labels.front() == "A1");
    CHECK(ex.cell_labels.back() == "L12");
  }

  TEST_CASE("tile failures fall back to a blank basemap") {
    struct Broken final : TileSource {
      std::string tile(int, int, int) override { throw std::runtime_error("offline"); }
    } broken;
    const auto g = test::square_grid({-41.0, 175.0}, 4, 4, 500.0);
    const MapExcerpt ex = render_map({g.extent, g.grid}, {}, {}, MapStyle{}, {400, &broken});
    CHECK(ex.no_basemap);
    const MapExcerpt blank = render_map({g.extent, g.grid}, {}, {}, MapStyle{}, {400, nullptr});
    CHECK(pixel_hash(ex.png) == pixel_hash(blank.png));
  }

  TEST_CASE("style validation") {
    CHECK_THROWS_AS(parse_style({{"grid_width", 0}}), MapStyleError);
    CHECK(parse_style({{"marker_radius", 9}}).marker_radius == 9);
  }
}
