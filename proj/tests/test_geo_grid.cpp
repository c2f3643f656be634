#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "georef/eval.hpp"
#include "georef/grid.hpp"
#include "support.hpp"

using namespace georef;

TEST_SUITE("geo") {
  TEST_CASE("haversine") {
    CHECK(haversine_km(GeoPoint{-41.2, 175.1}, GeoPoint{-41.2, 175.1}) == 0.0);
    // one degree of longitude on the equator is R * pi / 180
    const double expected = kEarthRadiusKm * std::numbers::pi / 180.0;
    CHECK(sae({0.0, 0.0}, {0.0, 1.0}) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(sae({0.0, 0.0}, {0.0, 1.0}) == doctest::Approx(111.19).epsilon(1e-4));
    // antipodes
    CHECK(haversine_km(GeoPoint{10, 20}, GeoPoint{-10, -160}) == doctest::Approx(kEarthRadiusKm * std::numbers::pi));
  }

  TEST_CASE("projection round trip") {
    for (const GeoPoint p : {GeoPoint{-41.2, 175.1}, GeoPoint{0, 0}, GeoPoint{60.5, -3.25}}) {
      const GeoPoint q = unproject(project(p));
      CHECK(q.lat == doctest::Approx(p.lat).epsilon(1e-12));
      CHECK(q.lon == doctest::Approx(p.lon).epsilon(1e-12));
    }
  }

  TEST_CASE("box helpers") {
    GeoBox b = GeoBox::of({-41, 175});
    CHECK(with_min_size(b, 1.0).width_km() == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(with_min_size(b, 1.0).height_km() == doctest::Approx(1.0).epsilon(1e-3));
    const GeoBox g = buffered(b, 2.0);
    CHECK(g.height_km() == doctest::Approx(4.0).epsilon(1e-3));
    CHECK(intersection(GeoBox{0, 0, 2, 2}, GeoBox{1, 1, 3, 3}) == GeoBox{1, 1, 2, 2});
  }
}

TEST_SUITE("grid") {
  TEST_CASE("spreadsheet labels") {
    GridSpec g{702, 99, 1.0};
    CHECK(label_for_index(g, {1, 1}) == "A1");
    CHECK(label_for_index(g, {27, 3}) == "AA3");
    CHECK(label_for_index(g, {702, 99}) == "ZZ99");
    CHECK(index_for_label(g, "AB12") == CellIndex{28, 12});
    CHECK_THROWS_AS(index_for_label(GridSpec{10, 10, 1.0}, "Z99"), GridError);
    CHECK_FALSE(parse_label("1A").has_value());
  }

  TEST_CASE("column letters against an enumeration oracle") {
    // all one- and two-letter strings in shortlex order are exactly the columns 1..702
    std::vector<std::string> expected;
    for (char a = 'A'; a <= 'Z'; ++a) expected.emplace_back(1, a);
    for (char a = 'A'; a <= 'Z'; ++a)
      for (char b = 'A'; b <= 'Z'; ++b) expected.push_back(std::string{a, b});
    REQUIRE(expected.size() == 702);
    for (int c = 1; c <= 702; ++c) CHECK(column_letters(c) == expected[c - 1]);
  }

  TEST_CASE("make_grid with an exact multiple keeps the extent") {
    const auto g = test::square_grid({-41.0, 175.0}, 5, 5, 1000.0);
    const GridLayout l = make_grid(g.extent, g.grid.cell_km, 12);
    CHECK(l.grid.cols == 5);
    CHECK(l.grid.rows == 5);
    CHECK(l.extent.min_lat == doctest::Approx(g.extent.min_lat).epsilon(1e-12));
    CHECK(l.extent.max_lon == doctest::Approx(g.extent.max_lon).epsilon(1e-12));
  }

  TEST_CASE("make_grid caps cells per axis and grows east/south") {
    const MapExtent e{-41.3, 175.0, -41.0, 175.2};
    const GridLayout l = make_grid(e, 0.5, 12);
    CHECK(l.grid.cols <= 12);
    CHECK(l.grid.rows <= 12);
    CHECK(l.extent.max_lat == e.max_lat);
    CHECK(l.extent.min_lon == e.min_lon);
    CHECK(l.extent.min_lat <= e.min_lat);
    CHECK(l.extent.max_lon >= e.max_lon);
    const double side = cell_side_m(l.extent, l.grid);
    CHECK(project(l.extent).sizes().y() / side == doctest::Approx(l.grid.rows).epsilon(1e-9));
  }

  TEST_CASE("degenerate extents are rejected") {
    CHECK_THROWS_AS(validate_extent(MapExtent{1, 1, 1, 2}), GridError);
    CHECK_THROWS_AS(validate_extent(MapExtent{0, 170, 1, 190}), GridError);
    CHECK_THROWS_AS(make_grid(MapExtent{0, 0, 0.00001, 0.00001}, 0.001, 12), GridError);
  }

  TEST_CASE("point_to_cell tie rule and corners") {
    const auto g = test::square_grid({-41.0, 175.0}, 2, 2, 1000.0);
    CHECK(point_to_cell(g, unproject(project(g.extent).center())) == CellIndex{2, 2});
    CHECK(point_to_cell(g, {g.extent.max_lat - 1e-6, g.extent.min_lon + 1e-6}) == CellIndex{1, 1});
    CHECK(point_to_cell(g, {g.extent.min_lat, g.extent.max_lon}) == CellIndex{2, 2});
    CHECK_THROWS_AS(point_to_cell(g, {g.extent.max_lat + 0.01, g.extent.min_lon}), GridError);
  }

  TEST_CASE("1x1 grid centroid is the projected centre") {
    const auto g = test::square_grid({10.0, 20.0}, 1, 1, 5000.0);
    const GeoPoint c = cell_centroid(g, {1, 1});
    const GeoPoint m = unproject(project(g.extent).center());
    CHECK(c.lat == doctest::Approx(m.lat).epsilon(1e-12));
    CHECK(c.lon == doctest::Approx(m.lon).epsilon(1e-12));
  }

  TEST_CASE("cell extents tile the map") {
    const auto g = test::square_grid({-45.0, 167.0}, 4, 3, 800.0);
    double area = 0;
    for (int x = 1; x <= 4; ++x)
      for (int y = 1; y <= 3; ++y) area += project(cell_extent(g, {x, y})).volume();
    CHECK(area == doctest::Approx(project(g.extent).volume()).epsilon(1e-9));
  }

  TEST_CASE("to_pixel maps corners to image corners") {
    const auto g = test::square_grid({-41.0, 175.0}, 3, 2, 1000.0);
    const auto nw = to_pixel(g, {g.extent.max_lat, g.extent.min_lon});
    const auto se = to_pixel(g, {g.extent.min_lat, g.extent.max_lon});
    CHECK(nw.x() == doctest::Approx(0.0));
    CHECK(nw.y() == doctest::Approx(0.0));
    CHECK(se.x() == doctest::Approx(g.image_width_px));
    CHECK(se.y() == doctest::Approx(g.image_height_px));
  }

  TEST_CASE("georeference json round trip") {
    const auto g = test::square_grid({-41.0, 175.0}, 3, 2, 1000.0);
    const nlohmann::json j = g;
    CHECK(j.get<MapGeoreference>() == g);
  }
}
