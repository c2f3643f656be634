#include <doctest.h>

#include <cmath>

#include "georef/eval.hpp"
#include "oracles.hpp"

using namespace georef;

namespace {

std::vector<ScoringTarget> targets(int n, GridSpec grid, const std::string& label = "E5") {
  std::vector<ScoringTarget> out;
  for (int i = 0; i < n; ++i) out.push_back({"r" + std::to_string(i), {-41, 175}, label, grid.cell_km, grid});
  return out;
}

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("centroid distance") {
    CHECK(centroid_distance<double>({3, 3}, {3, 3}, 1.88) == 0.0);
    CHECK(centroid_distance<double>({1, 1}, {2, 1}, 1.88) == doctest::Approx(1.88));
    CHECK(centroid_distance<double>({1, 1}, {3, 2}, 0.7) == doctest::Approx(std::sqrt(5.0) * 0.7));
  }

  TEST_CASE("max distance") {
    CHECK(max_distance<double>({4, 4}, {4, 4}, 0.45) == std::sqrt(2.0) * 0.45);
    CHECK(max_distance<double>({1, 1}, {2, 1}, 1.0) == doctest::Approx(std::sqrt(5.0)));
  }

  TEST_CASE("min distance") {
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy) CHECK(min_distance<double>({5, 5}, {5 + dx, 5 + dy}, 1.25) == 0.0);
    CHECK(min_distance<double>({1, 1}, {3, 2}, 1.0) == doctest::Approx(1.0));
    CHECK(oracle::sampled_min(1, 1, 3, 2, 1.0) == doctest::Approx(1.0));
  }

  TEST_CASE("metrics agree with the brute-force oracles") {
    for (double s : {0.45, 0.7, 1.25, 1.88})
      for (int dx = -4; dx <= 4; ++dx)
        for (int dy = -4; dy <= 4; ++dy) {
          const CellIndex a{6, 6}, b{6 + dx, 6 + dy};
          CHECK(max_distance(a, b, s) == oracle::corner_max(6, 6, b.x, b.y, s));
          CHECK(min_distance(a, b, s) == doctest::Approx(oracle::rect_min(6, 6, b.x, b.y, s)).epsilon(1e-12));
          CHECK(centroid_distance(a, b, s) == doctest::Approx(oracle::centroid(6, 6, b.x, b.y, s)));
        }
    // dense sampling for a handful of pairs
    for (auto [dx, dy] : {std::pair{2, 1}, {3, 0}, {0, 2}, {2, 2}})
      CHECK(min_distance<double>({1, 1}, {1 + dx, 1 + dy}, 1.0) ==
            doctest::Approx(oracle::sampled_min(1, 1, 1 + dx, 1 + dy, 1.0)).epsilon(1e-9));
  }

  TEST_CASE("acc_at uses a strict threshold") {
    const std::vector<double> v{0.0, 0.5, 1.0, 2.0};
    CHECK(*acc_at(v, 1.0) == doctest::Approx(50.0));
    CHECK(*acc_at(std::vector<double>{0, 0, 0}, 1.0) == 100.0);
    CHECK_FALSE(acc_at(std::vector<double>{}, 1.0).has_value());
    const std::vector<double> r{0.5, 0.5, 1.5, 1.5};
    CHECK(*acc_at(v, r) == doctest::Approx(50.0));
  }

  TEST_CASE("max-distance never falls inside acc@scale") {
    const GridSpec g{10, 10, 0.7};
    std::map<std::string, std::optional<std::string>> pred{{"r0", "E5"}, {"r1", "F6"}, {"r2", "A1"}};
    const auto rows = aggregate_grid_report(targets(3, g), pred, "m");
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].method == "m/min");
    CHECK(rows[1].method == "m/max");
    CHECK(rows[2].method == "m/centroid");
    CHECK(*rows[1].acc_scale == 0.0);
    CHECK(*rows[2].acc_scale == doctest::Approx(100.0 / 3.0));
  }

  TEST_CASE("unparseable predictions") {
    const GridSpec g{10, 10, 1.0};
    std::map<std::string, std::optional<std::string>> none{{"r0", std::nullopt}, {"r1", "Q55"}};
    const auto excluded = aggregate_grid_report(targets(2, g), none, "m");
    CHECK_FALSE(excluded[2].average_km.has_value());
    CHECK(excluded[2].n_unparseable == 2);
    CHECK(excluded[2].n_items == 2);

    std::vector<ItemScore> scores;
    const auto worst = aggregate_grid_report(targets(2, g), none, "m", Imputation::worst_case, &scores);
    // truth E5 on 10x10: the furthest cell is J10, (5, 5) away
    CHECK(*worst[2].average_km == doctest::Approx(std::hypot(5.0, 5.0)));
    CHECK(*worst[1].average_km == doctest::Approx(std::hypot(6.0, 6.0)));
    CHECK(scores.size() == 2);
  }

  TEST_CASE("id mismatch is an error") {
    const GridSpec g{10, 10, 1.0};
    std::map<std::string, std::optional<std::string>> pred{{"r0", "A1"}, {"zz", "A1"}};
    CHECK_THROWS_AS(aggregate_grid_report(targets(1, g), pred, "m"), EvalError);
    CHECK_THROWS_AS(aggregate_grid_report(targets(2, g), {{"r0", "A1"}}, "m"), EvalError);
  }

  TEST_CASE("coordinate report") {
    const GridSpec g{10, 10, 1.0};
    auto t = targets(2, g);
    std::map<std::string, std::optional<GeoPoint>> pred{{"r0", GeoPoint{-41, 175}}, {"r1", std::nullopt}};
    const MetricReport r = aggregate_coordinate_report(t, pred, "text");
    CHECK(*r.average_km == 0.0);
    CHECK(*r.acc_1km == 100.0);
    CHECK(r.n_unparseable == 1);
  }

  TEST_CASE("report csv formatting") {
    MetricReport r;
    r.method = "x";
    r.average_km = 1.0349;
    r.acc_1km = 60.0;
    r.n_items = 25;
    const std::string csv = report_csv({r});
    CHECK(csv == "method,average_km,acc@1,acc@3,acc@10,acc@scale,n,n_unparseable\nx,1.03,60.00,,,,25,0\n");
    CHECK(report_json({r})["rows"][0]["acc@3"].is_null());
  }
}
