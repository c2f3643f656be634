#include <doctest.h>

#include <algorithm>
#include <limits>
#include <random>
#include <thread>

#include "georef/gazetteer.hpp"
#include "georef/http.hpp"
#include "support.hpp"

#include <httplib.h>

using namespace georef;

namespace {

GazetteerFeature pt(const std::string& name, double lat, double lon, const std::string& region = "", int rank = 0) {
  return {name, "t", rank, Geometry::point({lat, lon}), "", "New Zealand", region};
}

GazetteerFeature square(const std::string& name, double lat, double lon, double half, int rank = 0) {
  return {name, "t", rank,
          Geometry::polygon({{{lat - half, lon - half}, {lat - half, lon + half}, {lat + half, lon + half},
                              {lat + half, lon - half}}}),
          "", "New Zealand", ""};
}

CandidateSet set(const std::string& name, std::vector<GazetteerFeature> c) { return {name, std::move(c), false, {}}; }

class FailingSource final : public FeatureSource {
 public:
  explicit FailingSource(std::string id) : id_(std::move(id)) {}
  const std::string& id() const override { return id_; }
  int authority_rank() const override { return 0; }
  std::vector<GazetteerFeature> query(const std::string&, const std::string&, const std::string&) override {
    throw SourceError("connection refused");
  }

 private:
  std::string id_;
};

/// Counts queries that reach the wrapped source.
class CountingSource final : public FeatureSource {
 public:
  explicit CountingSource(FeatureSource& inner) : inner_(inner) {}
  const std::string& id() const override { return inner_.id(); }
  int authority_rank() const override { return inner_.authority_rank(); }
  std::vector<GazetteerFeature> query(const std::string& n, const std::string& c, const std::string& r) override {
    ++calls;
    return inner_.query(n, c, r);
  }
  int calls = 0;

 private:
  FeatureSource& inner_;
};

/// Summed pairwise haversine distance of one choice per set.
double spread(const std::vector<CandidateSet>& sets, const std::vector<std::size_t>& pick) {
  double s = 0;
  for (std::size_t i = 0; i < sets.size(); ++i)
    for (std::size_t j = i + 1; j < sets.size(); ++j)
      s += haversine_km(representative_point(sets[i].candidates[pick[i]]),
                        representative_point(sets[j].candidates[pick[j]]));
  return s;
}

}  // namespace

TEST_SUITE("gazetteer") {
  TEST_CASE("local gazetteer lookups") {
    auto gz = LocalGazetteer::load(test::fixtures() / "nz_gazetteer.geojson", "fixture");
    const auto lake = gz.query("Lake Wairarapa", "New Zealand", "Wellington");
    CHECK(std::any_of(lake.begin(), lake.end(),
                      [](const auto& f) { return effective_kind(f.geometry) == GeometryKind::polygon; }));
    CHECK(gz.query("lake wairarapa", "", "").size() == 2);
    CHECK(gz.query("J.K. Donald Wildlife Reserve", "New Zealand", "Wellington").empty());
  }

  TEST_CASE("query_sources preconditions and failures") {
    auto gz = LocalGazetteer::load(test::fixtures() / "nz_gazetteer.geojson", "fixture");
    FailingSource down("down");
    CHECK_THROWS_AS(query_sources("", "New Zealand", "", {&gz}), GazetteerError);

    const auto partial = query_sources("Puketi", "New Zealand", "Northland", {&down, &gz});
    CHECK(partial.candidates.size() == 2);
    REQUIRE(partial.warnings.size() == 1);
    CHECK(partial.warnings[0].find("down: connection refused") != std::string::npos);

    FailingSource down2("down2");
    CHECK_THROWS_WITH_AS(query_sources("Puketi", "", "", {&down, &down2}), doctest::Contains("down2"),
                         GazetteerError);
  }

  TEST_CASE("feature cache avoids repeat queries") {
    auto gz = LocalGazetteer::load(test::fixtures() / "nz_gazetteer.geojson", "fixture");
    CountingSource counting(gz);
    FeatureCache cache(test::scratch("feature_cache"));
    const QueryOptions opts{&cache, false};
    const auto first = query_sources("Puketi", "New Zealand", "", {&counting}, opts);
    const auto second = query_sources("Puketi", "New Zealand", "", {&counting}, opts);
    CHECK(counting.calls == 1);
    CHECK(first.candidates == second.candidates);
    query_sources("Puketi", "New Zealand", "", {&counting}, QueryOptions{&cache, true});
    CHECK(counting.calls == 2);
  }

  TEST_CASE("filter_by_region") {
    const auto s = set("X", {pt("X", -36, 174, "Auckland"), pt("X", -45, 170, "Otago"), pt("X", -41, 175, "Wellington")});
    const auto one = filter_by_region(s, "New Zealand", "Otago");
    REQUIRE(one.candidates.size() == 1);
    CHECK(one.candidates[0].region == "Otago");
    CHECK_FALSE(one.unfiltered);

    const auto all = set("X", {pt("X", -45, 170, "Otago"), pt("X", -45.1, 170.1, "Otago")});
    CHECK(filter_by_region(all, "New Zealand", "otago").candidates == all.candidates);

    const auto none = filter_by_region(s, "Australia", "Victoria");
    CHECK(none.unfiltered);
    CHECK(none.candidates == s.candidates);
  }

  TEST_CASE("disambiguation picks the tight cluster") {
    const auto a = set("A", {pt("A", -36.85, 174.76), pt("A", -45.87, 170.50)});
    const auto b = set("B", {pt("B", -45.90, 170.40)});
    const auto chosen = disambiguate({a, b});
    CHECK(chosen.at("A").geometry.vertices[0].lat == -45.87);
    const auto single = disambiguate({set("S", {pt("S", 1, 2)})});
    CHECK(single.at("S") == pt("S", 1, 2));
  }

  TEST_CASE("equally tight clusters fall back to authority rank") {
    // two mirror-image clusters; the second cluster is more authoritative
    const auto a = set("A", {pt("A", -41.0, 175.0, "", 2), pt("A", -45.0, 170.0, "", 0)});
    const auto b = set("B", {pt("B", -41.0, 175.1, "", 2), pt("B", -45.0, 170.1, "", 0)});
    const auto chosen = disambiguate({a, b});
    CHECK(chosen.at("A").authority_rank == 0);
    CHECK(chosen.at("B").authority_rank == 0);
    CHECK(disambiguate({a, b}) == chosen);
  }

  TEST_CASE("disambiguation matches exhaustive search") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> lat(-46, -35), lon(167, 178);
    for (int trial = 0; trial < 30; ++trial) {
      std::vector<CandidateSet> sets;
      const int names = 2 + trial % 3;
      for (int n = 0; n < names; ++n) {
        std::vector<GazetteerFeature> c;
        for (int k = 0; k < 1 + (trial + n) % 4; ++k) c.push_back(pt("N" + std::to_string(n), lat(rng), lon(rng)));
        sets.push_back(set("N" + std::to_string(n), c));
      }
      // exhaustive oracle
      double best = std::numeric_limits<double>::infinity();
      std::vector<std::size_t> pick(sets.size(), 0);
      const std::function<void(std::size_t)> walk = [&](std::size_t i) {
        if (i == sets.size()) {
          best = std::min(best, spread(sets, pick));
          return;
        }
        for (pick[i] = 0; pick[i] < sets[i].candidates.size(); ++pick[i]) walk(i + 1);
      };
      walk(0);
      const auto chosen = disambiguate(sets);
      std::vector<std::size_t> got;
      for (const auto& s : sets) {
        const auto it = std::find(s.candidates.begin(), s.candidates.end(), chosen.at(s.query_name));
        got.push_back(static_cast<std::size_t>(it - s.candidates.begin()));
      }
      CHECK(spread(sets, got) == doctest::Approx(best).epsilon(1e-12));
    }
  }

  TEST_CASE("large candidate products stay tractable") {
    std::vector<CandidateSet> sets;
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> lat(-46, -35), lon(167, 178);
    for (int n = 0; n < 5; ++n) {
      std::vector<GazetteerFeature> c;
      for (int k = 0; k < 40; ++k) c.push_back(pt("N", lat(rng), lon(rng)));
      sets.push_back(set("N" + std::to_string(n), c));
    }
    sets.push_back(set("Anchor", {pt("Anchor", -41, 175)}));
    CHECK(disambiguate(sets).size() == 6);
  }

  TEST_CASE("conflation") {
    auto point = pt("L", -41.2, 175.2);
    point.authority_rank = 0;
    const auto poly = square("L", -41.2, 175.2, 0.05, 1);
    CHECK(conflate({point, poly}) == poly);
    CHECK(conflate({point}) == point);
    const auto p0 = square("L", -41.2, 175.2, 0.01, 0);
    const auto p2 = square("L", -41.2, 175.2, 0.05, 2);
    CHECK(conflate({p2, p0}) == p0);
  }

  TEST_CASE("representative points") {
    CHECK(representative_point(pt("P", -41, 175)) == GeoPoint{-41, 175});
    const GeoPoint c = representative_point(square("S", 0.5, 0.5, 0.5));
    CHECK(c.lat == doctest::Approx(0.5));
    CHECK(c.lon == doctest::Approx(0.5));
    // C shape opening east: the area centroid falls in the notch
    const Geometry cshape = Geometry::polygon(
        {{{0, 0}, {0, 3}, {1, 3}, {1, 1}, {2, 1}, {2, 3}, {3, 3}, {3, 0}}});
    GazetteerFeature f{"C", "t", 0, cshape, "", {}, {}};
    const GeoPoint r = representative_point(f);
    CHECK(covers(cshape, r));
    GazetteerFeature empty{"E", "t", 0, Geometry{}, "", {}, {}};
    CHECK_THROWS(representative_point(empty));
  }

  TEST_CASE("resolve_names end to end") {
    auto gz = LocalGazetteer::load(test::fixtures() / "nz_gazetteer.geojson", "fixture");
    const Resolution r =
        resolve_names({"Mount George", "Elizabeth Burn", "Nowhere Saddle"}, "New Zealand", "Southland", {&gz});
    CHECK(r.features.at("Mount George").region == "Southland");
    CHECK(r.unresolved == std::vector<std::string>{"Nowhere Saddle"});
  }

  TEST_CASE("http source against a local server") {
    httplib::Server server;
    std::string seen;
    server.Get("/search", [&](const httplib::Request& req, httplib::Response& res) {
      seen = req.get_param_value("q");
      if (seen == "boom") {
        res.status = 500;
        return;
      }
      res.set_content(R"({"type": "FeatureCollection", "features": [
        {"type": "Feature", "properties": {"display_name": "Lake Wairarapa, South Wairarapa District, Wellington, New Zealand",
          "type": "water", "address": {"state": "Wellington", "country": "New Zealand"}},
         "geometry": {"type": "Polygon", "coordinates": [[[175.2, -41.3], [175.3, -41.3], [175.3, -41.1], [175.2, -41.1], [175.2, -41.3]]]}}]})",
                      "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    HttpSourceConfig cfg;
    cfg.id = "local";
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/search";
    cfg.requests_per_second = 0;
    HttpFeatureSource src(cfg);
    CHECK(src.request_target("Lake Wairarapa", "New Zealand", "").find("q=Lake%20Wairarapa") != std::string::npos);
    const long before = http_request_count();
    const auto found = src.query("Lake Wairarapa", "New Zealand", "Wellington");
    CHECK(http_request_count() == before + 1);
    CHECK(seen == "Lake Wairarapa");
    REQUIRE(found.size() == 1);
    CHECK(found[0].name == "Lake Wairarapa");
    CHECK(found[0].region == "Wellington");
    CHECK(effective_kind(found[0].geometry) == GeometryKind::polygon);
    CHECK_THROWS_AS(src.query("boom", "", ""), SourceError);

    server.stop();
    t.join();
  }
}
