#include <doctest.h>

#include <algorithm>

#include "georef/parser.hpp"

using namespace georef;

namespace {

std::vector<std::string> surfaces(const std::vector<PlaceMention>& ms) {
  std::vector<std::string> out;
  for (const auto& m : ms) out.push_back(m.surface);
  return out;
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

}  // namespace

TEST_SUITE("parser") {
  TEST_CASE("distance phrases") {
    auto d = parse_distance_phrase("Ca 2km");
    REQUIRE(d);
    CHECK(d->km == 2.0);
    CHECK(d->precision == Precision::approximate);
    d = parse_distance_phrase("400m");
    REQUIRE(d);
    CHECK(d->km == doctest::Approx(0.4));
    CHECK(d->precision == Precision::exact);
    d = parse_distance_phrase("3km south");
    REQUIRE(d);
    CHECK(d->km == 3.0);
    CHECK(d->precision == Precision::exact);
    d = parse_distance_phrase("about 1.5 miles");
    REQUIRE(d);
    CHECK(d->km == doctest::Approx(1.5 * 1.609344));
    CHECK(d->precision == Precision::approximate);
    CHECK_FALSE(parse_distance_phrase("near the hut").has_value());
  }

  TEST_CASE("place names") {
    CHECK(surfaces(extract_place_names("Ca 2km north of Puketi.")) == std::vector<std::string>{"Puketi"});
    const auto names = surfaces(extract_place_names(
        "Fiordland, Mount George, south shore of lake below Elizabeth Burn, 2km north of peak"));
    CHECK(contains(names, "Fiordland"));
    CHECK(contains(names, "Mount George"));
    CHECK(contains(names, "Elizabeth Burn"));
    CHECK(extract_place_names("under logs in wet forest").empty());
  }

  TEST_CASE("manual override spans are checked") {
    const std::string text = "Ca 2km north of Puketi.";
    PlaceMention ok{"Puketi", 16, 22};
    CHECK(extract_place_names(text, std::vector{ok}).size() == 1);
    PlaceMention bad{"Puketi", 16, 40};
    CHECK_THROWS_WITH_AS(extract_place_names(text, std::vector{bad}), doctest::Contains("Puketi"), ParseError);
  }

  TEST_CASE("degenerate relation with distance") {
    const std::string text = "Ca 2km north of Puketi";
    const auto triples = extract_relations(text, extract_place_names(text));
    REQUIRE(triples.size() == 1);
    const RelationTriple& t = triples[0];
    CHECK(t.degenerate());
    CHECK(t.indicator == "north of");
    CHECK(t.relatum.surface == "Puketi");
    CHECK(t.distance_km == 2.0);
    CHECK(t.bearing == Compass::N);
    CHECK(t.precision == Precision::approximate);
  }

  TEST_CASE("no indicator words") {
    const std::string text = "Puketi Forest, kauri litter";
    CHECK(extract_relations(text, extract_place_names(text)).empty());
  }

  TEST_CASE("shore relation and coreference") {
    const std::string text = "NE shore of L. Wairarapa - about 400m from lake";
    const ParseResult r = parse_locality(text, HeuristicExtractor());
    REQUIRE(r.triples.size() == 2);
    CHECK(r.triples[0].degenerate());
    CHECK(r.triples[0].indicator == "NE shore of");
    CHECK(canonical_name(r.triples[0].relatum) == "Lake Wairarapa");
    CHECK(r.triples[0].bearing == Compass::NE);
    CHECK(r.triples[1].degenerate());
    CHECK(r.triples[1].indicator == "from");
    CHECK(r.triples[1].relatum.surface == "lake");
    CHECK(r.triples[1].relatum.kind == MentionKind::anaphor);
    CHECK(canonical_name(r.triples[1].relatum) == "Lake Wairarapa");
    CHECK(r.triples[1].distance_km == doctest::Approx(0.4));
    CHECK(r.triples[1].precision == Precision::approximate);
    CHECK(check_parse_result(text, r).empty());
  }

  TEST_CASE("between relation") {
    const std::string text = "Mount Azimuth, cliffs between Azimuth and Courrejolles Point near low point in ridge";
    const ParseResult r = parse_locality(text, HeuristicExtractor());
    std::vector<std::string> relata;
    for (const auto& t : r.triples)
      if (t.indicator == "between") relata.push_back(canonical_name(t.relatum));
    CHECK(contains(relata, "Azimuth"));
    CHECK(contains(relata, "Courrejolles Point"));
  }

  TEST_CASE("textual containment chain") {
    const std::string text = "North Island, Bay of Islands County. Ca 2km north of Puketi";
    const ParseResult r = parse_locality(text, HeuristicExtractor());
    REQUIRE(r.containment.size() == 2);
    CHECK(r.containment[0].parent.surface == "North Island");
    CHECK(r.containment[0].child.surface == "Bay of Islands County");
    CHECK(r.containment[1].parent.surface == "Bay of Islands County");
    CHECK(r.containment[1].child.surface == "Puketi");
  }

  TEST_CASE("single mention has no containment") {
    const std::string text = "Ca 2km north of Puketi";
    CHECK(detect_containment(text, extract_place_names(text)).empty());
  }

  TEST_CASE("geometric containment with siblings") {
    const std::string text = "Fiordland, Mount George, south shore of lake below Elizabeth Burn, 2km north of peak";
    auto mentions = extract_place_names(text);
    std::vector<std::optional<Footprint>> fp(mentions.size());
    const auto box_fp = [](GeoBox b) {
      return Footprint{b, b.center(), true, [b](const GeoPoint& p) { return b.contains(p); }};
    };
    for (std::size_t i = 0; i < mentions.size(); ++i) {
      if (mentions[i].surface == "Fiordland") fp[i] = box_fp({-46.4, 166.4, -44.6, 168.3});
      if (mentions[i].surface == "Mount George")
        fp[i] = Footprint{GeoBox::of({-45.455, 167.245}), {-45.455, 167.245}, false, nullptr};
      if (mentions[i].surface == "Elizabeth Burn")
        fp[i] = Footprint{{-45.44, 167.22, -45.405, 167.31}, {-45.42, 167.28}, false, nullptr};
    }
    const auto pairs = detect_containment(text, mentions, &fp);
    std::vector<std::pair<std::string, std::string>> got;
    for (const auto& p : pairs) got.emplace_back(p.parent.surface, p.child.surface);
    CHECK(got == std::vector<std::pair<std::string, std::string>>{{"Fiordland", "Mount George"},
                                                                   {"Fiordland", "Elizabeth Burn"}});
  }

  TEST_CASE("lexicon file") {
    const auto lex = IndicatorLexicon::parse("# version: 3\n{distance?} north of\nnear\n");
    CHECK(lex.version() == 3);
    REQUIRE(lex.patterns().size() == 2);
    CHECK(lex.patterns()[0].distance == IndicatorLexicon::Pattern::Distance::optional);
    CHECK(IndicatorLexicon::builtin().patterns().size() > 20);
  }

  TEST_CASE("json round trip") {
    const std::string text = "NE shore of L. Wairarapa - about 400m from lake";
    const ParseResult r = parse_locality(text, HeuristicExtractor());
    const nlohmann::json j = r;
    CHECK(j.get<ParseResult>() == r);
  }
}
