#include <catch2/catch_amalgamated.hpp>

#include <sstream>
#include <string>

#include "rde/reshape.hpp"
#include "testutil.hpp"

namespace {

rde::LongSchema fruit_schema() { return {"id", "resp", "alt", {"Price"}}; }

// three transactions over three fruits; min_obs = 1 keeps both assortments
const char* kFruitLong =
    "id,resp,alt,Price\n"
    "T1,0,Apple,10\n"
    "T1,1,Banana,20\n"
    "T2,1,Banana,21\n"
    "T2,0,Cherry,31\n"
    "T3,1,Apple,12\n"
    "T3,0,Banana,22\n";

rde::TransactionDataset fruit_dataset(std::int64_t min_obs = 1) {
  std::istringstream in(kFruitLong);
  rde::ReshapeOptions opts;
  opts.min_obs = min_obs;
  return rde::reshape(rde::parse_long(in, fruit_schema()), fruit_schema(), opts);
}

}  // namespace

TEST_CASE("long reshape codes labels lexicographically", "[reshape]") {
  const auto ds = fruit_dataset();
  REQUIRE(ds.catalog.size() == 3);
  CHECK(ds.catalog.label(1) == "Apple");
  CHECK(ds.catalog.label(2) == "Banana");
  CHECK(ds.catalog.label(3) == "Cherry");
  CHECK(ds.catalog.code_of("Cherry") == 3);
  CHECK(!ds.catalog.code_of("Durian").has_value());
}

TEST_CASE("long reshape groups, counts, and orders choice sets", "[reshape]") {
  const auto ds = fruit_dataset();
  REQUIRE(ds.remaining_sets.size() == 2);
  CHECK(ds.remaining_sets[0].set_code == 1);
  CHECK(ds.remaining_sets[0].codes == std::vector<int>{1, 2});
  CHECK(ds.remaining_sets[0].observations == 2);
  CHECK(ds.remaining_sets[1].codes == std::vector<int>{2, 3});
  CHECK(ds.remaining_sets[1].observations == 1);

  REQUIRE(ds.records.size() == 3);
  CHECK(ds.records[0].id == "T1");
  CHECK(ds.records[0].chosen_code == 2);
  CHECK(ds.records[0].set_code == 1);
  CHECK(ds.records[0].asv == std::vector<double>{10, 20});
  CHECK(ds.records[1].id == "T2");
  CHECK(ds.records[1].chosen_code == 2);
  CHECK(ds.records[1].set_code == 2);
  CHECK(ds.records[2].chosen_code == 1);
  CHECK_NOTHROW(ds.validate());
}

TEST_CASE("covariates follow the code order, not the input order", "[reshape]") {
  // T1 lists Banana before Apple; the record must still store Apple first
  std::istringstream in(
      "id,resp,alt,Price\n"
      "T1,1,Banana,20\n"
      "T1,0,Apple,10\n");
  rde::ReshapeOptions opts;
  opts.min_obs = 1;
  const auto ds = rde::reshape(rde::parse_long(in, fruit_schema()), fruit_schema(), opts);
  REQUIRE(ds.records.size() == 1);
  CHECK(ds.records[0].asv == std::vector<double>{10, 20});
  CHECK(ds.asv_value(ds.records[0], 2, 0) == 20);
}

TEST_CASE("min_obs filters sets and keeps the accounting consistent", "[reshape]") {
  const auto ds = fruit_dataset(2);
  REQUIRE(ds.remaining_sets.size() == 1);
  CHECK(ds.remaining_sets[0].codes == std::vector<int>{1, 2});
  REQUIRE(ds.removed_sets.size() == 1);
  CHECK(ds.removed_sets[0].codes == std::vector<int>{2, 3});
  CHECK(ds.removed_sets[0].observations == 1);
  REQUIRE(ds.records.size() == 2);
  CHECK(ds.records[0].id == "T1");
  CHECK(ds.records[1].id == "T3");
  // kept + removed + singletons covers every transaction
  CHECK(static_cast<std::int64_t>(ds.records.size()) + ds.removed_observations() +
            ds.singleton_observations() ==
        3);
}

TEST_CASE("single-alternative assortments are always dropped", "[reshape]") {
  std::istringstream in(
      "id,resp,alt,Price\n"
      "T1,1,Apple,10\n"
      "T2,1,Apple,11\n"
      "T2,0,Banana,21\n"
      "T3,1,Banana,19\n"
      "T3,0,Apple,12\n");
  rde::ReshapeOptions opts;
  opts.min_obs = 1;
  const auto ds = rde::reshape(rde::parse_long(in, fruit_schema()), fruit_schema(), opts);
  REQUIRE(ds.removed_singletons.size() == 1);
  CHECK(ds.removed_singletons[0].codes == std::vector<int>{1});
  CHECK(ds.removed_singletons[0].observations == 1);
  CHECK(ds.removed_sets.empty());
  CHECK(ds.records.size() == 2);
  CHECK(ds.singleton_observations() == 1);
}

TEST_CASE("choice sets order lexicographically with shorter prefixes first", "[reshape]") {
  // observed labels a, e, g, h take dense codes 1..4; the assortments become
  // {1,2,4}, {1,2,3,4}, {1,2} and must sort with prefixes first
  std::ostringstream csv;
  csv << "id,resp,alt,Price\n";
  auto add = [&](const std::string& id, const std::string& alts) {
    bool first = true;
    for (char c : alts) {
      csv << id << ',' << (first ? 1 : 0) << ',' << c << ",1\n";
      first = false;
    }
  };
  add("T1", "aeh");   // {1, 2, 4}
  add("T2", "aegh");  // {1, 2, 3, 4}
  add("T3", "ae");    // {1, 2}
  std::istringstream in(csv.str());
  rde::ReshapeOptions opts;
  opts.min_obs = 1;
  const auto ds = rde::reshape(rde::parse_long(in, fruit_schema()), fruit_schema(), opts);
  REQUIRE(ds.remaining_sets.size() == 3);
  CHECK(ds.remaining_sets[0].codes == std::vector<int>{1, 2});
  CHECK(ds.remaining_sets[1].codes == std::vector<int>{1, 2, 3, 4});
  CHECK(ds.remaining_sets[2].codes == std::vector<int>{1, 2, 4});
}

TEST_CASE("long parse rejects malformed input precisely", "[reshape]") {
  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return rde::parse_long(in, fruit_schema());
  };

  SECTION("missing required column") {
    CHECK_THROWS_MATCHES(parse("id,resp,Price\nT1,1,10\n"), rde::SchemaError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("'alt'")));
  }
  SECTION("empty input") {
    CHECK_THROWS_AS(parse(""), rde::SchemaError);
  }
  SECTION("non-binary response names the line") {
    CHECK_THROWS_MATCHES(
        parse("id,resp,alt,Price\nT1,2,Apple,10\n"), rde::DataError,
        Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("line 2")));
  }
  SECTION("non-numeric covariate cell") {
    CHECK_THROWS_MATCHES(
        parse("id,resp,alt,Price\nT1,1,Apple,cheap\n"), rde::DataError,
        Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("cheap")));
  }
  SECTION("ragged row") {
    CHECK_THROWS_AS(parse("id,resp,alt,Price\nT1,1,Apple\n"), rde::DataError);
  }
  SECTION("empty id cell") {
    CHECK_THROWS_AS(parse("id,resp,alt,Price\n,1,Apple,10\n"), rde::DataError);
  }
}

TEST_CASE("duplicate (id, alternative) rows fail unless dedup drops exact copies",
          "[reshape]") {
  const std::string dup =
      "id,resp,alt,Price\n"
      "T1,1,Apple,10\n"
      "T1,0,Banana,20\n"
      "T1,1,Apple,10\n";
  std::istringstream in1(dup);
  CHECK_THROWS_MATCHES(rde::parse_long(in1, fruit_schema()), rde::DataError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("lines 2 and 4")));

  rde::ParseOptions dedup;
  dedup.dedup = true;
  std::istringstream in2(dup);
  const auto rows = rde::parse_long(in2, fruit_schema(), dedup);
  CHECK(rows.size() == 2);

  // same key with a different payload is a conflict even under dedup
  std::istringstream in3(
      "id,resp,alt,Price\n"
      "T1,1,Apple,10\n"
      "T1,1,Apple,99\n");
  CHECK_THROWS_AS(rde::parse_long(in3, fruit_schema(), dedup), rde::DataError);
}

TEST_CASE("reshape requires exactly one chosen alternative per id", "[reshape]") {
  auto reshape_text = [](const std::string& text) {
    std::istringstream in(text);
    rde::ReshapeOptions opts;
    opts.min_obs = 1;
    return rde::reshape(rde::parse_long(in, fruit_schema()), fruit_schema(), opts);
  };
  CHECK_THROWS_MATCHES(reshape_text("id,resp,alt,Price\n"
                                    "T1,0,Apple,10\n"
                                    "T1,0,Banana,20\n"),
                       rde::DataError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("0 chosen")));
  CHECK_THROWS_MATCHES(reshape_text("id,resp,alt,Price\n"
                                    "T1,1,Apple,10\n"
                                    "T1,1,Banana,20\n"),
                       rde::DataError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("2 chosen")));
}

TEST_CASE("missing covariates fail for surviving records and name the cell", "[reshape]") {
  rde::ReshapeOptions opts;
  opts.min_obs = 1;
  std::istringstream in(
      "id,resp,alt,Price\n"
      "T1,1,Apple,10\n"
      "T1,0,Banana,\n");
  CHECK_THROWS_MATCHES(
      rde::reshape(rde::parse_long(in, fruit_schema()), fruit_schema(), opts), rde::DataError,
      Catch::Matchers::MessageMatches(
          Catch::Matchers::ContainsSubstring("'Price' is missing for id 'T1', alternative 2")));

  // records filtered away may carry gaps; only the estimation sample matters
  std::istringstream in2(
      "id,resp,alt,Price\n"
      "T1,1,Apple,10\n"
      "T1,0,Banana,20\n"
      "T2,1,Apple,11\n"
      "T2,0,Banana,21\n"
      "T3,1,Banana,\n"
      "T3,0,Cherry,30\n");
  rde::ReshapeOptions keep2;
  keep2.min_obs = 2;
  const auto ds = rde::reshape(rde::parse_long(in2, fruit_schema()), fruit_schema(), keep2);
  CHECK(ds.records.size() == 2);
}

TEST_CASE("min_obs below one is rejected", "[reshape]") {
  std::istringstream in(kFruitLong);
  rde::ReshapeOptions opts;
  opts.min_obs = 0;
  CHECK_THROWS_AS(rde::reshape(rde::parse_long(in, fruit_schema()), fruit_schema(), opts),
                  rde::DomainError);
}

TEST_CASE("filtering everything away is an error", "[reshape]") {
  std::istringstream in(kFruitLong);
  rde::ReshapeOptions opts;
  opts.min_obs = 10;
  CHECK_THROWS_MATCHES(
      rde::reshape(rde::parse_long(in, fruit_schema()), fruit_schema(), opts), rde::DataError,
      Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("no choice sets")));
}

// ---- wide format ----

namespace {

rde::WideSchema color_wide_schema() {
  return {"id", "resp", "alt", {"Price"}, "alt_code", "set", "set_code"};
}

// the same market expressed long and wide; codes follow the label order
// Blue = 1, Green = 2, Red = 3
const char* kColorLong =
    "id,resp,alt,Price\n"
    "T1,1,Blue,10\n"
    "T1,0,Green,20\n"
    "T2,0,Blue,11\n"
    "T2,1,Green,21\n"
    "T3,1,Red,5\n"
    "T3,0,Blue,12\n"
    "T3,0,Green,22\n";

const char* kColorWide =
    "id,resp,alt,alt_code,set,set_code,Price_1,Price_2,Price_3\n"
    "T1,1,Blue,1,1|2,1,10,20,999\n"
    "T2,1,Green,2,1|2,1,11,21,\n"
    "T3,1,Red,3,1|2|3,2,12,22,5\n";

}  // namespace

TEST_CASE("wide reshape equals the long reshape of the same market", "[reshape]") {
  rde::ReshapeOptions opts;
  opts.min_obs = 1;
  std::istringstream lin(kColorLong);
  const auto from_long = rde::reshape(rde::parse_long(lin, fruit_schema()), fruit_schema(), opts);
  std::istringstream win(kColorWide);
  const auto from_wide =
      rde::reshape(rde::parse_wide(win, color_wide_schema()), color_wide_schema(), opts);
  // out-of-set cells (999 and blank above) are ignored, not validated
  CHECK(from_long == from_wide);
}

TEST_CASE("wide parse validates structure and consistency", "[reshape]") {
  auto parse = [](const std::string& body) {
    const std::string text = "id,resp,alt,alt_code,set,set_code,Price_1,Price_2,Price_3\n" + body;
    std::istringstream in(text);
    return rde::parse_wide(in, color_wide_schema());
  };

  SECTION("malformed choice set names the token") {
    CHECK_THROWS_MATCHES(parse("T1,1,Blue,1,1||3,1,10,20,30\n"), rde::DataError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("empty token at position 2")));
    CHECK_THROWS_MATCHES(parse("T1,1,Blue,1,1|x,1,10,20,30\n"), rde::DataError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("'x'")));
    CHECK_THROWS_AS(parse("T1,1,Blue,1,1|1,1,10,20,30\n"), rde::DataError);
  }
  SECTION("chosen alternative must belong to the set") {
    CHECK_THROWS_MATCHES(parse("T1,1,Red,3,1|2,1,10,20,30\n"), rde::DataError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("not in the choice set")));
  }
  SECTION("code and label must pair consistently") {
    CHECK_THROWS_AS(parse("T1,1,Blue,1,1|2,1,10,20,30\nT2,1,Azul,1,1|2,1,10,20,30\n"),
                    rde::DataError);
    CHECK_THROWS_AS(parse("T1,1,Blue,1,1|2,1,10,20,30\nT2,1,Blue,2,1|2,1,10,20,30\n"),
                    rde::DataError);
  }
  SECTION("set string and set code must pair consistently") {
    CHECK_THROWS_AS(parse("T1,1,Blue,1,1|2,1,10,20,30\nT2,1,Blue,1,1|2,7,10,20,30\n"),
                    rde::DataError);
    CHECK_THROWS_AS(parse("T1,1,Blue,1,1|2,1,10,20,30\nT2,1,Blue,1,1|2|3,1,10,20,30\n"),
                    rde::DataError);
  }
  SECTION("the set string order does not matter") {
    const auto rows = parse("T1,1,Blue,1,2|1,1,10,20,30\nT2,1,Green,2,1|2,1,11,21,31\n");
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].set_codes == std::vector<int>{1, 2});
  }
  SECTION("wide response column, when present, must be 1") {
    CHECK_THROWS_AS(parse("T1,0,Blue,1,1|2,1,10,20,30\n"), rde::DataError);
  }
  SECTION("duplicate id fails, dedup drops exact copies") {
    CHECK_THROWS_AS(parse("T1,1,Blue,1,1|2,1,10,20,30\nT1,1,Blue,1,1|2,1,10,20,30\n"),
                    rde::DataError);
    const std::string text =
        "id,resp,alt,alt_code,set,set_code,Price_1,Price_2,Price_3\n"
        "T1,1,Blue,1,1|2,1,10,20,30\n"
        "T1,1,Blue,1,1|2,1,10,20,30\n";
    std::istringstream in(text);
    rde::ParseOptions dedup;
    dedup.dedup = true;
    CHECK(rde::parse_wide(in, color_wide_schema(), dedup).size() == 1);
  }
  SECTION("missing covariate column for a set member") {
    const std::string text =
        "id,resp,alt,alt_code,set,set_code,Price_1,Price_2\n"
        "T1,1,Blue,1,1|3,1,10,20\n";
    std::istringstream in(text);
    CHECK_THROWS_MATCHES(rde::parse_wide(in, color_wide_schema()), rde::SchemaError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("Price_3")));
  }
}

TEST_CASE("wide reshape demands a gap-free code universe", "[reshape]") {
  const std::string text =
      "id,resp,alt,alt_code,set,set_code,Price_1,Price_2,Price_3\n"
      "T1,1,Blue,1,1|3,1,10,20,30\n";
  std::istringstream in(text);
  const auto rows = rde::parse_wide(in, color_wide_schema());
  rde::ReshapeOptions opts;
  opts.min_obs = 1;
  CHECK_THROWS_MATCHES(rde::reshape(rows, color_wide_schema(), opts), rde::DataError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("code 2 never appears")));
}

TEST_CASE("never-chosen alternatives get placeholder labels in wide reshape", "[reshape]") {
  const std::string text =
      "id,resp,alt,alt_code,set,set_code,Price_1,Price_2\n"
      "T1,1,Blue,1,1|2,1,10,20\n"
      "T2,1,Blue,1,1|2,1,11,21\n";
  std::istringstream in(text);
  rde::ReshapeOptions opts;
  opts.min_obs = 1;
  const auto ds = rde::reshape(rde::parse_wide(in, color_wide_schema()), color_wide_schema(), opts);
  CHECK(ds.catalog.label(1) == "Blue");
  CHECK(ds.catalog.label(2) == "Alternative 2");
}

TEST_CASE("dataset validation catches structural corruption", "[reshape]") {
  auto ds = fruit_dataset();
  SECTION("chosen outside the set") {
    ds.records[0].chosen_code = 3;
    CHECK_THROWS_AS(ds.validate(), rde::DataError);
  }
  SECTION("observation counts out of sync") {
    ds.remaining_sets[0].observations = 5;
    CHECK_THROWS_AS(ds.validate(), rde::DataError);
  }
  SECTION("covariate arity mismatch") {
    ds.records[0].asv.push_back(1.0);
    CHECK_THROWS_AS(ds.validate(), rde::DataError);
  }
  SECTION("duplicate labels") {
    ds.catalog.entries[1].label = "Apple";
    CHECK_THROWS_AS(ds.validate(), rde::DataError);
  }
}

TEST_CASE("quoted fields and CRLF line endings parse cleanly", "[reshape][csv]") {
  std::istringstream in(
      "id,resp,alt,Price\r\n"
      "T1,1,\"Apple, Large\",10\r\n"
      "T1,0,\"He said \"\"hi\"\"\",20\r\n");
  const auto rows = rde::parse_long(in, fruit_schema());
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].alternative == "Apple, Large");
  CHECK(rows[1].alternative == "He said \"hi\"");
}

TEST_CASE("alternate delimiters work end to end", "[reshape][csv]") {
  std::istringstream in(
      "id;resp;alt;Price\n"
      "T1;1;Apple;10\n"
      "T1;0;Banana;20\n");
  rde::ParseOptions popts;
  popts.delimiter = ';';
  const auto rows = rde::parse_long(in, fruit_schema(), popts);
  CHECK(rows.size() == 2);
}
