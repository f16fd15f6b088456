#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <sstream>
#include <string>

#include "rde/reshape.hpp"
#include "rde/serialize.hpp"
#include "testutil.hpp"

namespace tu = testutil;

namespace {

rde::LongSchema fruit_schema() { return {"id", "resp", "alt", {"Price"}}; }

rde::TransactionDataset fruit_dataset() {
  // covariates chosen to be awkward in binary (0.1, 1/3) so the round trip
  // has to preserve exact doubles, and a label that needs CSV quoting
  std::istringstream in(
      "id,resp,alt,Price\n"
      "T1,0,\"Apple, Large\",0.1\n"
      "T1,1,Banana,0.3333333333333333\n"
      "T2,1,\"Apple, Large\",0.30000000000000004\n"
      "T2,0,Cherry,31\n"
      "T3,1,Banana,1e-300\n"
      "T3,0,\"Apple, Large\",12.25\n");
  rde::ReshapeOptions opts;
  opts.min_obs = 1;
  return rde::reshape(rde::parse_long(in, fruit_schema()), fruit_schema(), opts);
}

}  // namespace

TEST_CASE("dataset documents round trip exactly", "[serialize]") {
  const auto ds = fruit_dataset();
  const auto j = rde::dataset_to_json(ds);
  CHECK(j.at("format") == "transaction-dataset");
  const auto back = rde::dataset_from_json(j);
  CHECK(back == ds);  // field-wise, including exact covariate doubles

  const auto dir = tu::fresh_dir("serialize");
  const auto path = (dir / "data.json").string();
  rde::save_dataset(path, ds);
  CHECK(rde::load_dataset(path) == ds);
  const std::string text = tu::read_file(path);
  CHECK(text.front() == '{');
  CHECK(text.back() == '\n');
  std::filesystem::remove_all(dir);
}

TEST_CASE("model documents round trip exactly", "[serialize]") {
  const auto g = tu::fittable_sample(41, 3, 1, 400, 0.65);
  const auto f = rde::fit(g.censored, 0.7);
  const auto j = rde::model_to_json(f);
  CHECK(j.at("format") == "demand-model");
  CHECK(j.at("model") == "Conditional Logit Model");
  CHECK(j.at("method") == "Robust Demand Estimation");

  const auto back = rde::model_from_json(j);
  CHECK(back.coefficients == f.coefficients);
  CHECK(back.coef_names == f.coef_names);
  CHECK(back.catalog == f.catalog);
  CHECK(back.remaining_sets == f.remaining_sets);
  CHECK(back.asv_names == f.asv_names);
  CHECK(back.id_name == f.id_name);
  CHECK(back.response_name == f.response_name);
  CHECK(back.alternatives_name == f.alternatives_name);
  CHECK(back.estimates == f.estimates);
  CHECK(back.std_errors == f.std_errors);
  CHECK(back.z_values == f.z_values);
  CHECK(back.p_values == f.p_values);
  CHECK(back.covariance == f.covariance);
  CHECK(back.loglik == f.loglik);
  CHECK(back.market_share == f.market_share);
  CHECK(back.convergence.iterations == f.convergence.iterations);
  CHECK(back.convergence.gradient_max_norm == f.convergence.gradient_max_norm);
  CHECK(back.convergence.converged == f.convergence.converged);
  CHECK(back.arrivals.observed == f.arrivals.observed);
  CHECK(back.arrivals.no_purchase == f.arrivals.no_purchase);
  CHECK(back.arrivals.total == f.arrivals.total);
  CHECK(back.arrivals.no_purchase_rounded == f.arrivals.no_purchase_rounded);
  CHECK(back.arrivals.total_rounded == f.arrivals.total_rounded);

  const auto dir = tu::fresh_dir("model");
  const auto path = (dir / "model.json").string();
  rde::save_model(path, f);
  const auto loaded = rde::load_model(path);
  CHECK(loaded.coefficients == f.coefficients);
  CHECK(loaded.covariance == f.covariance);
  std::filesystem::remove_all(dir);
}

TEST_CASE("scenario documents round trip exactly", "[serialize]") {
  rde::ScenarioSpec s;
  s.n_alternatives = 3;
  s.alpha = {0.0, 0.4, 0.9};
  s.beta = {-0.5, 0.25};
  s.asv_names = {"Price", "Promo"};
  s.sets = {{1, 2, 3}, {2, 3}};
  s.set_weights = {2.0, 1.0};
  s.asv_ranges = {{0.0, 1.0}, {-0.5, 0.5}};
  s.arrivals = 500;
  s.gamma = -0.75;
  s.seed = 99;
  s.min_obs = 5;

  const auto back = rde::scenario_from_json(rde::scenario_to_json(s));
  CHECK(back.n_alternatives == s.n_alternatives);
  CHECK(back.alpha == s.alpha);
  CHECK(back.beta == s.beta);
  CHECK(back.asv_names == s.asv_names);
  CHECK(back.sets == s.sets);
  CHECK(back.set_weights == s.set_weights);
  CHECK(back.asv_ranges == s.asv_ranges);
  CHECK(back.arrivals == s.arrivals);
  REQUIRE(back.gamma.has_value());
  CHECK(*back.gamma == -0.75);
  CHECK_FALSE(back.target_share.has_value());
  CHECK(back.seed == 99);
  CHECK(back.min_obs == 5);

  // the target-share variant keeps the exclusive-or intact
  auto t = s;
  t.gamma.reset();
  t.target_share = 0.7;
  const auto back2 = rde::scenario_from_json(rde::scenario_to_json(t));
  CHECK_FALSE(back2.gamma.has_value());
  REQUIRE(back2.target_share.has_value());
  CHECK(*back2.target_share == 0.7);

  const auto dir = tu::fresh_dir("scenario");
  const auto path = (dir / "scenario.json").string();
  rde::save_scenario(path, s);
  CHECK(rde::load_scenario(path).alpha == s.alpha);
  std::filesystem::remove_all(dir);
}

TEST_CASE("document readers reject malformed input with schema errors", "[serialize]") {
  const auto ds = fruit_dataset();
  auto j = rde::dataset_to_json(ds);

  SECTION("wrong format marker") {
    j["format"] = "something-else";
    CHECK_THROWS_MATCHES(rde::dataset_from_json(j), rde::SchemaError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring(
                             "'transaction-dataset'")));
    CHECK_THROWS_AS(rde::model_from_json(rde::dataset_to_json(ds)), rde::SchemaError);
  }
  SECTION("missing field") {
    j.erase("records");
    CHECK_THROWS_MATCHES(rde::dataset_from_json(j), rde::SchemaError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("missing field 'records'")));
  }
  SECTION("wrong field type") {
    j["asv"] = 12;
    CHECK_THROWS_MATCHES(rde::dataset_from_json(j), rde::SchemaError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("'asv'")));
  }
  SECTION("structurally invalid content") {
    j["remaining_sets"][0]["code"] = 9;
    CHECK_THROWS_MATCHES(rde::dataset_from_json(j), rde::SchemaError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("fails validation")));
  }
  SECTION("inconsistent model table") {
    const auto g = tu::fittable_sample(43, 3, 1, 300, 0.65);
    auto mj = rde::model_to_json(rde::fit(g.censored, 0.7));
    mj["estimates"].push_back(0.0);
    CHECK_THROWS_MATCHES(rde::model_from_json(mj), rde::SchemaError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring(
                             "inconsistent coefficient table")));
  }
  SECTION("ragged covariance matrix") {
    const auto g = tu::fittable_sample(43, 3, 1, 300, 0.65);
    auto mj = rde::model_to_json(rde::fit(g.censored, 0.7));
    mj["covariance"][1].push_back(0.0);
    CHECK_THROWS_AS(rde::model_from_json(mj), rde::SchemaError);
  }
  SECTION("unparseable text and unreadable files") {
    CHECK_THROWS_MATCHES(
        rde::dataset_from_json(rde::detail::parse_text("{not json", "dataset")),
        rde::SchemaError, Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring(
                              "cannot parse")));
    CHECK_THROWS_AS(rde::load_dataset("/nonexistent/path/data.json"), rde::DataError);
  }
  SECTION("invalid scenario content") {
    rde::ScenarioSpec s;
    s.n_alternatives = 2;
    s.alpha = {0.0, 0.3};
    s.sets = {{1, 2}};
    s.set_weights = {1.0};
    s.arrivals = 10;
    s.gamma = 0.0;
    auto sj = rde::scenario_to_json(s);
    sj["alpha"] = {0.5, 0.3};  // smallest entry must be zero
    CHECK_THROWS_MATCHES(rde::scenario_from_json(sj), rde::SchemaError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("fails validation")));
  }
}

TEST_CASE("long-format CSV writer inverts the reshape", "[serialize]") {
  const auto ds = fruit_dataset();
  std::ostringstream out;
  rde::write_long_csv(out, ds);

  std::istringstream in(out.str());
  rde::ReshapeOptions opts;
  opts.min_obs = 1;
  const auto back = rde::reshape(rde::parse_long(in, fruit_schema()), fruit_schema(), opts);
  CHECK(back == ds);

  // a non-comma delimiter survives the same round trip
  std::ostringstream tab;
  rde::write_long_csv(tab, ds, '\t');
  std::istringstream tin(tab.str());
  rde::ParseOptions popts;
  popts.delimiter = '\t';
  const auto back_tab =
      rde::reshape(rde::parse_long(tin, fruit_schema(), popts), fruit_schema(), opts);
  CHECK(back_tab == ds);
}

TEST_CASE("arrivals CSV covers walk-aways as all-zero responses", "[serialize]") {
  rde::ScenarioSpec spec;
  spec.n_alternatives = 2;
  spec.alpha = {0.0, 0.5};
  spec.beta = {0.3};
  spec.asv_ranges = {{-1.0, 1.0}};
  spec.sets = {{1, 2}};
  spec.set_weights = {1.0};
  spec.arrivals = 40;
  spec.target_share = 0.6;
  spec.seed = 3;
  const auto g = rde::generate(spec);

  std::ostringstream out;
  rde::write_arrivals_csv(out, g);
  std::istringstream in(out.str());
  const auto table = rde::read_delimited(in, ',');
  REQUIRE(table.header == std::vector<std::string>{"id", "resp", "alt", "x1"});
  REQUIRE(table.rows.size() == 80);  // two alternatives per arrival

  std::int64_t purchases = 0;
  for (std::size_t i = 0; i < g.arrivals.size(); ++i) {
    const auto& r1 = table.rows[2 * i];
    const auto& r2 = table.rows[2 * i + 1];
    CHECK(r1[0] == rde::synthetic_id(static_cast<std::int64_t>(i)));
    CHECK(r1[0] == r2[0]);
    CHECK(r1[2] == "Alt_1");
    CHECK(r2[2] == "Alt_2");
    const int chosen = (r1[1] == "1" ? 1 : 0) + (r2[1] == "1" ? 2 : 0);
    CHECK(chosen == g.arrivals[i].chosen_code);
    purchases += chosen != 0 ? 1 : 0;
    // covariates print with shortest round-trip formatting
    CHECK(std::stod(r1[3]) == g.arrivals[i].asv[0]);
    CHECK(std::stod(r2[3]) == g.arrivals[i].asv[1]);
  }
  CHECK(purchases == g.purchases);
}
