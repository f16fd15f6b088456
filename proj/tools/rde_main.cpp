// Command-line front end: reshape raw transactions, fit the choice model,
// predict on new covariates, and simulate synthetic markets.
//
// Exit codes: 0 success; 2 usage, schema, domain, or state errors;
// 3 data validation errors; 4 numeric, convergence, or identification errors.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "rde/rde.hpp"

namespace {

int exit_code_for(const rde::Error& e) {
  switch (e.category()) {
    case rde::ErrorCategory::Schema:
    case rde::ErrorCategory::Domain:
    case rde::ErrorCategory::State:
      return 2;
    case rde::ErrorCategory::Data:
      return 3;
    case rde::ErrorCategory::Numeric:
    case rde::ErrorCategory::Convergence:
    case rde::ErrorCategory::RankDeficiency:
      return 4;
  }
  return 1;
}

char parse_delimiter(const std::string& s) {
  if (s == "\\t" || s == "tab" || s == "\t") return '\t';
  if (s.size() != 1)
    throw rde::DomainError("delimiter must be a single character or 'tab', got '" + s + "'");
  return s[0];
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw rde::DataError("cannot open '" + path + "' for reading");
  return in;
}

struct ReshapeArgs {
  std::string input, output;
  std::string idvar, resp, alts;
  std::vector<std::string> asv;
  std::string alts_code, choice_set, choice_set_code;
  std::int64_t min_obs = 30;
  std::string delimiter = ",";
  bool dedup = false;
};

int run_reshape(const ReshapeArgs& a) {
  const char delim = parse_delimiter(a.delimiter);
  const int wide_flags = (a.alts_code.empty() ? 0 : 1) + (a.choice_set.empty() ? 0 : 1) +
                         (a.choice_set_code.empty() ? 0 : 1);
  if (wide_flags != 0 && wide_flags != 3)
    throw rde::DomainError(
        "wide input needs --alts-code, --choice-set and --choice-set-code together");

  rde::ParseOptions popts;
  popts.delimiter = delim;
  popts.dedup = a.dedup;
  rde::ReshapeOptions ropts;
  ropts.min_obs = a.min_obs;

  std::ifstream in = open_input(a.input);
  rde::TransactionDataset ds;
  if (wide_flags == 3) {
    rde::WideSchema schema{a.idvar, a.resp, a.alts, a.asv,
                           a.alts_code, a.choice_set, a.choice_set_code};
    ds = rde::reshape(rde::parse_wide(in, schema, popts), schema, ropts);
  } else {
    rde::LongSchema schema{a.idvar, a.resp, a.alts, a.asv};
    ds = rde::reshape(rde::parse_long(in, schema, popts), schema, ropts);
  }
  rde::save_dataset(a.output, ds);
  std::cout << rde::reshape_report(ds);
  std::cerr << "dataset written to " << a.output << "\n";
  return 0;
}

struct FitArgs {
  std::string input, output;
  double prop = 0.7;
};

int run_fit(const FitArgs& a) {
  const rde::TransactionDataset ds = rde::load_dataset(a.input);
  const rde::FitResult f = rde::fit(ds, a.prop);
  rde::save_model(a.output, f);
  std::cout << rde::fit_report(f);
  std::cerr << "model written to " << a.output << "\n";
  return 0;
}

struct PredictArgs {
  std::string model, input, output;
  int set_code = 0;
  bool sampled = false;
  std::uint64_t seed = 0;
  bool include_no_purchase = false;
  std::string delimiter = ",";
};

int run_predict(const PredictArgs& a) {
  const char delim = parse_delimiter(a.delimiter);
  const rde::FitResult model = rde::load_model(a.model);

  // locate the set first so the covariate columns can be resolved
  const rde::ChoiceSet* set = nullptr;
  for (const auto& s : model.remaining_sets)
    if (s.set_code == a.set_code) set = &s;
  if (set == nullptr)
    throw rde::DomainError("unknown choice-set code " + std::to_string(a.set_code) +
                           "; the fitted model has sets 1.." +
                           std::to_string(model.remaining_sets.size()));

  std::ifstream in = open_input(a.input);
  const rde::Table t = rde::read_delimited(in, delim);
  std::vector<std::vector<std::size_t>> columns(set->codes.size());
  for (std::size_t pos = 0; pos < set->codes.size(); ++pos)
    for (const auto& name : model.asv_names)
      columns[pos].push_back(
          t.require_column(name + "_" + std::to_string(set->codes[pos])));

  std::vector<rde::CovariateRow> rows;
  rows.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    rde::CovariateRow row(set->codes.size());
    for (std::size_t pos = 0; pos < set->codes.size(); ++pos)
      for (std::size_t a2 = 0; a2 < model.asv_names.size(); ++a2)
        row[pos].push_back(rde::parse_double_cell(t.rows[i][columns[pos][a2]], t.lines[i],
                                                  t.header[columns[pos][a2]]));
    rows.push_back(std::move(row));
  }

  rde::PredictionOptions popts;
  popts.fixed = !a.sampled;
  popts.seed = a.seed;
  popts.include_no_purchase = a.include_no_purchase;
  const rde::PredictionResult pred = rde::predict(model, rows, a.set_code, popts);

  std::ofstream out(a.output, std::ios::binary);
  if (!out) throw rde::DataError("cannot open '" + a.output + "' for writing");
  out << "# set_code=" << pred.set_code << " mode=" << (pred.fixed ? "fixed" : "sampled");
  if (!pred.fixed) out << " seed=" << pred.seed;
  out << '\n';
  if (a.include_no_purchase) out << "No_Purchase" << delim;
  for (std::size_t pos = 0; pos < pred.alternative_codes.size(); ++pos)
    out << "P_" << pred.alternative_codes[pos] << delim;
  out << "Decision\n";
  for (std::size_t i = 0; i < pred.probabilities.size(); ++i) {
    if (a.include_no_purchase) out << rde::format_double(pred.no_purchase[i]) << delim;
    for (double p : pred.probabilities[i]) out << rde::format_double(p) << delim;
    out << pred.decisions[i] << '\n';
  }
  out.flush();
  if (!out) throw rde::DataError("failed while writing '" + a.output + "'");
  std::cerr << pred.probabilities.size() << " predictions written to " << a.output << "\n";
  return 0;
}

struct SimulateArgs {
  std::string scenario, prefix;
  std::optional<std::uint64_t> seed;
  int replications = 0;
  std::optional<double> prop;
};

int run_simulate(const SimulateArgs& a) {
  rde::ScenarioSpec spec = rde::load_scenario(a.scenario);
  if (a.seed) spec.seed = *a.seed;

  const rde::GeneratedData g = rde::generate(spec);
  {
    std::ofstream full(a.prefix + "_full.csv", std::ios::binary);
    if (!full) throw rde::DataError("cannot open '" + a.prefix + "_full.csv' for writing");
    rde::write_arrivals_csv(full, g);
  }
  {
    std::ofstream cens(a.prefix + "_censored.csv", std::ios::binary);
    if (!cens) throw rde::DataError("cannot open '" + a.prefix + "_censored.csv' for writing");
    rde::write_long_csv(cens, g.censored);
  }
  rde::save_dataset(a.prefix + "_dataset.json", g.censored);

  nlohmann::json summary;
  summary["format"] = "simulation-summary";
  summary["version"] = 1;
  summary["seed"] = g.spec.seed;
  summary["gamma"] = g.gamma;
  summary["expected_share"] = g.expected_share;
  summary["arrivals"] = g.spec.arrivals;
  summary["purchases"] = g.purchases;
  summary["realized_share"] = g.realized_share;
  summary["records_kept"] = g.censored.records.size();
  summary["remaining_sets"] = g.censored.remaining_sets.size();

  std::cout << "gamma " << rde::format_double(g.gamma) << ", expected share "
            << rde::format_double(g.expected_share) << "\n";
  std::cout << g.spec.arrivals << " arrivals, " << g.purchases << " purchases (realized share "
            << rde::format_double(g.realized_share) << ")\n";
  std::cout << "censored dataset: " << g.censored.records.size() << " records, "
            << g.censored.remaining_sets.size() << " choice sets\n";

  if (a.replications > 0) {
    const rde::RecoveryStudy study = rde::recovery_study(g.spec, a.replications, a.prop);
    std::ofstream rec(a.prefix + "_recovery.csv", std::ios::binary);
    if (!rec) throw rde::DataError("cannot open '" + a.prefix + "_recovery.csv' for writing");
    rec << "replication,seed,arrivals,purchases,realized_share,gamma_hat,gamma_se";
    for (const auto& n : g.spec.asv_names) rec << ',' << n << "_hat," << n << "_se";
    rec << ",no_purchase_hat,no_purchase_true,gamma_covered3,beta_covered3\n";
    for (const auto& r : study.replications) {
      rec << r.replication << ',' << r.seed << ',' << r.arrivals << ',' << r.purchases << ','
          << rde::format_double(r.realized_share) << ',' << rde::format_double(r.gamma_hat) << ','
          << rde::format_double(r.gamma_se);
      for (std::size_t i = 0; i < r.beta_hat.size(); ++i)
        rec << ',' << rde::format_double(r.beta_hat[i]) << ','
            << rde::format_double(r.beta_se[i]);
      rec << ',' << rde::format_double(r.no_purchase_hat) << ','
          << rde::format_double(r.no_purchase_true) << ',' << (r.gamma_covered3 ? 1 : 0) << ','
          << (r.beta_covered3 ? 1 : 0) << '\n';
    }
    rec.flush();
    if (!rec) throw rde::DataError("failed while writing '" + a.prefix + "_recovery.csv'");

    summary["recovery"] = {{"replications", study.replications.size()},
                           {"prop", study.prop},
                           {"gamma_true", study.gamma_true},
                           {"gamma_mae", study.gamma_mae},
                           {"gamma_coverage3", study.gamma_coverage3},
                           {"beta_mae", study.beta_mae},
                           {"beta_coverage3", study.beta_coverage3}};
    std::cout << '\n' << rde::recovery_report(study, g.spec.asv_names, g.spec.beta);
  }

  rde::detail::write_text_file(a.prefix + "_summary.json", summary.dump(1) + "\n");
  std::cerr << "outputs written with prefix " << a.prefix << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Demand estimation from censored sales transactions"};
  app.require_subcommand(1);

  ReshapeArgs rs;
  CLI::App* reshape = app.add_subcommand(
      "reshape", "Convert raw transactions (long or wide) into a canonical dataset");
  reshape->add_option("--input", rs.input, "delimited input file")->required();
  reshape->add_option("--output", rs.output, "dataset document to write")->required();
  reshape->add_option("--idvar", rs.idvar, "transaction id column")->required();
  reshape->add_option("--resp", rs.resp, "response column")->required();
  reshape->add_option("--alts", rs.alts, "alternatives column")->required();
  reshape->add_option("--asv", rs.asv, "alternative-specific covariate column (repeatable)");
  reshape->add_option("--alts-code", rs.alts_code, "wide input: chosen-code column");
  reshape->add_option("--choice-set", rs.choice_set, "wide input: choice-set column");
  reshape->add_option("--choice-set-code", rs.choice_set_code, "wide input: set-code column");
  reshape->add_option("--min-obs", rs.min_obs, "keep sets with at least this many transactions")
      ->capture_default_str();
  reshape->add_option("--delimiter", rs.delimiter, "field delimiter")->capture_default_str();
  reshape->add_flag("--dedup", rs.dedup, "drop exact duplicate rows instead of failing");

  FitArgs ft;
  CLI::App* fit = app.add_subcommand("fit", "Estimate the choice model on a dataset document");
  fit->add_option("--input", ft.input, "dataset document")->required();
  fit->add_option("--output", ft.output, "model document to write")->required();
  fit->add_option("--prop", ft.prop, "market share of observed purchases")
      ->capture_default_str();

  PredictArgs pr;
  CLI::App* predict =
      app.add_subcommand("predict", "Predict choice probabilities for new covariates");
  predict->add_option("--model", pr.model, "model document")->required();
  predict->add_option("--input", pr.input, "covariate file, columns <asv>_<code>")->required();
  predict->add_option("--output", pr.output, "prediction file to write")->required();
  predict->add_option("--set-code", pr.set_code, "choice set to predict on")->required();
  predict->add_flag("--sampled,!--fixed", pr.sampled,
                    "sample decisions from the probabilities (default argmax)");
  predict->add_option("--seed", pr.seed, "seed for sampled decisions");
  predict->add_flag("--include-no-purchase", pr.include_no_purchase,
                    "add the no-purchase probability column");
  predict->add_option("--delimiter", pr.delimiter, "field delimiter")->capture_default_str();

  SimulateArgs sm;
  CLI::App* simulate =
      app.add_subcommand("simulate", "Generate synthetic markets from a scenario document");
  simulate->add_option("--scenario", sm.scenario, "scenario document")->required();
  simulate->add_option("--output-prefix", sm.prefix, "prefix for output files")->required();
  std::uint64_t seed_opt = 0;
  CLI::Option* seed_flag =
      simulate->add_option("--seed", seed_opt, "override the scenario seed");
  simulate->add_option("--replications", sm.replications,
                       "run a generate/fit recovery study with this many replications");
  double prop_opt = 0.0;
  CLI::Option* prop_flag = simulate->add_option(
      "--prop", prop_opt, "market share fed to recovery fits (default: scenario share)");

  std::string sub;
  try {
    app.parse(argc, argv);
    if (seed_flag->count() > 0) sm.seed = seed_opt;
    if (prop_flag->count() > 0) sm.prop = prop_opt;
    if (reshape->parsed()) { sub = "reshape"; return run_reshape(rs); }
    if (fit->parsed()) { sub = "fit"; return run_fit(ft); }
    if (predict->parsed()) { sub = "predict"; return run_predict(pr); }
    if (simulate->parsed()) { sub = "simulate"; return run_simulate(sm); }
    return 2;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "rde: " << e.what() << "\n";
    return 2;
  } catch (const rde::Error& e) {
    std::cerr << "rde" << (sub.empty() ? "" : " " + sub) << ": " << to_string(e.category())
              << " error";
    if (!e.stage().empty()) std::cerr << " in stage '" << e.stage() << "'";
    std::cerr << ": " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "rde: unexpected error: " << e.what() << "\n";
    return 1;
  }
}
