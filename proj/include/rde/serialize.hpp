#pragma once

#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "rde/csv.hpp"
#include "rde/dataset.hpp"
#include "rde/errors.hpp"
#include "rde/estimation.hpp"
#include "rde/numeric.hpp"
#include "rde/synthetic.hpp"

namespace rde {

namespace detail {

inline nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& a) {
  Eigen::VectorXd v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& rows) {
  const auto R = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd m(R, R == 0 ? 0 : static_cast<Eigen::Index>(rows[0].size()));
  for (Eigen::Index r = 0; r < R; ++r) {
    const auto& row = rows[static_cast<std::size_t>(r)];
    if (static_cast<Eigen::Index>(row.size()) != m.cols())
      throw SchemaError("matrix rows have inconsistent lengths");
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

inline void check_format(const nlohmann::json& j, const std::string& expected) {
  if (!j.is_object() || !j.contains("format") || !j["format"].is_string() ||
      j["format"].get<std::string>() != expected)
    throw SchemaError("document is not a '" + expected + "' file");
}

template <class T>
inline T field(const nlohmann::json& j, const std::string& key) {
  if (!j.contains(key)) throw SchemaError("document is missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("field '" + key + "' has the wrong type: " + e.what());
  }
}

}  // namespace detail

// ---- canonical dataset document ----

inline nlohmann::json dataset_to_json(const TransactionDataset& ds) {
  nlohmann::json j;
  j["format"] = "transaction-dataset";
  j["version"] = 1;
  j["columns"] = {{"id", ds.id_name},
                  {"response", ds.response_name},
                  {"alternatives", ds.alternatives_name}};
  nlohmann::json alts = nlohmann::json::array();
  for (const auto& e : ds.catalog.entries) alts.push_back({{"code", e.code}, {"label", e.label}});
  j["alternatives"] = std::move(alts);
  j["asv"] = ds.asv_names;
  nlohmann::json rem = nlohmann::json::array();
  for (const auto& s : ds.remaining_sets)
    rem.push_back({{"code", s.set_code}, {"alternatives", s.codes}, {"observations", s.observations}});
  j["remaining_sets"] = std::move(rem);
  auto removed = [](const std::vector<RemovedSet>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& s : v) a.push_back({{"alternatives", s.codes}, {"observations", s.observations}});
    return a;
  };
  j["removed_sets"] = removed(ds.removed_sets);
  j["removed_singletons"] = removed(ds.removed_singletons);
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& r : ds.records)
    recs.push_back({{"id", r.id}, {"chosen", r.chosen_code}, {"set", r.set_code}, {"asv", r.asv}});
  j["records"] = std::move(recs);
  return j;
}

inline TransactionDataset dataset_from_json(const nlohmann::json& j) {
  detail::check_format(j, "transaction-dataset");
  TransactionDataset ds;
  const auto cols = detail::field<nlohmann::json>(j, "columns");
  ds.id_name = detail::field<std::string>(cols, "id");
  ds.response_name = detail::field<std::string>(cols, "response");
  ds.alternatives_name = detail::field<std::string>(cols, "alternatives");
  for (const auto& e : detail::field<nlohmann::json>(j, "alternatives"))
    ds.catalog.entries.push_back(
        {detail::field<int>(e, "code"), detail::field<std::string>(e, "label")});
  ds.asv_names = detail::field<std::vector<std::string>>(j, "asv");
  for (const auto& s : detail::field<nlohmann::json>(j, "remaining_sets")) {
    ChoiceSet cs;
    cs.set_code = detail::field<int>(s, "code");
    cs.codes = detail::field<std::vector<int>>(s, "alternatives");
    cs.observations = detail::field<std::int64_t>(s, "observations");
    ds.remaining_sets.push_back(std::move(cs));
  }
  auto removed = [](const nlohmann::json& a) {
    std::vector<RemovedSet> v;
    for (const auto& s : a)
      v.push_back({detail::field<std::vector<int>>(s, "alternatives"),
                   detail::field<std::int64_t>(s, "observations")});
    return v;
  };
  ds.removed_sets = removed(detail::field<nlohmann::json>(j, "removed_sets"));
  ds.removed_singletons = removed(detail::field<nlohmann::json>(j, "removed_singletons"));
  for (const auto& r : detail::field<nlohmann::json>(j, "records")) {
    TransactionRecord rec;
    rec.id = detail::field<std::string>(r, "id");
    rec.chosen_code = detail::field<int>(r, "chosen");
    rec.set_code = detail::field<int>(r, "set");
    rec.asv = detail::field<std::vector<double>>(r, "asv");
    ds.records.push_back(std::move(rec));
  }
  try {
    ds.validate();
  } catch (Error& e) {
    throw SchemaError(std::string("dataset document fails validation: ") + e.what());
  }
  return ds;
}

// ---- fitted model document ----

inline nlohmann::json model_to_json(const FitResult& f) {
  nlohmann::json j;
  j["format"] = "demand-model";
  j["version"] = 1;
  j["model"] = "Conditional Logit Model";
  j["method"] = "Robust Demand Estimation";
  j["columns"] = {{"id", f.id_name},
                  {"response", f.response_name},
                  {"alternatives", f.alternatives_name}};
  nlohmann::json alts = nlohmann::json::array();
  for (const auto& e : f.catalog.entries) alts.push_back({{"code", e.code}, {"label", e.label}});
  j["alternatives"] = std::move(alts);
  j["asv"] = f.asv_names;
  nlohmann::json rem = nlohmann::json::array();
  for (const auto& s : f.remaining_sets)
    rem.push_back({{"code", s.set_code}, {"alternatives", s.codes}, {"observations", s.observations}});
  j["remaining_sets"] = std::move(rem);

  j["baseline"] = f.coefficients.baseline_code;
  nlohmann::json alpha = nlohmann::json::array();
  for (const auto& [code, value] : f.coefficients.alpha_star)
    alpha.push_back({{"code", code}, {"value", value}});
  j["alpha_star"] = std::move(alpha);
  j["beta"] = f.coefficients.beta;
  j["gamma"] = *f.coefficients.gamma;

  j["coefficient_names"] = f.coef_names;
  j["estimates"] = detail::vector_to_json(f.estimates);
  j["std_errors"] = detail::vector_to_json(f.std_errors);
  j["z_values"] = detail::vector_to_json(f.z_values);
  j["p_values"] = detail::vector_to_json(f.p_values);
  j["covariance"] = detail::matrix_to_json(f.covariance);

  j["loglik"] = f.loglik;
  j["market_share"] = f.market_share;
  j["convergence"] = {{"iterations", f.convergence.iterations},
                      {"gradient_max_norm", f.convergence.gradient_max_norm},
                      {"converged", f.convergence.converged}};
  j["arrivals"] = {{"observed", f.arrivals.observed},
                   {"no_purchase", f.arrivals.no_purchase},
                   {"total", f.arrivals.total},
                   {"no_purchase_rounded", f.arrivals.no_purchase_rounded},
                   {"total_rounded", f.arrivals.total_rounded}};
  return j;
}

inline FitResult model_from_json(const nlohmann::json& j) {
  detail::check_format(j, "demand-model");
  FitResult f;
  const auto cols = detail::field<nlohmann::json>(j, "columns");
  f.id_name = detail::field<std::string>(cols, "id");
  f.response_name = detail::field<std::string>(cols, "response");
  f.alternatives_name = detail::field<std::string>(cols, "alternatives");
  for (const auto& e : detail::field<nlohmann::json>(j, "alternatives"))
    f.catalog.entries.push_back(
        {detail::field<int>(e, "code"), detail::field<std::string>(e, "label")});
  f.asv_names = detail::field<std::vector<std::string>>(j, "asv");
  for (const auto& s : detail::field<nlohmann::json>(j, "remaining_sets")) {
    ChoiceSet cs;
    cs.set_code = detail::field<int>(s, "code");
    cs.codes = detail::field<std::vector<int>>(s, "alternatives");
    cs.observations = detail::field<std::int64_t>(s, "observations");
    f.remaining_sets.push_back(std::move(cs));
  }

  f.coefficients.baseline_code = detail::field<int>(j, "baseline");
  for (const auto& a : detail::field<nlohmann::json>(j, "alpha_star"))
    f.coefficients.alpha_star.emplace(detail::field<int>(a, "code"),
                                      detail::field<double>(a, "value"));
  f.coefficients.beta = detail::field<std::vector<double>>(j, "beta");
  f.coefficients.gamma = detail::field<double>(j, "gamma");

  f.coef_names = detail::field<std::vector<std::string>>(j, "coefficient_names");
  f.estimates = detail::vector_from_json(detail::field<nlohmann::json>(j, "estimates"));
  f.std_errors = detail::vector_from_json(detail::field<nlohmann::json>(j, "std_errors"));
  f.z_values = detail::vector_from_json(detail::field<nlohmann::json>(j, "z_values"));
  f.p_values = detail::vector_from_json(detail::field<nlohmann::json>(j, "p_values"));
  f.covariance = detail::matrix_from_json(detail::field<nlohmann::json>(j, "covariance"));

  f.loglik = detail::field<double>(j, "loglik");
  f.market_share = detail::field<double>(j, "market_share");
  const auto conv = detail::field<nlohmann::json>(j, "convergence");
  f.convergence.iterations = detail::field<int>(conv, "iterations");
  f.convergence.gradient_max_norm = detail::field<double>(conv, "gradient_max_norm");
  f.convergence.converged = detail::field<bool>(conv, "converged");
  const auto arr = detail::field<nlohmann::json>(j, "arrivals");
  f.arrivals.observed = detail::field<std::int64_t>(arr, "observed");
  f.arrivals.no_purchase = detail::field<double>(arr, "no_purchase");
  f.arrivals.total = detail::field<double>(arr, "total");
  f.arrivals.no_purchase_rounded = detail::field<std::int64_t>(arr, "no_purchase_rounded");
  f.arrivals.total_rounded = detail::field<std::int64_t>(arr, "total_rounded");

  const std::size_t P = f.coef_names.size();
  if (static_cast<std::size_t>(f.estimates.size()) != P ||
      static_cast<std::size_t>(f.std_errors.size()) != P ||
      static_cast<std::size_t>(f.z_values.size()) != P ||
      static_cast<std::size_t>(f.p_values.size()) != P ||
      static_cast<std::size_t>(f.covariance.rows()) != P ||
      f.coefficients.alpha_star.size() + f.coefficients.beta.size() + 1 != P)
    throw SchemaError("model document has inconsistent coefficient table sizes");
  return f;
}

// ---- scenario document ----

inline nlohmann::json scenario_to_json(const ScenarioSpec& s) {
  nlohmann::json j;
  j["format"] = "scenario";
  j["version"] = 1;
  j["alternatives"] = s.n_alternatives;
  j["alpha"] = s.alpha;
  j["beta"] = s.beta;
  j["asv_names"] = s.asv_names;
  j["sets"] = s.sets;
  j["set_weights"] = s.set_weights;
  nlohmann::json ranges = nlohmann::json::array();
  for (const auto& [lo, hi] : s.asv_ranges) ranges.push_back({lo, hi});
  j["asv_ranges"] = std::move(ranges);
  j["arrivals"] = s.arrivals;
  if (s.gamma) j["gamma"] = *s.gamma;
  if (s.target_share) j["target_share"] = *s.target_share;
  j["seed"] = s.seed;
  j["min_obs"] = s.min_obs;
  return j;
}

inline ScenarioSpec scenario_from_json(const nlohmann::json& j) {
  detail::check_format(j, "scenario");
  ScenarioSpec s;
  s.n_alternatives = detail::field<int>(j, "alternatives");
  s.alpha = detail::field<std::vector<double>>(j, "alpha");
  s.beta = detail::field<std::vector<double>>(j, "beta");
  if (j.contains("asv_names")) s.asv_names = detail::field<std::vector<std::string>>(j, "asv_names");
  s.sets = detail::field<std::vector<std::vector<int>>>(j, "sets");
  s.set_weights = detail::field<std::vector<double>>(j, "set_weights");
  for (const auto& r : detail::field<nlohmann::json>(j, "asv_ranges")) {
    if (!r.is_array() || r.size() != 2)
      throw SchemaError("each asv_ranges entry must be a [lo, hi] pair");
    s.asv_ranges.emplace_back(r[0].get<double>(), r[1].get<double>());
  }
  s.arrivals = detail::field<std::int64_t>(j, "arrivals");
  if (j.contains("gamma")) s.gamma = detail::field<double>(j, "gamma");
  if (j.contains("target_share")) s.target_share = detail::field<double>(j, "target_share");
  s.seed = detail::field<std::uint64_t>(j, "seed");
  if (j.contains("min_obs")) s.min_obs = detail::field<std::int64_t>(j, "min_obs");
  try {
    s.validate();
  } catch (Error& e) {
    throw SchemaError(std::string("scenario document fails validation: ") + e.what());
  }
  return s;
}

// ---- file IO ----

namespace detail {

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "' for reading");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw DataError("failed while reading '" + path + "'");
  return text;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << text;
  out.flush();
  if (!out) throw DataError("failed while writing '" + path + "'");
}

inline nlohmann::json parse_text(const std::string& text, const std::string& what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("cannot parse " + what + " document: " + e.what());
  }
}

}  // namespace detail

inline void save_dataset(const std::string& path, const TransactionDataset& ds) {
  detail::write_text_file(path, dataset_to_json(ds).dump(1) + "\n");
}

inline TransactionDataset load_dataset(const std::string& path) {
  return dataset_from_json(detail::parse_text(detail::read_text_file(path), "dataset"));
}

inline void save_model(const std::string& path, const FitResult& f) {
  detail::write_text_file(path, model_to_json(f).dump(1) + "\n");
}

inline FitResult load_model(const std::string& path) {
  return model_from_json(detail::parse_text(detail::read_text_file(path), "model"));
}

inline void save_scenario(const std::string& path, const ScenarioSpec& s) {
  detail::write_text_file(path, scenario_to_json(s).dump(1) + "\n");
}

inline ScenarioSpec load_scenario(const std::string& path) {
  return scenario_from_json(detail::parse_text(detail::read_text_file(path), "scenario"));
}

// ---- delimited-text writers ----

// Long-format rows (id, response, alternative label, covariates) for the
// records of a reshaped dataset; resp marks the chosen alternative.
inline void write_long_csv(std::ostream& out, const TransactionDataset& ds, char delim = ',') {
  out << csv_escape(ds.id_name, delim) << delim << csv_escape(ds.response_name, delim) << delim
      << csv_escape(ds.alternatives_name, delim);
  for (const auto& n : ds.asv_names) out << delim << csv_escape(n, delim);
  out << '\n';
  const std::size_t A = ds.asv_count();
  for (const auto& r : ds.records) {
    const ChoiceSet& s = ds.set_by_code(r.set_code);
    for (std::size_t pos = 0; pos < s.codes.size(); ++pos) {
      out << csv_escape(r.id, delim) << delim << (s.codes[pos] == r.chosen_code ? 1 : 0) << delim
          << csv_escape(ds.catalog.label(s.codes[pos]), delim);
      for (std::size_t a = 0; a < A; ++a) out << delim << format_double(r.asv[pos * A + a]);
      out << '\n';
    }
  }
}

// Every simulated arrival, purchases and walk-aways alike; a no-purchase
// arrival appears as its exposed alternatives with response 0 everywhere.
inline void write_arrivals_csv(std::ostream& out, const GeneratedData& g, char delim = ',') {
  const ScenarioSpec& spec = g.spec;
  const std::size_t A = spec.beta.size();
  out << "id" << delim << "resp" << delim << "alt";
  for (const auto& n : spec.asv_names) out << delim << csv_escape(n, delim);
  out << '\n';
  for (std::size_t i = 0; i < g.arrivals.size(); ++i) {
    const Arrival& arr = g.arrivals[i];
    const auto& set = spec.sets[arr.set_index];
    for (std::size_t pos = 0; pos < set.size(); ++pos) {
      out << synthetic_id(static_cast<std::int64_t>(i)) << delim
          << (set[pos] == arr.chosen_code ? 1 : 0) << delim
          << synthetic_label(set[pos], spec.n_alternatives);
      for (std::size_t a = 0; a < A; ++a) out << delim << format_double(arr.asv[pos * A + a]);
      out << '\n';
    }
  }
}

}  // namespace rde
