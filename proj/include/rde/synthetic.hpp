#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "rde/dataset.hpp"
#include "rde/errors.hpp"
#include "rde/estimation.hpp"
#include "rde/likelihood.hpp"
#include "rde/numeric.hpp"
#include "rde/reshape.hpp"
#include "rde/rng.hpp"

namespace rde {

// Ground-truth description of a market for data generation.  Intercepts live
// on the normalized scale used by estimation: the smallest entry must be zero
// (that alternative is the implicit baseline), and the no-purchase utility is
// gamma.  Covariates draw uniformly from per-covariate ranges.  Exactly one of
// `gamma` and `target_share` must be set; a target share is converted to the
// gamma that produces it in expectation.
struct ScenarioSpec {
  int n_alternatives = 0;
  std::vector<double> alpha;                          // length J, min entry 0
  std::vector<double> beta;                           // one slope per covariate
  std::vector<std::string> asv_names;                 // defaults to x1, x2, ...
  std::vector<std::vector<int>> sets;                 // strictly increasing codes
  std::vector<double> set_weights;                    // positive, one per set
  std::vector<std::pair<double, double>> asv_ranges;  // uniform (lo, hi) per covariate
  std::int64_t arrivals = 0;
  std::optional<double> gamma;
  std::optional<double> target_share;
  std::uint64_t seed = 0;
  std::int64_t min_obs = 1;  // cutoff applied when reshaping the censored sample

  void validate() const {
    if (n_alternatives < 1) throw DomainError("scenario needs at least one alternative");
    if (alpha.size() != static_cast<std::size_t>(n_alternatives))
      throw DomainError("alpha must have one entry per alternative");
    const double amin = *std::min_element(alpha.begin(), alpha.end());
    if (std::abs(amin) > 1e-12)
      throw DomainError("alpha is on the normalized scale; its smallest entry must be 0, got " +
                        format_double(amin));
    for (double a : alpha)
      if (!std::isfinite(a)) throw DomainError("alpha entries must be finite");
    if (beta.size() != asv_ranges.size())
      throw DomainError("beta and asv_ranges must have the same length");
    if (!asv_names.empty() && asv_names.size() != beta.size())
      throw DomainError("asv_names must be empty or match beta in length");
    for (double b : beta)
      if (!std::isfinite(b)) throw DomainError("beta entries must be finite");
    for (const auto& [lo, hi] : asv_ranges)
      if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi)
        throw DomainError("each covariate range needs finite lo <= hi");
    if (sets.empty()) throw DomainError("scenario needs at least one choice set");
    if (set_weights.size() != sets.size())
      throw DomainError("set_weights must have one entry per choice set");
    for (double w : set_weights)
      if (!(w > 0.0) || !std::isfinite(w)) throw DomainError("set weights must be positive");
    std::map<std::vector<int>, int> seen;
    for (const auto& s : sets) {
      if (s.size() < 2)
        throw DomainError("choice sets must offer at least two alternatives");
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] < 1 || s[i] > n_alternatives)
          throw DomainError("choice set references alternative " + std::to_string(s[i]) +
                            ", valid codes are 1.." + std::to_string(n_alternatives));
        if (i > 0 && s[i] <= s[i - 1])
          throw DomainError("choice-set codes must be strictly increasing");
      }
      if (!seen.emplace(s, 1).second) throw DomainError("duplicate choice set in scenario");
    }
    if (arrivals < 1) throw DomainError("scenario needs at least one arrival");
    if (gamma.has_value() == target_share.has_value())
      throw DomainError("specify exactly one of gamma and target_share");
    if (gamma && !std::isfinite(*gamma)) throw DomainError("gamma must be finite");
    if (target_share && !(*target_share > 0.0 && *target_share < 1.0))
      throw DomainError("target_share must lie strictly between 0 and 1");
    if (min_obs < 1) throw DomainError("min_obs must be at least 1");
  }
};

// Alternative labels are zero-padded so their lexicographic order matches the
// numeric code order; reshaping the generated sample then reproduces the codes.
inline std::string synthetic_label(int code, int n_alternatives) {
  std::string digits = std::to_string(code);
  const std::size_t width = std::to_string(n_alternatives).size();
  return "Alt_" + std::string(width - digits.size(), '0') + digits;
}

inline std::string synthetic_id(std::int64_t arrival_index) {
  std::string digits = std::to_string(arrival_index + 1);
  const std::size_t width = std::max<std::size_t>(7, digits.size());
  return "A" + std::string(width - digits.size(), '0') + digits;
}

namespace detail {

// substream indices under a scenario's master seed
constexpr std::uint64_t kArrivalStream = 1;
constexpr std::uint64_t kCalibrationStream = 2;
constexpr std::uint64_t kReplicationStream = 10;

// One reusable Monte Carlo sample of purchase denominators D = sum exp(u),
// drawn from the calibration substream; share(gamma) = mean(D / (e^g + D)).
inline std::vector<double> calibration_denominators(const ScenarioSpec& spec,
                                                    std::size_t draws = 200000) {
  RandomStream rs(derive_seed(spec.seed, kCalibrationStream));
  const std::size_t A = spec.beta.size();
  std::vector<double> D(draws);
  std::vector<double> x(A);
  for (std::size_t i = 0; i < draws; ++i) {
    const std::size_t si = rs.categorical(spec.set_weights);
    const auto& set = spec.sets[si];
    double d = 0.0;
    for (int code : set) {
      for (std::size_t a = 0; a < A; ++a)
        x[a] = rs.uniform(spec.asv_ranges[a].first, spec.asv_ranges[a].second);
      d += std::exp(linear_utility(spec.alpha[static_cast<std::size_t>(code) - 1], spec.beta,
                                   x.data()));
    }
    D[i] = d;
  }
  return D;
}

inline double share_from_denominators(std::span<const double> D, double gamma) {
  const double eg = std::exp(gamma);
  double s = 0.0;
  for (double d : D) s += d / (eg + d);
  return s / static_cast<double>(D.size());
}

}  // namespace detail

// Purchase share implied by a gamma value, estimated on the scenario's fixed
// calibration sample.
inline double expected_share(const ScenarioSpec& spec, double gamma) {
  return detail::share_from_denominators(detail::calibration_denominators(spec), gamma);
}

// Gamma whose implied purchase share matches `target` on the calibration
// sample.  The share is strictly decreasing in gamma, so bisection converges.
inline double calibrate_gamma(const ScenarioSpec& spec, double target) {
  if (!(target > 0.0 && target < 1.0))
    throw DomainError("target share must lie strictly between 0 and 1");
  const std::vector<double> D = detail::calibration_denominators(spec);
  double lo = -1.0, hi = 1.0;
  while (detail::share_from_denominators(D, lo) < target) lo *= 2.0;
  while (detail::share_from_denominators(D, hi) > target) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (detail::share_from_denominators(D, mid) > target) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

// One simulated customer arrival; chosen_code 0 means no purchase.
struct Arrival {
  std::size_t set_index = 0;
  int chosen_code = 0;
  std::vector<double> asv;  // row-major (position in set, covariate)
};

struct GeneratedData {
  ScenarioSpec spec;       // normalized copy: names filled in, gamma resolved
  double gamma = 0.0;      // ground truth on the normalized scale
  double expected_share = 0.0;
  std::vector<Arrival> arrivals;
  std::int64_t purchases = 0;
  double realized_share = 0.0;
  TransactionDataset censored;  // reshaped purchase records only
};

// Simulates arrivals and censors them to a purchase-only dataset.  Each
// arrival draws from its own derived substream, so any prefix of the arrival
// sequence and any parallel evaluation order yield identical data.
inline GeneratedData generate(const ScenarioSpec& input) {
  GeneratedData out;
  out.spec = input;
  if (out.spec.asv_names.empty())
    for (std::size_t a = 0; a < out.spec.beta.size(); ++a)
      out.spec.asv_names.push_back("x" + std::to_string(a + 1));
  out.spec.validate();

  if (out.spec.target_share) {
    out.gamma = calibrate_gamma(out.spec, *out.spec.target_share);
    out.expected_share = *out.spec.target_share;
    out.spec.gamma = out.gamma;
    out.spec.target_share.reset();
  } else {
    out.gamma = *out.spec.gamma;
    out.expected_share = expected_share(out.spec, out.gamma);
  }

  const ScenarioSpec& spec = out.spec;
  const std::size_t A = spec.beta.size();
  const std::uint64_t arrival_master = derive_seed(spec.seed, detail::kArrivalStream);

  out.arrivals.reserve(static_cast<std::size_t>(spec.arrivals));
  std::vector<double> u, p;
  for (std::int64_t i = 0; i < spec.arrivals; ++i) {
    RandomStream rs(derive_seed(arrival_master, static_cast<std::uint64_t>(i)));
    Arrival arr;
    arr.set_index = rs.categorical(spec.set_weights);
    const auto& set = spec.sets[arr.set_index];
    arr.asv.resize(set.size() * A);
    for (std::size_t pos = 0; pos < set.size(); ++pos)
      for (std::size_t a = 0; a < A; ++a)
        arr.asv[pos * A + a] = rs.uniform(spec.asv_ranges[a].first, spec.asv_ranges[a].second);

    u.resize(set.size() + 1);
    u[0] = out.gamma;
    for (std::size_t pos = 0; pos < set.size(); ++pos)
      u[pos + 1] = linear_utility(spec.alpha[static_cast<std::size_t>(set[pos]) - 1], spec.beta,
                                  arr.asv.data() + pos * A);
    p.resize(u.size());
    softmax_from_utilities(u, p);
    const std::size_t pick = rs.categorical(p);
    arr.chosen_code = pick == 0 ? 0 : set[pick - 1];
    if (arr.chosen_code != 0) ++out.purchases;
    out.arrivals.push_back(std::move(arr));
  }
  out.realized_share =
      static_cast<double>(out.purchases) / static_cast<double>(spec.arrivals);
  if (out.purchases == 0)
    throw DataError("scenario produced no purchases; raise arrivals or the purchase share");

  std::vector<LongRow> rows;
  rows.reserve(static_cast<std::size_t>(out.purchases) * 2);
  for (std::size_t i = 0; i < out.arrivals.size(); ++i) {
    const Arrival& arr = out.arrivals[i];
    if (arr.chosen_code == 0) continue;
    const auto& set = spec.sets[arr.set_index];
    for (std::size_t pos = 0; pos < set.size(); ++pos) {
      LongRow r;
      r.line = i + 2;
      r.id = synthetic_id(static_cast<std::int64_t>(i));
      r.alternative = synthetic_label(set[pos], spec.n_alternatives);
      r.resp = set[pos] == arr.chosen_code ? 1 : 0;
      r.asv.assign(arr.asv.begin() + static_cast<std::ptrdiff_t>(pos * A),
                   arr.asv.begin() + static_cast<std::ptrdiff_t>((pos + 1) * A));
      rows.push_back(std::move(r));
    }
  }
  LongSchema schema{"id", "resp", "alt", spec.asv_names};
  ReshapeOptions ropts;
  ropts.min_obs = spec.min_obs;
  out.censored = reshape(rows, schema, ropts);
  return out;
}

// Reference implementation of the observed log-likelihood: direct exp-ratio
// arithmetic with no stabilization, for cross-checking the production path on
// tame inputs.  Throws once utilities leave the safely exponentiable range.
inline double brute_force_loglik(const ModelCoefficients& c, const TransactionDataset& ds) {
  const std::size_t A = ds.asv_count();
  if (c.beta.size() != A)
    throw DomainError("coefficients carry " + std::to_string(c.beta.size()) +
                      " slopes, dataset has " + std::to_string(A) + " covariates");
  double total = 0.0;
  for (const auto& r : ds.records) {
    const ChoiceSet& s = ds.set_by_code(r.set_code);
    double den = 0.0, num = 0.0;
    for (std::size_t pos = 0; pos < s.codes.size(); ++pos) {
      double u = c.alpha_star_of(s.codes[pos]);
      for (std::size_t a = 0; a < A; ++a) u += c.beta[a] * r.asv[pos * A + a];
      if (std::abs(u) > 700.0)
        throw NumericError("utility " + format_double(u) + " overflows exp()");
      const double e = std::exp(u);
      den += e;
      if (s.codes[pos] == r.chosen_code) num = e;
    }
    if (!(den > 0.0) || !std::isfinite(den))
      throw NumericError("purchase denominator overflowed for id '" + r.id + "'");
    total += std::log(num / den);
  }
  return total;
}

// Exhaustive maximization on a uniform grid, for benchmarking the Newton
// solver on one- and two-parameter problems.
struct GridSearchResult {
  Eigen::VectorXd argmax;
  double value = 0.0;
  bool on_boundary = false;
};

inline GridSearchResult grid_search_mle(const TransactionDataset& ds, int baseline_code,
                                        std::span<const double> lower,
                                        std::span<const double> upper, double resolution) {
  const LogLikEvaluator ev(ds, baseline_code);
  const std::size_t P = ev.parameter_count();
  if (P < 1 || P > 2)
    throw DomainError("grid search handles 1 or 2 free parameters, model has " +
                      std::to_string(P));
  if (lower.size() != P || upper.size() != P)
    throw DomainError("grid bounds must have one entry per free parameter");
  if (!(resolution > 0.0)) throw DomainError("grid resolution must be positive");
  for (std::size_t k = 0; k < P; ++k)
    if (!(lower[k] < upper[k])) throw DomainError("grid bounds need lower < upper");

  std::vector<std::size_t> steps(P);
  for (std::size_t k = 0; k < P; ++k)
    steps[k] = static_cast<std::size_t>((upper[k] - lower[k]) / resolution + 1e-9) + 1;

  GridSearchResult best;
  best.argmax.resize(static_cast<Eigen::Index>(P));
  best.value = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> best_idx(P, 0);
  Eigen::VectorXd theta(static_cast<Eigen::Index>(P));
  const std::size_t rows = steps[0];
  const std::size_t cols = P == 2 ? steps[1] : 1;
  for (std::size_t i = 0; i < rows; ++i) {
    theta[0] = lower[0] + static_cast<double>(i) * resolution;
    for (std::size_t j = 0; j < cols; ++j) {
      if (P == 2) theta[1] = lower[1] + static_cast<double>(j) * resolution;
      const double v = ev.evaluate(theta, Derivatives::None).value;
      if (v > best.value) {
        best.value = v;
        best.argmax = theta;
        best_idx = {i, j};
      }
    }
  }
  best.on_boundary = best_idx[0] == 0 || best_idx[0] == rows - 1 ||
                     (P == 2 && (best_idx[1] == 0 || best_idx[1] == cols - 1));
  return best;
}

// The uncensored benchmark: every arrival kept, no purchase coded as an
// explicit outside alternative with code 1 and all covariates zero.  Product
// code c becomes c + 1.
inline TransactionDataset complete_data_dataset(const GeneratedData& g) {
  const ScenarioSpec& spec = g.spec;
  const std::size_t A = spec.beta.size();

  TransactionDataset ds;
  ds.catalog.entries.push_back({1, "(no purchase)"});
  for (int c = 1; c <= spec.n_alternatives; ++c)
    ds.catalog.entries.push_back({c + 1, synthetic_label(c, spec.n_alternatives)});
  ds.asv_names = spec.asv_names;

  std::map<std::vector<int>, std::int64_t> counts;
  for (const Arrival& arr : g.arrivals) {
    std::vector<int> codes{1};
    for (int c : spec.sets[arr.set_index]) codes.push_back(c + 1);
    ++counts[codes];
  }
  std::map<std::vector<int>, int> code_of;
  for (const auto& [codes, n] : counts) {
    ChoiceSet s;
    s.set_code = static_cast<int>(ds.remaining_sets.size()) + 1;
    s.codes = codes;
    s.observations = n;
    code_of.emplace(codes, s.set_code);
    ds.remaining_sets.push_back(std::move(s));
  }

  for (std::size_t i = 0; i < g.arrivals.size(); ++i) {
    const Arrival& arr = g.arrivals[i];
    std::vector<int> codes{1};
    for (int c : spec.sets[arr.set_index]) codes.push_back(c + 1);
    TransactionRecord r;
    r.id = synthetic_id(static_cast<std::int64_t>(i));
    r.chosen_code = arr.chosen_code == 0 ? 1 : arr.chosen_code + 1;
    r.set_code = code_of.at(codes);
    r.asv.assign(A, 0.0);  // outside option
    r.asv.insert(r.asv.end(), arr.asv.begin(), arr.asv.end());
    ds.records.push_back(std::move(r));
  }
  ds.validate();
  return ds;
}

// MLE on the uncensored sample, outside option as baseline.  The product
// intercepts come back relative to no purchase; gamma corresponds to the
// negated smallest of them.
inline MleFit complete_data_mle(const GeneratedData& g, const NewtonOptions& opts = {}) {
  return fit_mle(complete_data_dataset(g), 1, opts);
}

namespace detail {

// index-addressed parallel loop; deterministic because slot i only depends on i
template <class F>
inline void parallel_for(std::size_t n, F&& body, std::size_t worker_count = 0) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min<std::size_t>(worker_count > 0 ? worker_count : hw, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&] {
    std::size_t i;
    while (!failed.load(std::memory_order_relaxed) &&
           (i = next.fetch_add(1)) < n) {
      try {
        body(i);
      } catch (...) {
        std::scoped_lock lock(error_mutex);
        if (!error) error = std::current_exception();
        failed.store(true);
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace detail

// One generate-then-estimate replication.
struct RecoveryReplication {
  int replication = 0;
  std::uint64_t seed = 0;
  std::int64_t arrivals = 0;
  std::int64_t purchases = 0;
  double realized_share = 0.0;
  double gamma_hat = 0.0;
  double gamma_se = 0.0;
  std::vector<double> beta_hat;
  std::vector<double> beta_se;
  double no_purchase_true = 0.0;
  double no_purchase_hat = 0.0;
  bool gamma_covered3 = false;  // |gamma_hat - gamma| <= 3 se
  bool beta_covered3 = false;   // every slope within 3 se
};

struct RecoveryStudy {
  double gamma_true = 0.0;
  double prop = 0.0;  // market share fed to each fit
  std::vector<RecoveryReplication> replications;
  double gamma_mae = 0.0;
  double gamma_coverage3 = 0.0;
  std::vector<double> beta_mae;
  std::vector<double> beta_coverage3;
};

// Repeated generate/fit cycles under one ground truth.  Replication r uses a
// seed derived from the scenario seed and r alone, and replications run in
// parallel; the collected study is identical for any thread count.
inline RecoveryStudy recovery_study(const ScenarioSpec& input, int replications,
                                    std::optional<double> prop = {}) {
  if (replications < 1) throw DomainError("need at least one replication");
  ScenarioSpec base = input;
  if (base.asv_names.empty())
    for (std::size_t a = 0; a < base.beta.size(); ++a)
      base.asv_names.push_back("x" + std::to_string(a + 1));
  base.validate();

  RecoveryStudy study;
  if (base.target_share) {
    study.gamma_true = calibrate_gamma(base, *base.target_share);
    study.prop = prop ? *prop : *base.target_share;
    base.gamma = study.gamma_true;
    base.target_share.reset();
  } else {
    study.gamma_true = *base.gamma;
    study.prop = prop ? *prop : expected_share(base, study.gamma_true);
  }

  const std::size_t A = base.beta.size();
  study.replications.resize(static_cast<std::size_t>(replications));
  detail::parallel_for(static_cast<std::size_t>(replications), [&](std::size_t r) {
    ScenarioSpec s = base;
    s.seed = derive_seed(base.seed, detail::kReplicationStream + r);
    const GeneratedData g = generate(s);
    const FitResult f = fit(g.censored, study.prop);

    RecoveryReplication& rep = study.replications[r];
    rep.replication = static_cast<int>(r) + 1;
    rep.seed = s.seed;
    rep.arrivals = s.arrivals;
    rep.purchases = g.purchases;
    rep.realized_share = g.realized_share;
    rep.gamma_hat = *f.coefficients.gamma;
    rep.gamma_se = f.std_errors[0];
    rep.beta_hat = f.coefficients.beta;
    for (std::size_t a = 0; a < A; ++a) {
      const Eigen::Index idx = f.std_errors.size() - static_cast<Eigen::Index>(A - a);
      rep.beta_se.push_back(f.std_errors[idx]);
    }
    rep.no_purchase_true = static_cast<double>(s.arrivals - g.purchases);
    rep.no_purchase_hat = f.arrivals.no_purchase;
    rep.gamma_covered3 = std::abs(rep.gamma_hat - study.gamma_true) <= 3.0 * rep.gamma_se;
    rep.beta_covered3 = true;
    for (std::size_t a = 0; a < A; ++a)
      rep.beta_covered3 =
          rep.beta_covered3 && std::abs(rep.beta_hat[a] - base.beta[a]) <= 3.0 * rep.beta_se[a];
  });

  study.beta_mae.assign(A, 0.0);
  study.beta_coverage3.assign(A, 0.0);
  for (const auto& rep : study.replications) {
    study.gamma_mae += std::abs(rep.gamma_hat - study.gamma_true);
    study.gamma_coverage3 += rep.gamma_covered3 ? 1.0 : 0.0;
    for (std::size_t a = 0; a < A; ++a) {
      study.beta_mae[a] += std::abs(rep.beta_hat[a] - base.beta[a]);
      const bool cov = std::abs(rep.beta_hat[a] - base.beta[a]) <= 3.0 * rep.beta_se[a];
      study.beta_coverage3[a] += cov ? 1.0 : 0.0;
    }
  }
  const double n = static_cast<double>(replications);
  study.gamma_mae /= n;
  study.gamma_coverage3 /= n;
  for (std::size_t a = 0; a < A; ++a) {
    study.beta_mae[a] /= n;
    study.beta_coverage3[a] /= n;
  }
  return study;
}

}  // namespace rde
