#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "rde/dataset.hpp"
#include "rde/errors.hpp"
#include "rde/likelihood.hpp"
#include "rde/numeric.hpp"

namespace rde {

struct NewtonOptions {
  double gradient_tolerance = 1e-8;  // max-norm of the score
  int max_iterations = 100;
};

struct Convergence {
  int iterations = 0;
  double gradient_max_norm = 0.0;
  bool converged = false;
};

// Maximizer of the observed log-likelihood for a fixed baseline.
struct MleFit {
  int baseline_code = 0;
  std::vector<int> free_codes;   // ascending, baseline excluded
  Eigen::VectorXd theta;         // intercepts then slopes
  Eigen::MatrixXd covariance;    // inverse of the negative Hessian at theta
  double loglik = 0.0;
  Convergence convergence;
};

namespace detail {

inline std::string mle_parameter_name(const std::vector<int>& free_codes,
                                      const std::vector<std::string>& asv_names,
                                      std::size_t index) {
  if (index < free_codes.size()) return "ASC" + std::to_string(free_codes[index]);
  return asv_names[index - free_codes.size()];
}

// A finite maximizer requires every offered alternative to both win and lose
// at least once; the failing cases each pin down a divergent direction.
inline void check_identifiable(const TransactionDataset& ds, int baseline_code) {
  const int J = ds.catalog.size();
  std::vector<std::int64_t> exposed(static_cast<std::size_t>(J) + 1, 0);
  std::vector<std::int64_t> chosen(static_cast<std::size_t>(J) + 1, 0);
  for (const auto& r : ds.records) {
    const ChoiceSet& s = ds.set_by_code(r.set_code);
    for (int c : s.codes) ++exposed[static_cast<std::size_t>(c)];
    ++chosen[static_cast<std::size_t>(r.chosen_code)];
  }
  for (int c = 1; c <= J; ++c) {
    const auto e = exposed[static_cast<std::size_t>(c)];
    const auto n = chosen[static_cast<std::size_t>(c)];
    if (e == 0) {
      if (c == baseline_code)
        throw RankDeficiencyError("baseline alternative " + std::to_string(c) +
                                  " never appears in a remaining choice set");
      throw RankDeficiencyError("alternative " + std::to_string(c) + " ('" + ds.catalog.label(c) +
                                "') never appears in a remaining choice set; ASC" +
                                std::to_string(c) + " is not identified");
    }
    if (n == 0)
      throw RankDeficiencyError("alternative " + std::to_string(c) + " ('" + ds.catalog.label(c) +
                                "') is never chosen; the likelihood has no finite maximizer in "
                                "its intercept direction");
    if (n == e)
      throw RankDeficiencyError("alternative " + std::to_string(c) + " ('" + ds.catalog.label(c) +
                                "') is chosen whenever it is offered; the likelihood has no "
                                "finite maximizer in its intercept direction");
  }
}

}  // namespace detail

// Damped Newton ascent from theta = 0 with step-halving line search.  The
// observed log-likelihood is concave, so the Newton direction on the negated
// Hessian ascends whenever the Hessian has full rank; steepest ascent covers
// the rare degenerate step.
inline MleFit fit_mle(const TransactionDataset& ds, int baseline_code,
                      const NewtonOptions& opts = {}) {
  if (ds.records.empty()) throw DataError("dataset has no records to fit");
  detail::check_identifiable(ds, baseline_code);

  const LogLikEvaluator ev(ds, baseline_code);
  const auto P = static_cast<Eigen::Index>(ev.parameter_count());

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(P);
  LikelihoodWorkspace cur = ev.evaluate(theta, Derivatives::Hessian);
  Convergence conv;
  while (true) {
    conv.gradient_max_norm = cur.gradient.lpNorm<Eigen::Infinity>();
    if (conv.gradient_max_norm < opts.gradient_tolerance) {
      conv.converged = true;
      break;
    }
    if (conv.iterations >= opts.max_iterations)
      throw ConvergenceError("no convergence after " + std::to_string(conv.iterations) +
                             " iterations; max |gradient| = " +
                             format_double(conv.gradient_max_norm));
    ++conv.iterations;

    Eigen::VectorXd direction;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(-cur.hessian);
    bool usable = ldlt.info() == Eigen::Success;
    if (usable) {
      direction = ldlt.solve(cur.gradient);
      usable = direction.allFinite() && cur.gradient.dot(direction) > 0.0;
    }
    if (!usable) direction = cur.gradient;

    double step = 1.0;
    bool improved = false;
    for (int h = 0; h < 60 && !improved; ++h) {
      const Eigen::VectorXd cand = theta + step * direction;
      double value = -std::numeric_limits<double>::infinity();
      try {
        value = ev.evaluate(cand, Derivatives::None).value;
      } catch (const NumericError&) {
        // overshoot into overflow territory; halve and retry
      }
      if (value > cur.value) {
        theta = cand;
        improved = true;
      } else {
        step *= 0.5;
      }
    }
    if (!improved) {
      // The objective is flat to the last bit around the iterate, so judge
      // the full Newton step by the first-order condition instead: near the
      // maximizer the step still contracts the score quadratically even when
      // the value cannot move in double precision.
      const Eigen::VectorXd cand = theta + direction;
      bool contracted = false;
      try {
        const LikelihoodWorkspace trial = ev.evaluate(cand, Derivatives::Gradient);
        // the value comparison is only meaningful down to the noise floor of
        // summing the per-record terms, a few hundred ulps of the total
        const double slack =
            256.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(cur.value));
        contracted = trial.value >= cur.value - slack &&
                     trial.gradient.lpNorm<Eigen::Infinity>() < 0.5 * conv.gradient_max_norm;
      } catch (const NumericError&) {
        // keep the current iterate
      }
      if (contracted) {
        theta = cand;
      } else if (conv.gradient_max_norm <= std::sqrt(std::numeric_limits<double>::epsilon()) *
                                               (1.0 + std::abs(cur.value))) {
        // the score sits at the resolution floor of the objective; the
        // iterate is the maximizer as far as doubles can tell
        conv.converged = true;
        break;
      } else {
        throw ConvergenceError("line search stalled at iteration " +
                               std::to_string(conv.iterations) + "; max |gradient| = " +
                               format_double(conv.gradient_max_norm));
      }
    }
    cur = ev.evaluate(theta, Derivatives::Hessian);
  }

  // Covariance from the spectral inverse of -H, which doubles as the rank test.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(-cur.hessian);
  if (es.info() != Eigen::Success)
    throw NumericError("eigendecomposition of the information matrix failed");
  const Eigen::VectorXd& ev_vals = es.eigenvalues();
  const double scale = std::max(1.0, ev_vals.cwiseAbs().maxCoeff());
  Eigen::Index weakest = 0;
  ev_vals.minCoeff(&weakest);
  if (ev_vals[weakest] <= 1e-10 * scale) {
    Eigen::Index which = 0;
    es.eigenvectors().col(weakest).cwiseAbs().maxCoeff(&which);
    throw RankDeficiencyError(
        "information matrix is singular; weakest direction is " +
        detail::mle_parameter_name(ev.free_codes(), ds.asv_names,
                                   static_cast<std::size_t>(which)));
  }

  MleFit fit;
  fit.baseline_code = baseline_code;
  fit.free_codes = ev.free_codes();
  fit.theta = std::move(theta);
  fit.covariance = es.eigenvectors() * ev_vals.cwiseInverse().asDiagonal() *
                   es.eigenvectors().transpose();
  fit.loglik = cur.value;
  fit.convergence = conv;
  return fit;
}

struct BaselineSearch {
  int baseline_code = 0;
  MleFit provisional;  // the fit under baseline code 1, reusable when it wins
};

// Fits once with code 1 as the provisional baseline, extends the intercepts
// with the pinned zero, and picks the smallest; re-pinning to that alternative
// makes every reported intercept non-negative.  Ties resolve to the smallest
// code.
inline BaselineSearch search_baseline_fit(const TransactionDataset& ds,
                                          const NewtonOptions& opts = {}) {
  BaselineSearch out;
  out.provisional = fit_mle(ds, 1, opts);
  int best_code = 1;
  double best_value = 0.0;  // the provisional baseline's own intercept
  for (std::size_t i = 0; i < out.provisional.free_codes.size(); ++i) {
    const double a = out.provisional.theta[static_cast<Eigen::Index>(i)];
    if (a < best_value) {
      best_value = a;
      best_code = out.provisional.free_codes[i];
    }
  }
  out.baseline_code = best_code;
  return out;
}

inline int search_baseline(const TransactionDataset& ds, const NewtonOptions& opts = {}) {
  return search_baseline_fit(ds, opts).baseline_code;
}

namespace detail {

// d(gamma)/d(theta) under the market-share constraint, evaluated with all
// exponentials scaled into [0, 1]
inline Eigen::VectorXd gamma_gradient(const LogLikEvaluator& ev, const Eigen::VectorXd& theta) {
  const std::size_t nf = ev.free_codes().size();
  const std::size_t A = ev.asv_count();
  const Eigen::VectorXd logD = ev.log_denominators(theta);
  const double shift = -logD.minCoeff();  // max over i of -log D_i

  double denom = 0.0;
  Eigen::VectorXd numer = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nf + A));
  std::vector<double> u;
  for (std::size_t i = 0; i < ev.record_count(); ++i) {
    ev.utilities_for(theta, i, u);
    const double ld = logD[static_cast<Eigen::Index>(i)];
    const double w = std::exp(-ld - shift);
    denom += w;
    for (std::size_t j = 0; j < u.size(); ++j) {
      const double coef = w * std::exp(u[j] - ld);
      const int ap = ev.alt_param(i, j);
      if (ap >= 0) numer[ap] += coef;
      const double* x = ev.asv_row(i, j);
      for (std::size_t a = 0; a < A; ++a) numer[static_cast<Eigen::Index>(nf + a)] += coef * x[a];
    }
  }
  return numer / denom;
}

}  // namespace detail

// Closed-form gamma from the market-share condition L / n_R = (1 - s) / s,
// where L = e^gamma * sum_i 1/D_i:
//   gamma = log(n_R (1 - s) / s) - log sum_i 1/D_i.
inline double estimate_gamma(const TransactionDataset& ds, const ModelCoefficients& coefficients,
                             double market_share) {
  if (!(market_share > 0.0 && market_share < 1.0))
    throw DomainError("market share must lie strictly between 0 and 1, got " +
                      format_double(market_share));
  if (ds.records.empty()) throw DataError("dataset has no records");
  const LogLikEvaluator ev(ds, coefficients.baseline_code);
  const Eigen::VectorXd logD = ev.log_denominators(ev.flatten(coefficients));
  std::vector<double> neg(logD.size());
  for (Eigen::Index i = 0; i < logD.size(); ++i) neg[static_cast<std::size_t>(i)] = -logD[i];
  const double log_T = log_sum_exp(neg);
  const double n_R = static_cast<double>(ds.records.size());
  return std::log(n_R * (1.0 - market_share) / market_share) - log_T;
}

// Delta-method variance of gamma given the covariance of the MLE parameters.
inline double gamma_variance(const TransactionDataset& ds, const ModelCoefficients& coefficients,
                             const Eigen::MatrixXd& covariance) {
  const LogLikEvaluator ev(ds, coefficients.baseline_code);
  const Eigen::VectorXd g = detail::gamma_gradient(ev, ev.flatten(coefficients));
  if (covariance.rows() != g.size() || covariance.cols() != g.size())
    throw DomainError("covariance has order " + std::to_string(covariance.rows()) +
                      ", expected " + std::to_string(g.size()));
  return g.dot(covariance * g);
}

// No-purchase volume implied by gamma: L = e^gamma * sum_i 1/D_i.
struct ArrivalEstimates {
  double no_purchase = 0.0;
  double total = 0.0;
  std::int64_t no_purchase_rounded = 0;
  std::int64_t total_rounded = 0;
  std::int64_t observed = 0;
};

inline ArrivalEstimates no_purchase(const TransactionDataset& ds,
                                    const ModelCoefficients& coefficients) {
  if (!coefficients.gamma)
    throw StateError("no-purchase estimation needs gamma; run estimate_gamma first");
  if (ds.records.empty()) throw DataError("dataset has no records");
  const LogLikEvaluator ev(ds, coefficients.baseline_code);
  const Eigen::VectorXd logD = ev.log_denominators(ev.flatten(coefficients));
  std::vector<double> terms(logD.size());
  for (Eigen::Index i = 0; i < logD.size(); ++i)
    terms[static_cast<std::size_t>(i)] = *coefficients.gamma - logD[i];
  const double L = std::exp(log_sum_exp(terms));
  if (!std::isfinite(L) || L >= 9.0e15)
    throw NumericError("no-purchase estimate overflows (gamma = " +
                       format_double(*coefficients.gamma) + ")");
  ArrivalEstimates out;
  out.observed = static_cast<std::int64_t>(ds.records.size());
  out.no_purchase = L;
  out.total = static_cast<double>(out.observed) + L;
  out.no_purchase_rounded = round_half_away(L);
  out.total_rounded = out.observed + out.no_purchase_rounded;
  return out;
}

// Complete fit output: coefficient table, joint covariance, volume estimates,
// and the dataset structure needed for prediction and reporting.
struct FitResult {
  AlternativeCatalog catalog;
  std::vector<ChoiceSet> remaining_sets;
  std::vector<std::string> asv_names;
  std::string id_name;
  std::string response_name;
  std::string alternatives_name;

  ModelCoefficients coefficients;       // gamma included
  std::vector<std::string> coef_names;  // gamma row first, then ASCs, then slopes
  Eigen::VectorXd estimates;
  Eigen::VectorXd std_errors;
  Eigen::VectorXd z_values;
  Eigen::VectorXd p_values;
  Eigen::MatrixXd covariance;  // order matches `estimates`

  double loglik = 0.0;
  Convergence convergence;
  double market_share = 0.0;
  ArrivalEstimates arrivals;
};

// The full estimation pipeline: validate, search the baseline, maximize the
// observed likelihood, size the no-purchase volume.  Errors escaping a phase
// are tagged with the phase name and rethrown unchanged.
inline FitResult fit(const TransactionDataset& ds, double market_share = 0.7,
                     const NewtonOptions& opts = {}) {
  if (!(market_share > 0.0 && market_share < 1.0))
    throw DomainError("market share must lie strictly between 0 and 1, got " +
                      format_double(market_share));
  try {
    ds.validate();
    if (ds.records.empty()) throw DataError("dataset has no records");
  } catch (Error& e) {
    e.tag_stage("validation");
    throw;
  }

  BaselineSearch search;
  try {
    search = search_baseline_fit(ds, opts);
  } catch (Error& e) {
    e.tag_stage("baseline search");
    throw;
  }

  MleFit mle;
  try {
    mle = search.baseline_code == 1 ? std::move(search.provisional)
                                    : fit_mle(ds, search.baseline_code, opts);
  } catch (Error& e) {
    e.tag_stage("mle");
    throw;
  }

  FitResult out;
  out.catalog = ds.catalog;
  out.remaining_sets = ds.remaining_sets;
  out.asv_names = ds.asv_names;
  out.id_name = ds.id_name;
  out.response_name = ds.response_name;
  out.alternatives_name = ds.alternatives_name;
  out.loglik = mle.loglik;
  out.convergence = mle.convergence;
  out.market_share = market_share;

  const LogLikEvaluator ev(ds, mle.baseline_code);
  out.coefficients = ev.coefficients(mle.theta);

  double gamma = 0.0;
  Eigen::VectorXd g;
  try {
    gamma = estimate_gamma(ds, out.coefficients, market_share);
    g = detail::gamma_gradient(ev, mle.theta);
    out.coefficients.gamma = gamma;
    out.arrivals = no_purchase(ds, out.coefficients);
  } catch (Error& e) {
    e.tag_stage("gamma");
    throw;
  }

  const auto P = static_cast<Eigen::Index>(mle.theta.size());
  out.coef_names.push_back("gamma (-ASC" + std::to_string(mle.baseline_code) + ")");
  for (int c : mle.free_codes) out.coef_names.push_back("ASC" + std::to_string(c));
  for (const auto& n : ds.asv_names) out.coef_names.push_back(n);

  out.estimates.resize(P + 1);
  out.estimates[0] = gamma;
  out.estimates.tail(P) = mle.theta;

  out.covariance.resize(P + 1, P + 1);
  const Eigen::VectorXd cg = mle.covariance * g;
  out.covariance(0, 0) = g.dot(cg);
  out.covariance.block(1, 0, P, 1) = cg;
  out.covariance.block(0, 1, 1, P) = cg.transpose();
  out.covariance.block(1, 1, P, P) = mle.covariance;

  out.std_errors = out.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  out.z_values.resize(P + 1);
  out.p_values.resize(P + 1);
  for (Eigen::Index i = 0; i <= P; ++i) {
    out.z_values[i] = out.estimates[i] / out.std_errors[i];
    out.p_values[i] = two_sided_normal_p(out.z_values[i]);
  }
  return out;
}

}  // namespace rde
