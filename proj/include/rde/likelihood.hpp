#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rde/dataset.hpp"
#include "rde/errors.hpp"
#include "rde/numeric.hpp"

namespace rde {

// Fitted conditional-logit coefficients on the normalized scale: one intercept
// per non-baseline alternative (the baseline intercept is pinned at zero), one
// slope per alternative-specific covariate, and optionally the no-purchase
// parameter gamma.
struct ModelCoefficients {
  int baseline_code = 0;
  std::map<int, double> alpha_star;  // keyed by alternative code, baseline excluded
  std::vector<double> beta;
  std::optional<double> gamma;

  bool operator==(const ModelCoefficients&) const = default;

  double alpha_star_of(int code) const {
    if (code == baseline_code) return 0.0;
    auto it = alpha_star.find(code);
    if (it == alpha_star.end())
      throw DomainError("no intercept for alternative code " + std::to_string(code));
    return it->second;
  }
};

// Deterministic systematic utility alpha*_j + beta . x_j.
inline double utility(const ModelCoefficients& c, int code, std::span<const double> asv) {
  if (asv.size() != c.beta.size())
    throw DomainError("utility expects " + std::to_string(c.beta.size()) +
                      " covariate values, got " + std::to_string(asv.size()));
  return linear_utility(c.alpha_star_of(code), c.beta, asv.data());
}

// Choice probabilities over an exposed assortment, conditional on purchase.
// `asv_rows[i]` holds the covariates of codes[i].
inline std::vector<double> purchase_probabilities(const ModelCoefficients& c,
                                                  std::span<const int> codes,
                                                  std::span<const std::vector<double>> asv_rows) {
  if (codes.empty()) throw DomainError("choice set is empty");
  if (asv_rows.size() != codes.size())
    throw DomainError("expected one covariate row per alternative");
  std::vector<double> u(codes.size());
  for (std::size_t i = 0; i < codes.size(); ++i)
    u[i] = utility(c, codes[i], asv_rows[i]);
  std::vector<double> p(codes.size());
  softmax_from_utilities(u, p);
  return p;
}

struct FullProbabilities {
  double no_purchase = 0.0;
  std::vector<double> purchase;
};

// Unconditional probabilities including the no-purchase outcome, which has
// systematic utility gamma on the normalized scale.
inline FullProbabilities full_probabilities(const ModelCoefficients& c,
                                            std::span<const int> codes,
                                            std::span<const std::vector<double>> asv_rows) {
  if (!c.gamma)
    throw StateError("no-purchase probabilities need gamma; fit or set it first");
  if (codes.empty()) throw DomainError("choice set is empty");
  if (asv_rows.size() != codes.size())
    throw DomainError("expected one covariate row per alternative");
  std::vector<double> u(codes.size() + 1);
  u[0] = *c.gamma;
  for (std::size_t i = 0; i < codes.size(); ++i)
    u[i + 1] = utility(c, codes[i], asv_rows[i]);
  std::vector<double> p(u.size());
  softmax_from_utilities(u, p);
  FullProbabilities out;
  out.no_purchase = p[0];
  out.purchase.assign(p.begin() + 1, p.end());
  return out;
}

enum class Derivatives { None, Gradient, Hessian };

struct LikelihoodWorkspace {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

// Observed-data log-likelihood of the conditional logit, with analytic
// gradient and Hessian in the free parameters
//   theta = (alpha*_j for j != baseline, ascending code order; then beta).
//
// The per-record design vector of alternative j is z_j = (e_j, x_j) with the
// baseline's intercept slot absent.  With within-set probabilities p_j,
//   l       = sum_i [ u_chosen - logsumexp_j(u_j) ]
//   grad    = sum_i sum_j (delta_j - p_j) z_j
//   hessian = -sum_i [ sum_j p_j z_j z_j' - s_i s_i' ],  s_i = sum_j p_j z_j.
//
// The dataset is compiled into flat arrays once so repeated evaluations during
// optimization touch contiguous memory.  The evaluator keeps a pointer to the
// dataset only for error messages; it must not outlive the dataset.
class LogLikEvaluator {
 public:
  LogLikEvaluator(const TransactionDataset& ds, int baseline_code)
      : source_(&ds), baseline_(baseline_code), n_asv_(ds.asv_count()) {
    const int J = ds.catalog.size();
    if (!ds.catalog.contains(baseline_code))
      throw DomainError("baseline code " + std::to_string(baseline_code) +
                        " is not in the catalog (codes run 1.." + std::to_string(J) + ")");
    param_of_code_.assign(static_cast<std::size_t>(J) + 1, -1);
    for (int c = 1; c <= J; ++c) {
      if (c == baseline_) continue;
      param_of_code_[static_cast<std::size_t>(c)] = static_cast<int>(free_codes_.size());
      free_codes_.push_back(c);
    }

    std::unordered_map<int, const ChoiceSet*> sets;
    for (const auto& s : ds.remaining_sets) sets.emplace(s.set_code, &s);

    offsets_.reserve(ds.records.size() + 1);
    offsets_.push_back(0);
    for (const auto& r : ds.records) {
      const ChoiceSet& s = *sets.at(r.set_code);
      const std::size_t base = offsets_.back();
      for (std::size_t pos = 0; pos < s.codes.size(); ++pos)
        alt_param_.push_back(param_of_code_[static_cast<std::size_t>(s.codes[pos])]);
      alt_asv_.insert(alt_asv_.end(), r.asv.begin(), r.asv.end());
      chosen_.push_back(base + static_cast<std::size_t>(s.position_of(r.chosen_code)));
      offsets_.push_back(base + s.codes.size());
    }
  }

  std::size_t parameter_count() const { return free_codes_.size() + n_asv_; }
  std::size_t record_count() const { return offsets_.size() - 1; }
  std::size_t asv_count() const { return n_asv_; }
  int baseline_code() const { return baseline_; }
  const std::vector<int>& free_codes() const { return free_codes_; }

  // parameter index of an intercept, -1 for the baseline
  int param_of_code(int code) const {
    return param_of_code_[static_cast<std::size_t>(code)];
  }

  std::size_t set_size(std::size_t record) const {
    return offsets_[record + 1] - offsets_[record];
  }

  // systematic utilities of record `i`, in set position order
  void utilities_for(const Eigen::VectorXd& theta, std::size_t i,
                     std::vector<double>& out) const {
    check_theta(theta);
    const std::size_t lo = offsets_[i], hi = offsets_[i + 1];
    out.resize(hi - lo);
    const std::span<const double> beta(theta.data() + free_codes_.size(), n_asv_);
    for (std::size_t k = lo; k < hi; ++k) {
      const int ap = alt_param_[k];
      const double alpha = ap >= 0 ? theta[ap] : 0.0;
      out[k - lo] = linear_utility(alpha, beta, alt_asv_.data() + k * n_asv_);
    }
  }

  // covariate row of (record i, set position pos)
  const double* asv_row(std::size_t i, std::size_t pos) const {
    return alt_asv_.data() + (offsets_[i] + pos) * n_asv_;
  }

  int alt_param(std::size_t i, std::size_t pos) const {
    return alt_param_[offsets_[i] + pos];
  }

  std::size_t chosen_position(std::size_t i) const { return chosen_[i] - offsets_[i]; }

  // log of the purchase denominator D_i = sum_{j in S_i} exp(u_ij), per record
  Eigen::VectorXd log_denominators(const Eigen::VectorXd& theta) const {
    Eigen::VectorXd out(record_count());
    std::vector<double> u;
    for (std::size_t i = 0; i < record_count(); ++i) {
      utilities_for(theta, i, u);
      out[static_cast<Eigen::Index>(i)] = log_sum_exp(u);
    }
    return out;
  }

  // within-set choice probabilities of record `i`
  Eigen::VectorXd record_probabilities(const Eigen::VectorXd& theta, std::size_t i) const {
    std::vector<double> u;
    utilities_for(theta, i, u);
    Eigen::VectorXd p(u.size());
    softmax_from_utilities(u, std::span<double>(p.data(), static_cast<std::size_t>(p.size())));
    return p;
  }

  LikelihoodWorkspace evaluate(const Eigen::VectorXd& theta, Derivatives order) const {
    check_theta(theta);
    const std::size_t P = parameter_count();
    const std::size_t nf = free_codes_.size();
    LikelihoodWorkspace ws;
    if (order != Derivatives::None) ws.gradient = Eigen::VectorXd::Zero(P);
    if (order == Derivatives::Hessian) ws.hessian = Eigen::MatrixXd::Zero(P, P);

    const std::span<const double> beta(theta.data() + nf, n_asv_);
    std::vector<double> u, p;
    Eigen::VectorXd s(P);
    for (std::size_t i = 0; i < record_count(); ++i) {
      const std::size_t lo = offsets_[i], hi = offsets_[i + 1];
      const std::size_t m = hi - lo;
      u.resize(m);
      for (std::size_t k = lo; k < hi; ++k) {
        const int ap = alt_param_[k];
        const double alpha = ap >= 0 ? theta[ap] : 0.0;
        u[k - lo] = linear_utility(alpha, beta, alt_asv_.data() + k * n_asv_);
      }
      const double lse = log_sum_exp(u);
      const double ll = u[chosen_[i] - lo] - lse;
      if (!std::isfinite(ll))
        throw NumericError("log-likelihood is not finite at record " + std::to_string(i) +
                           " (id '" + source_->records[i].id + "')");
      ws.value += ll;
      if (order == Derivatives::None) continue;

      p.resize(m);
      for (std::size_t j = 0; j < m; ++j) p[j] = std::exp(u[j] - lse);

      for (std::size_t j = 0; j < m; ++j) {
        const double d = (lo + j == chosen_[i] ? 1.0 : 0.0) - p[j];
        const int ap = alt_param_[lo + j];
        const double* x = alt_asv_.data() + (lo + j) * n_asv_;
        if (ap >= 0) ws.gradient[ap] += d;
        for (std::size_t a = 0; a < n_asv_; ++a) ws.gradient[nf + a] += d * x[a];
      }
      if (order != Derivatives::Hessian) continue;

      // accumulate -(sum_j p_j z_j z_j') + s s' into the lower triangle
      s.setZero();
      for (std::size_t j = 0; j < m; ++j) {
        const double pj = p[j];
        const int ap = alt_param_[lo + j];
        const double* x = alt_asv_.data() + (lo + j) * n_asv_;
        if (ap >= 0) s[ap] += pj;
        for (std::size_t a = 0; a < n_asv_; ++a) s[nf + a] += pj * x[a];

        if (ap >= 0) ws.hessian(ap, ap) -= pj;
        for (std::size_t a = 0; a < n_asv_; ++a) {
          if (ap >= 0) ws.hessian(nf + a, ap) -= pj * x[a];
          for (std::size_t b = 0; b <= a; ++b)
            ws.hessian(nf + a, nf + b) -= pj * x[a] * x[b];
        }
      }
      for (std::size_t r = 0; r < P; ++r)
        for (std::size_t c2 = 0; c2 <= r; ++c2) ws.hessian(r, c2) += s[r] * s[c2];
    }

    if (order == Derivatives::Hessian)
      ws.hessian.triangularView<Eigen::StrictlyUpper>() =
          ws.hessian.transpose().triangularView<Eigen::StrictlyUpper>();
    return ws;
  }

  // flat parameter vector -> named coefficients
  ModelCoefficients coefficients(const Eigen::VectorXd& theta) const {
    check_theta(theta);
    ModelCoefficients c;
    c.baseline_code = baseline_;
    for (std::size_t k = 0; k < free_codes_.size(); ++k)
      c.alpha_star.emplace(free_codes_[k], theta[static_cast<Eigen::Index>(k)]);
    c.beta.assign(theta.data() + free_codes_.size(), theta.data() + parameter_count());
    return c;
  }

  Eigen::VectorXd flatten(const ModelCoefficients& c) const {
    if (c.baseline_code != baseline_)
      throw DomainError("coefficients use baseline " + std::to_string(c.baseline_code) +
                        ", evaluator uses " + std::to_string(baseline_));
    if (c.beta.size() != n_asv_)
      throw DomainError("coefficients carry " + std::to_string(c.beta.size()) +
                        " slopes, dataset has " + std::to_string(n_asv_) + " covariates");
    Eigen::VectorXd theta(parameter_count());
    for (std::size_t k = 0; k < free_codes_.size(); ++k)
      theta[static_cast<Eigen::Index>(k)] = c.alpha_star_of(free_codes_[k]);
    for (std::size_t a = 0; a < n_asv_; ++a)
      theta[static_cast<Eigen::Index>(free_codes_.size() + a)] = c.beta[a];
    return theta;
  }

 private:
  void check_theta(const Eigen::VectorXd& theta) const {
    if (static_cast<std::size_t>(theta.size()) != parameter_count())
      throw DomainError("parameter vector has length " + std::to_string(theta.size()) +
                        ", expected " + std::to_string(parameter_count()));
  }

  const TransactionDataset* source_;
  int baseline_;
  std::size_t n_asv_;
  std::vector<int> free_codes_;
  std::vector<int> param_of_code_;
  std::vector<std::size_t> offsets_;
  std::vector<int> alt_param_;
  std::vector<double> alt_asv_;
  std::vector<std::size_t> chosen_;
};

// One-shot observed log-likelihood evaluation.
inline LikelihoodWorkspace observed_loglik(const Eigen::VectorXd& theta,
                                           const TransactionDataset& ds, int baseline_code,
                                           Derivatives order = Derivatives::None) {
  return LogLikEvaluator(ds, baseline_code).evaluate(theta, order);
}

}  // namespace rde
