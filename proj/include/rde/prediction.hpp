#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rde/errors.hpp"
#include "rde/estimation.hpp"
#include "rde/likelihood.hpp"
#include "rde/rng.hpp"

namespace rde {

// Covariates for one prediction scenario: one vector of covariate values per
// alternative, in the choice set's position order.
using CovariateRow = std::vector<std::vector<double>>;

struct PredictionOptions {
  bool fixed = true;           // argmax decisions; false draws from the row distribution
  std::uint64_t seed = 0;      // master seed for sampled decisions
  bool include_no_purchase = false;
};

struct PredictionResult {
  int set_code = 0;
  std::vector<int> alternative_codes;
  std::vector<std::vector<double>> probabilities;  // per row, conditional on purchase
  std::vector<double> no_purchase;                 // per row, filled on request
  std::vector<int> decisions;                      // chosen alternative code per row
  bool fixed = true;
  std::uint64_t seed = 0;
};

namespace detail {

inline void check_covariate_row(const FitResult& model, const ChoiceSet& set,
                                const CovariateRow& row, std::size_t row_index) {
  if (row.size() != set.codes.size())
    throw DataError("prediction row " + std::to_string(row_index + 1) + " covers " +
                    std::to_string(row.size()) + " alternatives, choice set " +
                    std::to_string(set.set_code) + " has " + std::to_string(set.codes.size()));
  for (std::size_t pos = 0; pos < row.size(); ++pos) {
    if (row[pos].size() != model.asv_names.size())
      throw DataError("prediction row " + std::to_string(row_index + 1) + ", alternative " +
                      std::to_string(set.codes[pos]) + ": expected " +
                      std::to_string(model.asv_names.size()) + " covariate values, got " +
                      std::to_string(row[pos].size()));
    for (std::size_t a = 0; a < row[pos].size(); ++a)
      if (!std::isfinite(row[pos][a]))
        throw DataError("prediction row " + std::to_string(row_index + 1) + ", alternative " +
                        std::to_string(set.codes[pos]) + ": covariate '" + model.asv_names[a] +
                        "' is missing or not finite");
  }
}

inline const ChoiceSet& find_prediction_set(const FitResult& model, int set_code) {
  for (const auto& s : model.remaining_sets)
    if (s.set_code == set_code) return s;
  throw DomainError("unknown choice-set code " + std::to_string(set_code) +
                    "; the fitted model has sets 1.." +
                    std::to_string(model.remaining_sets.size()));
}

}  // namespace detail

// Choice probabilities for new covariate rows on one of the fitted choice
// sets.  Shares the utility and softmax kernels with the likelihood, so
// feeding a fitted record's own covariates reproduces the in-sample
// probabilities bit for bit.
inline std::vector<std::vector<double>> predict_probabilities(
    const FitResult& model, std::span<const CovariateRow> rows, int set_code) {
  const ChoiceSet& set = detail::find_prediction_set(model, set_code);
  std::vector<std::vector<double>> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    detail::check_covariate_row(model, set, rows[i], i);
    out.push_back(purchase_probabilities(model.coefficients, set.codes, rows[i]));
  }
  return out;
}

// Decision per probability row: the argmax under fixed mode (ties to the
// lowest-coded alternative), otherwise one categorical draw per row from a
// row-indexed substream, so results do not depend on evaluation order.
inline std::vector<int> decide(const std::vector<std::vector<double>>& probabilities,
                               std::span<const int> codes, bool fixed, std::uint64_t seed) {
  std::vector<int> out;
  out.reserve(probabilities.size());
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const auto& p = probabilities[i];
    if (p.size() != codes.size())
      throw DomainError("probability row " + std::to_string(i + 1) + " has " +
                        std::to_string(p.size()) + " entries, expected " +
                        std::to_string(codes.size()));
    std::size_t pick = 0;
    if (fixed) {
      for (std::size_t j = 1; j < p.size(); ++j)
        if (p[j] > p[pick]) pick = j;
    } else {
      RandomStream stream(derive_seed(seed, i));
      pick = stream.categorical(p);
    }
    out.push_back(codes[pick]);
  }
  return out;
}

inline PredictionResult predict(const FitResult& model, std::span<const CovariateRow> rows,
                                int set_code, const PredictionOptions& opts = {}) {
  const ChoiceSet& set = detail::find_prediction_set(model, set_code);
  PredictionResult result;
  result.set_code = set_code;
  result.alternative_codes = set.codes;
  result.fixed = opts.fixed;
  result.seed = opts.seed;
  result.probabilities = predict_probabilities(model, rows, set_code);
  if (opts.include_no_purchase) {
    result.no_purchase.reserve(rows.size());
    for (const auto& row : rows)
      result.no_purchase.push_back(
          full_probabilities(model.coefficients, set.codes, row).no_purchase);
  }
  result.decisions = decide(result.probabilities, set.codes, opts.fixed, opts.seed);
  return result;
}

}  // namespace rde
