#pragma once

#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

#include "rde/dataset.hpp"
#include "rde/estimation.hpp"
#include "rde/numeric.hpp"
#include "rde/synthetic.hpp"

namespace rde {

namespace detail {

// data.frame-style table: every column right-aligned to its widest cell,
// single-space separated, one leading space
inline std::string aligned_table(const std::vector<std::string>& header,
                                 const std::vector<std::vector<std::string>>& rows,
                                 bool first_column_left = false) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());

  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      const std::string pad(width[c] - row[c].size(), ' ');
      if (first_column_left && c == 0) out << row[c] << pad;
      else out << ' ' << pad << row[c];
    }
    out << '\n';
  };
  emit(header);
  for (const auto& row : rows) emit(row);
  return out.str();
}

inline std::string pipe_join(const std::vector<int>& codes) {
  std::string s;
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (i > 0) s += '|';
    s += std::to_string(codes[i]);
  }
  return s;
}

}  // namespace detail

// Reshape summary: the alternative coding, the retained assortments with
// their transaction counts, and what was filtered away.
inline std::string reshape_report(const TransactionDataset& ds) {
  std::ostringstream out;

  out << "$Alts_Code_Desc\n";
  std::vector<std::vector<std::string>> alt_rows;
  for (const auto& e : ds.catalog.entries)
    alt_rows.push_back({std::to_string(e.code), e.label});
  out << detail::aligned_table({"Alts_Code", ds.alternatives_name}, alt_rows) << '\n';

  out << "$Rem_Choice_Set\n";
  std::vector<std::vector<std::string>> rem_rows;
  for (const auto& s : ds.remaining_sets)
    rem_rows.push_back({std::to_string(s.set_code), detail::pipe_join(s.codes),
                        std::to_string(s.observations)});
  out << detail::aligned_table({"Choice_Set_Code", "Remaining_Choice_Set", "Observation"},
                               rem_rows)
      << '\n';

  out << "$Removed_Choice_Set\n";
  if (ds.removed_sets.empty()) {
    out << " (none)\n\n";
  } else {
    std::vector<std::vector<std::string>> rm_rows;
    for (const auto& s : ds.removed_sets)
      rm_rows.push_back({detail::pipe_join(s.codes), std::to_string(s.observations)});
    out << detail::aligned_table({"Removed_Choice_Set", "Observation"}, rm_rows) << '\n';
  }

  out << "$Summary\n";
  out << " Transactions_Kept: " << ds.records.size() << '\n';
  out << " Remaining_Choice_Sets: " << ds.remaining_sets.size() << '\n';
  out << " Removed_Choice_Sets: " << ds.removed_sets.size() << " (" << ds.removed_observations()
      << " transactions)\n";
  out << " Dropped_Singletons: " << ds.removed_singletons.size() << " ("
      << ds.singleton_observations() << " transactions)\n";
  return out.str();
}

// Estimation printout: model identity, coefficient table with standard
// errors, z values and p values at four decimals, and the volume estimates.
inline std::string fit_report(const FitResult& f) {
  std::ostringstream out;
  out << "$Model\n[1] \"Conditional Logit Model\"\n\n";
  out << "$Estimation_Method\n[1] \"Robust Demand Estimation\"\n\n";
  out << "$Response_Variable\n[1] \"" << f.response_name << "\"\n\n";
  out << "$Alternative_Specific_Variables\n[1]";
  for (const auto& n : f.asv_names) out << " \"" << n << '"';
  out << "\n\n";
  out << "$Baseline_Product\n[1] " << f.coefficients.baseline_code << "\n\n";

  out << "$Coefficients\n";
  std::vector<std::vector<std::string>> rows;
  for (Eigen::Index i = 0; i < f.estimates.size(); ++i)
    rows.push_back({f.coef_names[static_cast<std::size_t>(i)], format_fixed4(f.estimates[i]),
                    format_fixed4(f.std_errors[i]), format_fixed4(f.z_values[i]),
                    format_fixed4(f.p_values[i])});
  out << detail::aligned_table({"", "Estimate", "Std. Error", "z value", "Pr(>|z|)"}, rows,
                               /*first_column_left=*/true)
      << '\n';

  out << "$Total_Arrivals_(Estimate)\n[1] " << f.arrivals.total_rounded << "\n\n";
  out << "$Observed_Arrivals\n[1] " << f.arrivals.observed << "\n\n";
  out << "$No_Purchase_(Estimate)\n[1] " << f.arrivals.no_purchase_rounded << '\n';
  return out.str();
}

// Parameter-recovery summary across replications.
inline std::string recovery_report(const RecoveryStudy& study,
                                   const std::vector<std::string>& asv_names,
                                   const std::vector<double>& beta_true) {
  std::ostringstream out;
  out << "$Replications\n[1] " << study.replications.size() << "\n\n";
  out << "$True_Gamma\n[1] " << format_fixed4(study.gamma_true) << "\n\n";
  out << "$Market_Share_Used\n[1] " << format_fixed4(study.prop) << "\n\n";
  out << "$Recovery\n";
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"gamma", format_fixed4(study.gamma_true), format_fixed4(study.gamma_mae),
                  format_fixed4(study.gamma_coverage3)});
  for (std::size_t a = 0; a < asv_names.size(); ++a)
    rows.push_back({asv_names[a], format_fixed4(beta_true[a]), format_fixed4(study.beta_mae[a]),
                    format_fixed4(study.beta_coverage3[a])});
  out << detail::aligned_table({"", "Truth", "MAE", "Coverage_3SE"}, rows,
                               /*first_column_left=*/true);
  return out.str();
}

}  // namespace rde
