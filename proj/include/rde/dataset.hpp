#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rde/errors.hpp"

namespace rde {

// Alternatives are identified by consecutive integer codes 1..J.  When this
// library assigns the coding (long-format input, synthetic data) codes follow
// the byte-wise lexicographic order of the labels; wide-format input arrives
// already coded and that coding is preserved.
struct AlternativeCatalog {
  struct Entry {
    int code = 0;
    std::string label;
    bool operator==(const Entry&) const = default;
  };

  std::vector<Entry> entries;  // sorted by code, codes are 1..size()

  bool operator==(const AlternativeCatalog&) const = default;

  int size() const { return static_cast<int>(entries.size()); }

  bool contains(int code) const { return code >= 1 && code <= size(); }

  const std::string& label(int code) const {
    if (!contains(code))
      throw DomainError("alternative code " + std::to_string(code) +
                        " is not in the catalog (codes run 1.." + std::to_string(size()) + ")");
    return entries[static_cast<std::size_t>(code) - 1].label;
  }

  std::optional<int> code_of(std::string_view label) const {
    for (const auto& e : entries)
      if (e.label == label) return e.code;
    return std::nullopt;
  }
};

// A distinct exposed assortment with the number of transactions observed on it.
// Codes are strictly increasing; set codes are assigned 1..M in lexicographic
// order of the code vectors (shorter prefixes first).
struct ChoiceSet {
  int set_code = 0;
  std::vector<int> codes;
  std::int64_t observations = 0;

  bool operator==(const ChoiceSet&) const = default;

  bool contains(int code) const {
    return std::binary_search(codes.begin(), codes.end(), code);
  }

  // position of `code` within the set, or -1
  int position_of(int code) const {
    auto it = std::lower_bound(codes.begin(), codes.end(), code);
    if (it == codes.end() || *it != code) return -1;
    return static_cast<int>(it - codes.begin());
  }
};

// An assortment filtered out of the estimation sample, kept for accounting.
struct RemovedSet {
  std::vector<int> codes;
  std::int64_t observations = 0;
  bool operator==(const RemovedSet&) const = default;
};

// One transaction: who bought, what was chosen, which assortment was exposed,
// and the alternative-specific covariates for every alternative in the set.
// `asv` is row-major over (position in set, covariate index).
struct TransactionRecord {
  std::string id;
  int chosen_code = 0;
  int set_code = 0;
  std::vector<double> asv;

  bool operator==(const TransactionRecord&) const = default;
};

// Canonical estimation-ready dataset produced by reshaping raw transactions.
struct TransactionDataset {
  AlternativeCatalog catalog;
  std::vector<std::string> asv_names;

  // source column names, carried through for reporting
  std::string id_name = "id";
  std::string response_name = "resp";
  std::string alternatives_name = "alt";

  std::vector<ChoiceSet> remaining_sets;      // ordered by set_code
  std::vector<RemovedSet> removed_sets;       // below the observation cutoff
  std::vector<RemovedSet> removed_singletons; // single-alternative assortments
  std::vector<TransactionRecord> records;     // input order

  bool operator==(const TransactionDataset&) const = default;

  std::size_t asv_count() const { return asv_names.size(); }

  const ChoiceSet* find_set(int set_code) const {
    for (const auto& s : remaining_sets)
      if (s.set_code == set_code) return &s;
    return nullptr;
  }

  const ChoiceSet& set_by_code(int set_code) const {
    if (const ChoiceSet* s = find_set(set_code)) return *s;
    throw DomainError("unknown choice-set code " + std::to_string(set_code) +
                      "; valid codes are 1.." + std::to_string(remaining_sets.size()));
  }

  double asv_value(const TransactionRecord& r, int code, std::size_t asv_index) const {
    const ChoiceSet& s = set_by_code(r.set_code);
    const int pos = s.position_of(code);
    if (pos < 0)
      throw DomainError("alternative " + std::to_string(code) + " is not in choice set " +
                        std::to_string(r.set_code));
    return r.asv[static_cast<std::size_t>(pos) * asv_count() + asv_index];
  }

  std::int64_t singleton_observations() const {
    std::int64_t n = 0;
    for (const auto& s : removed_singletons) n += s.observations;
    return n;
  }

  std::int64_t removed_observations() const {
    std::int64_t n = 0;
    for (const auto& s : removed_sets) n += s.observations;
    return n;
  }

  // Structural invariant check.  Throws DataError naming the first violation.
  void validate() const {
    const int J = catalog.size();
    if (J == 0) throw DataError("catalog is empty");
    for (int c = 1; c <= J; ++c) {
      if (catalog.entries[static_cast<std::size_t>(c) - 1].code != c)
        throw DataError("catalog codes are not consecutive 1.." + std::to_string(J));
      const auto& label = catalog.entries[static_cast<std::size_t>(c) - 1].label;
      if (label.empty()) throw DataError("alternative " + std::to_string(c) + " has an empty label");
    }
    for (int c = 1; c <= J; ++c)
      for (int d = c + 1; d <= J; ++d)
        if (catalog.label(c) == catalog.label(d))
          throw DataError("alternatives " + std::to_string(c) + " and " + std::to_string(d) +
                          " share the label '" + catalog.label(c) + "'");

    std::int64_t seen = 0;
    for (std::size_t i = 0; i < remaining_sets.size(); ++i) {
      const ChoiceSet& s = remaining_sets[i];
      if (s.set_code != static_cast<int>(i) + 1)
        throw DataError("choice-set codes are not consecutive 1.." +
                        std::to_string(remaining_sets.size()));
      if (s.codes.empty()) throw DataError("choice set " + std::to_string(s.set_code) + " is empty");
      for (std::size_t k = 0; k < s.codes.size(); ++k) {
        if (!catalog.contains(s.codes[k]))
          throw DataError("choice set " + std::to_string(s.set_code) +
                          " references unknown alternative " + std::to_string(s.codes[k]));
        if (k > 0 && s.codes[k] <= s.codes[k - 1])
          throw DataError("choice set " + std::to_string(s.set_code) +
                          " codes are not strictly increasing");
      }
      if (i > 0 && !(remaining_sets[i - 1].codes < s.codes))
        throw DataError("remaining choice sets are not in lexicographic order");
      seen += s.observations;
    }
    if (seen != static_cast<std::int64_t>(records.size()))
      throw DataError("choice-set observation counts sum to " + std::to_string(seen) +
                      " but there are " + std::to_string(records.size()) + " records");

    for (const auto& r : records) {
      const ChoiceSet* s = find_set(r.set_code);
      if (s == nullptr)
        throw DataError("record '" + r.id + "' references unknown choice-set code " +
                        std::to_string(r.set_code));
      if (!s->contains(r.chosen_code))
        throw DataError("record '" + r.id + "' chose alternative " +
                        std::to_string(r.chosen_code) + " outside its choice set");
      if (r.asv.size() != s->codes.size() * asv_count())
        throw DataError("record '" + r.id + "' carries " + std::to_string(r.asv.size()) +
                        " covariate values, expected " +
                        std::to_string(s->codes.size() * asv_count()));
      for (double v : r.asv)
        if (!std::isfinite(v))
          throw DataError("record '" + r.id + "' has a non-finite covariate value");
    }
  }
};

}  // namespace rde
