#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rde/csv.hpp"
#include "rde/dataset.hpp"
#include "rde/errors.hpp"

namespace rde {

// Column bindings for long-format input: one row per (transaction, alternative),
// a 0/1 response marking the chosen row.
struct LongSchema {
  std::string idvar;
  std::string resp;
  std::string alts;
  std::vector<std::string> asv;
};

// Column bindings for wide-format input: one row per transaction.  The exposed
// assortment arrives as a '|'-separated code string plus a set code, covariates
// as one column per (covariate, alternative code), named "<asv>_<code>".
struct WideSchema {
  std::string idvar;
  std::string resp;  // carried for reporting; wide rows are purchases by construction
  std::string alts;
  std::vector<std::string> asv;
  std::string alts_code;
  std::string choice_set;
  std::string choice_set_code;
};

struct ParseOptions {
  char delimiter = ',';
  // drop exact duplicate rows instead of failing on them
  bool dedup = false;
};

struct ReshapeOptions {
  std::int64_t min_obs = 30;
};

struct LongRow {
  std::size_t line = 0;
  std::string id;
  std::string alternative;
  int resp = 0;
  std::vector<double> asv;  // one value per LongSchema::asv entry, NaN when blank
};

struct WideRow {
  std::size_t line = 0;
  std::string id;
  std::string chosen_label;
  int chosen_code = 0;
  std::vector<int> set_codes;  // strictly increasing
  int file_set_code = 0;
  std::vector<double> asv;  // row-major (position in set, covariate), NaN when blank
};

namespace detail {

inline bool same_value(double a, double b) {
  return a == b || (std::isnan(a) && std::isnan(b));
}

inline bool same_asv(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!same_value(a[i], b[i])) return false;
  return true;
}

// one transaction after grouping, ready for assembly
struct IdGroup {
  std::string id;
  std::size_t line = 0;
  std::vector<int> codes;  // strictly increasing
  int chosen_code = 0;
  std::vector<double> asv;  // row-major (position, covariate)
};

// Shared back end of both reshape paths: dedupe assortments, count, filter,
// assign set codes, and emit surviving records in input order.
inline TransactionDataset assemble_dataset(std::vector<IdGroup>&& groups,
                                           AlternativeCatalog&& catalog,
                                           std::vector<std::string> asv_names,
                                           std::string id_name, std::string response_name,
                                           std::string alternatives_name,
                                           const ReshapeOptions& opts) {
  if (opts.min_obs < 1)
    throw DomainError("min_obs must be at least 1, got " + std::to_string(opts.min_obs));

  // std::map over code vectors iterates in exactly the required order:
  // lexicographic with shorter prefixes first
  std::map<std::vector<int>, std::int64_t> counts;
  for (const auto& g : groups) ++counts[g.codes];

  TransactionDataset ds;
  ds.catalog = std::move(catalog);
  ds.asv_names = std::move(asv_names);
  ds.id_name = std::move(id_name);
  ds.response_name = std::move(response_name);
  ds.alternatives_name = std::move(alternatives_name);

  std::map<std::vector<int>, int> set_code_of;
  for (const auto& [codes, n] : counts) {
    if (codes.size() < 2) {
      ds.removed_singletons.push_back({codes, n});
    } else if (n < opts.min_obs) {
      ds.removed_sets.push_back({codes, n});
    } else {
      ChoiceSet s;
      s.set_code = static_cast<int>(ds.remaining_sets.size()) + 1;
      s.codes = codes;
      s.observations = n;
      set_code_of.emplace(codes, s.set_code);
      ds.remaining_sets.push_back(std::move(s));
    }
  }
  if (ds.remaining_sets.empty())
    throw DataError("no choice sets remain after filtering (min_obs = " +
                    std::to_string(opts.min_obs) + ")");

  const std::size_t A = ds.asv_count();
  for (auto& g : groups) {
    auto it = set_code_of.find(g.codes);
    if (it == set_code_of.end()) continue;  // filtered out
    for (std::size_t pos = 0; pos < g.codes.size(); ++pos)
      for (std::size_t a = 0; a < A; ++a)
        if (!std::isfinite(g.asv[pos * A + a]))
          throw DataError("covariate '" + ds.asv_names[a] + "' is missing for id '" + g.id +
                          "', alternative " + std::to_string(g.codes[pos]));
    TransactionRecord r;
    r.id = std::move(g.id);
    r.chosen_code = g.chosen_code;
    r.set_code = it->second;
    r.asv = std::move(g.asv);
    ds.records.push_back(std::move(r));
  }

  ds.validate();
  return ds;
}

}  // namespace detail

inline std::vector<LongRow> parse_long(std::istream& in, const LongSchema& schema,
                                       const ParseOptions& opts = {}) {
  const Table t = read_delimited(in, opts.delimiter);
  const std::size_t c_id = t.require_column(schema.idvar);
  const std::size_t c_resp = t.require_column(schema.resp);
  const std::size_t c_alt = t.require_column(schema.alts);
  std::vector<std::size_t> c_asv;
  for (const auto& name : schema.asv) c_asv.push_back(t.require_column(name));

  std::vector<LongRow> rows;
  rows.reserve(t.rows.size());
  // (id, alternative) must be unique; remembers the first occurrence
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& f = t.rows[i];
    const std::size_t line = t.lines[i];
    LongRow r;
    r.line = line;
    r.id = f[c_id];
    if (r.id.empty())
      throw DataError("line " + std::to_string(line) + ": empty value in id column '" +
                      schema.idvar + "'");
    r.alternative = f[c_alt];
    if (r.alternative.empty())
      throw DataError("line " + std::to_string(line) + ": empty value in alternatives column '" +
                      schema.alts + "'");
    const long long resp = parse_int_cell(f[c_resp], line, schema.resp);
    if (resp != 0 && resp != 1)
      throw DataError("line " + std::to_string(line) + ": response must be 0 or 1, got " +
                      std::to_string(resp));
    r.resp = static_cast<int>(resp);
    r.asv.reserve(c_asv.size());
    for (std::size_t a = 0; a < c_asv.size(); ++a)
      r.asv.push_back(parse_double_cell(f[c_asv[a]], line, schema.asv[a]));

    const std::string key = r.id + '\x1f' + r.alternative;
    auto [it, inserted] = seen.emplace(key, rows.size());
    if (!inserted) {
      const LongRow& first = rows[it->second];
      if (opts.dedup && first.resp == r.resp && detail::same_asv(first.asv, r.asv))
        continue;
      throw DataError("duplicate row for id '" + r.id + "', alternative '" + r.alternative +
                      "' (lines " + std::to_string(first.line) + " and " + std::to_string(line) +
                      ")");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<int> parse_choice_set_string(std::string_view s, std::size_t line_no) {
  std::vector<int> codes;
  std::size_t start = 0;
  std::size_t token_index = 0;
  while (start <= s.size()) {
    std::size_t end = s.find('|', start);
    if (end == std::string_view::npos) end = s.size();
    const std::string_view token = s.substr(start, end - start);
    ++token_index;
    if (token.empty())
      throw DataError("line " + std::to_string(line_no) + ": malformed choice set '" +
                      std::string(s) + "': empty token at position " +
                      std::to_string(token_index));
    int code = 0;
    auto [p, ec] = std::from_chars(token.data(), token.data() + token.size(), code);
    if (ec != std::errc() || p != token.data() + token.size() || code < 1)
      throw DataError("line " + std::to_string(line_no) + ": malformed choice set '" +
                      std::string(s) + "': bad token '" + std::string(token) + "'");
    codes.push_back(code);
    if (end == s.size()) break;
    start = end + 1;
  }
  std::sort(codes.begin(), codes.end());
  for (std::size_t i = 1; i < codes.size(); ++i)
    if (codes[i] == codes[i - 1])
      throw DataError("line " + std::to_string(line_no) + ": choice set '" + std::string(s) +
                      "' lists alternative " + std::to_string(codes[i]) + " twice");
  return codes;
}

inline std::vector<WideRow> parse_wide(std::istream& in, const WideSchema& schema,
                                       const ParseOptions& opts = {}) {
  const Table t = read_delimited(in, opts.delimiter);
  const std::size_t c_id = t.require_column(schema.idvar);
  const std::size_t c_alt = t.require_column(schema.alts);
  const std::size_t c_altcode = t.require_column(schema.alts_code);
  const std::size_t c_set = t.require_column(schema.choice_set);
  const std::size_t c_setcode = t.require_column(schema.choice_set_code);
  // the response column is implicit in wide layout; validate it when present
  const auto c_resp = t.column(schema.resp);

  // covariate columns are resolved per (covariate, code) on first use
  std::unordered_map<long long, std::size_t> asv_col;
  auto asv_column = [&](std::size_t a, int code) {
    const long long key = static_cast<long long>(a) * 1000000LL + code;
    auto it = asv_col.find(key);
    if (it != asv_col.end()) return it->second;
    const std::string name = schema.asv[a] + "_" + std::to_string(code);
    const std::size_t col = t.require_column(name);
    asv_col.emplace(key, col);
    return col;
  };

  std::vector<WideRow> rows;
  rows.reserve(t.rows.size());
  std::unordered_map<std::string, std::size_t> seen;          // id -> first row
  std::unordered_map<int, std::string> label_of_code;         // chosen-code consistency
  std::unordered_map<std::string, int> code_of_label;
  std::map<std::vector<int>, int> code_of_set;                // set-string <-> set-code
  std::unordered_map<int, std::vector<int>> set_of_code;

  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& f = t.rows[i];
    const std::size_t line = t.lines[i];
    WideRow r;
    r.line = line;
    r.id = f[c_id];
    if (r.id.empty())
      throw DataError("line " + std::to_string(line) + ": empty value in id column '" +
                      schema.idvar + "'");
    r.chosen_label = f[c_alt];
    if (r.chosen_label.empty())
      throw DataError("line " + std::to_string(line) + ": empty value in alternatives column '" +
                      schema.alts + "'");
    r.chosen_code = static_cast<int>(parse_int_cell(f[c_altcode], line, schema.alts_code));
    if (r.chosen_code < 1)
      throw DataError("line " + std::to_string(line) + ": alternative code must be positive, got " +
                      std::to_string(r.chosen_code));
    if (c_resp) {
      const long long resp = parse_int_cell(f[*c_resp], line, schema.resp);
      if (resp != 1)
        throw DataError("line " + std::to_string(line) +
                        ": wide rows describe purchases; response must be 1, got " +
                        std::to_string(resp));
    }
    r.set_codes = parse_choice_set_string(f[c_set], line);
    r.file_set_code = static_cast<int>(parse_int_cell(f[c_setcode], line, schema.choice_set_code));
    if (std::find(r.set_codes.begin(), r.set_codes.end(), r.chosen_code) == r.set_codes.end())
      throw DataError("line " + std::to_string(line) + ": chosen alternative " +
                      std::to_string(r.chosen_code) + " is not in the choice set '" +
                      std::string(f[c_set]) + "'");

    // chosen labels and codes must pair consistently across the file
    if (auto it = label_of_code.find(r.chosen_code);
        it != label_of_code.end() && it->second != r.chosen_label)
      throw DataError("line " + std::to_string(line) + ": alternative code " +
                      std::to_string(r.chosen_code) + " appears with labels '" + it->second +
                      "' and '" + r.chosen_label + "'");
    label_of_code.emplace(r.chosen_code, r.chosen_label);
    if (auto it = code_of_label.find(r.chosen_label);
        it != code_of_label.end() && it->second != r.chosen_code)
      throw DataError("line " + std::to_string(line) + ": label '" + r.chosen_label +
                      "' appears with codes " + std::to_string(it->second) + " and " +
                      std::to_string(r.chosen_code));
    code_of_label.emplace(r.chosen_label, r.chosen_code);

    // set strings and set codes must pair consistently as well
    if (auto it = code_of_set.find(r.set_codes);
        it != code_of_set.end() && it->second != r.file_set_code)
      throw DataError("line " + std::to_string(line) + ": choice set '" + std::string(f[c_set]) +
                      "' appears with codes " + std::to_string(it->second) + " and " +
                      std::to_string(r.file_set_code));
    code_of_set.emplace(r.set_codes, r.file_set_code);
    if (auto it = set_of_code.find(r.file_set_code);
        it != set_of_code.end() && it->second != r.set_codes)
      throw DataError("line " + std::to_string(line) + ": choice-set code " +
                      std::to_string(r.file_set_code) + " maps to two different sets");
    set_of_code.emplace(r.file_set_code, r.set_codes);

    const std::size_t A = schema.asv.size();
    r.asv.resize(r.set_codes.size() * A);
    for (std::size_t pos = 0; pos < r.set_codes.size(); ++pos)
      for (std::size_t a = 0; a < A; ++a)
        r.asv[pos * A + a] =
            parse_double_cell(f[asv_column(a, r.set_codes[pos])], line,
                              schema.asv[a] + "_" + std::to_string(r.set_codes[pos]));

    auto [it, inserted] = seen.emplace(r.id, rows.size());
    if (!inserted) {
      const WideRow& first = rows[it->second];
      if (opts.dedup && first.chosen_code == r.chosen_code && first.set_codes == r.set_codes &&
          detail::same_asv(first.asv, r.asv))
        continue;
      throw DataError("duplicate transaction id '" + r.id + "' (lines " +
                      std::to_string(first.line) + " and " + std::to_string(line) + ")");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

inline TransactionDataset reshape(const std::vector<LongRow>& rows, const LongSchema& schema,
                                  const ReshapeOptions& opts = {}) {
  // catalog from every label present, coded in lexicographic label order
  std::vector<std::string> labels;
  for (const auto& r : rows) labels.push_back(r.alternative);
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  AlternativeCatalog catalog;
  std::unordered_map<std::string, int> code_of;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    catalog.entries.push_back({static_cast<int>(i) + 1, labels[i]});
    code_of.emplace(labels[i], static_cast<int>(i) + 1);
  }

  // group rows by transaction id, keeping first-appearance order
  std::vector<std::vector<std::size_t>> members;
  std::unordered_map<std::string, std::size_t> group_of;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto [it, inserted] = group_of.emplace(rows[i].id, members.size());
    if (inserted) members.emplace_back();
    members[it->second].push_back(i);
  }

  const std::size_t A = schema.asv.size();
  std::vector<detail::IdGroup> groups;
  groups.reserve(members.size());
  for (const auto& idx : members) {
    detail::IdGroup g;
    g.id = rows[idx[0]].id;
    g.line = rows[idx[0]].line;

    std::vector<std::pair<int, std::size_t>> coded;  // (code, row index)
    int chosen_count = 0;
    for (std::size_t i : idx) {
      coded.emplace_back(code_of.at(rows[i].alternative), i);
      if (rows[i].resp == 1) {
        g.chosen_code = coded.back().first;
        ++chosen_count;
      }
    }
    if (chosen_count != 1)
      throw DataError("id '" + g.id + "' has " + std::to_string(chosen_count) +
                      " chosen alternatives; expected exactly one");
    std::sort(coded.begin(), coded.end());

    g.codes.reserve(coded.size());
    g.asv.resize(coded.size() * A);
    for (std::size_t pos = 0; pos < coded.size(); ++pos) {
      g.codes.push_back(coded[pos].first);
      const LongRow& r = rows[coded[pos].second];
      for (std::size_t a = 0; a < A; ++a) g.asv[pos * A + a] = r.asv[a];
    }
    groups.push_back(std::move(g));
  }

  return detail::assemble_dataset(std::move(groups), std::move(catalog), schema.asv,
                                  schema.idvar, schema.resp, schema.alts, opts);
}

inline TransactionDataset reshape(const std::vector<WideRow>& rows, const WideSchema& schema,
                                  const ReshapeOptions& opts = {}) {
  // wide input arrives pre-coded; the codes must cover 1..J without gaps
  std::vector<bool> present;
  for (const auto& r : rows)
    for (int c : r.set_codes) {
      if (static_cast<std::size_t>(c) > present.size()) present.resize(c, false);
      present[static_cast<std::size_t>(c) - 1] = true;
    }
  for (std::size_t i = 0; i < present.size(); ++i)
    if (!present[i])
      throw DataError("alternative codes must cover 1.." + std::to_string(present.size()) +
                      "; code " + std::to_string(i + 1) + " never appears");

  std::unordered_map<int, std::string> label_of;
  for (const auto& r : rows) label_of.emplace(r.chosen_code, r.chosen_label);

  AlternativeCatalog catalog;
  for (std::size_t c = 1; c <= present.size(); ++c) {
    auto it = label_of.find(static_cast<int>(c));
    // a never-chosen alternative has no label in the file; synthesize one
    const std::string label =
        it != label_of.end() ? it->second : "Alternative " + std::to_string(c);
    catalog.entries.push_back({static_cast<int>(c), label});
  }

  std::vector<detail::IdGroup> groups;
  groups.reserve(rows.size());
  for (const auto& r : rows) {
    detail::IdGroup g;
    g.id = r.id;
    g.line = r.line;
    g.codes = r.set_codes;
    g.chosen_code = r.chosen_code;
    g.asv = r.asv;
    groups.push_back(std::move(g));
  }

  return detail::assemble_dataset(std::move(groups), std::move(catalog), schema.asv,
                                  schema.idvar, schema.resp, schema.alts, opts);
}

}  // namespace rde
