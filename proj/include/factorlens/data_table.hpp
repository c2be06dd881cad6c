#pragma once

// Entity x attribute table with active/supplementary role tags, CSV
// ingestion/export, and profile/mass computation.
//
// Active cells drive the analysis: they must be nonnegative with positive
// row and column margins.  Supplementary cells ride along for projection
// and may be negative or missing (missing = NaN).

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace factorlens {

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Role { Active, Supplementary };

// Compensated (Kahan) summation; validation sums go through this.
class KahanSum {
 public:
  void add(double v) {
    const double y = v - c_;
    const double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double value() const { return s_; }

 private:
  double s_ = 0.0;
  double c_ = 0.0;
};

template <typename Range>
double kahan_sum(const Range& r) {
  KahanSum k;
  for (double v : r) k.add(v);
  return k.value();
}

/// A row or column divided by its total, plus that total's share of the
/// grand total (the point's mass).
struct Profile {
  std::vector<double> weights;  // nonnegative, sums to 1
  double parent_mass = 0.0;     // row/column total over grand total
};

struct DataTable {
  std::vector<std::pair<std::string, std::string>> entities;  // short, full
  std::vector<std::string> attributes;
  Eigen::MatrixXd values;  // entities x attributes; NaN marks missing
  std::vector<Role> attribute_roles;
  std::vector<Role> entity_roles;
  std::vector<std::string> warnings;  // recorded during load/cleaning

  std::size_t n_entities() const { return entities.size(); }
  std::size_t n_attributes() const { return attributes.size(); }

  std::vector<std::size_t> active_rows() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < entity_roles.size(); ++i)
      if (entity_roles[i] == Role::Active) out.push_back(i);
    return out;
  }

  std::vector<std::size_t> active_cols() const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < attribute_roles.size(); ++j)
      if (attribute_roles[j] == Role::Active) out.push_back(j);
    return out;
  }

  double active_row_sum(std::size_t i) const {
    KahanSum k;
    for (std::size_t j : active_cols()) k.add(values(i, j));
    return k.value();
  }

  double active_col_sum(std::size_t j) const {
    KahanSum k;
    for (std::size_t i : active_rows()) k.add(values(i, j));
    return k.value();
  }

  // Grand total over active cells only; supplementary cells never
  // contribute to masses or the metric.
  double grand_total() const {
    KahanSum k;
    for (std::size_t i : active_rows())
      for (std::size_t j : active_cols()) k.add(values(i, j));
    return k.value();
  }

  std::ptrdiff_t find_entity(std::string_view short_label) const {
    for (std::size_t i = 0; i < entities.size(); ++i)
      if (entities[i].first == short_label)
        return static_cast<std::ptrdiff_t>(i);
    return -1;
  }

  std::ptrdiff_t find_attribute(std::string_view name) const {
    for (std::size_t j = 0; j < attributes.size(); ++j)
      if (attributes[j] == name) return static_cast<std::ptrdiff_t>(j);
    return -1;
  }
};

namespace detail {

inline bool is_missing(double v) { return std::isnan(v); }

inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, bool& ok) {
  // to_chars/from_chars keep the round-trip exact
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto res = std::from_chars(begin, end, v);
  ok = (res.ec == std::errc{} && res.ptr == end);
  return v;
}

// One logical CSV record; handles quoted fields and CRLF endings.
inline bool read_csv_record(std::istream& in, std::vector<std::string>& out) {
  out.clear();
  std::string field;
  bool in_quotes = false;
  bool any = false;
  int ch;
  while ((ch = in.get()) != EOF) {
    any = true;
    const char c = static_cast<char>(ch);
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          field.push_back('"');
          in.get();
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      break;
    } else if (c == '\r') {
      // swallow; newline (if any) ends the record
    } else {
      field.push_back(c);
    }
  }
  if (in_quotes) throw ValidationError("malformed CSV: unterminated quote");
  if (!any) return false;
  out.push_back(std::move(field));
  return true;
}

}  // namespace detail

struct CsvOptions {
  std::vector<std::string> active_columns;
  std::vector<std::string> supplementary_columns;
  bool has_full_names = false;  // second CSV column carries the full name
};

inline void validate(const DataTable& t);

/// Load and validate a table.  Rows with missing or all-zero active values
/// are dropped with a recorded warning; missing supplementary values stay
/// as NaN and block that column's projection.
inline DataTable load_csv_stream(std::istream& in, const CsvOptions& opt) {
  std::vector<std::string> header;
  if (!detail::read_csv_record(in, header) || header.size() < 2)
    throw ValidationError("malformed CSV: missing header row");
  if (header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0].erase(0, 3);

  const std::size_t data_start = opt.has_full_names ? 2 : 1;
  if (header.size() <= data_start)
    throw ValidationError("malformed CSV: no attribute columns");

  std::unordered_map<std::string, std::size_t> col_of;
  for (std::size_t j = data_start; j < header.size(); ++j)
    col_of.emplace(header[j], j);

  std::vector<std::string> names;
  std::vector<Role> roles;
  std::vector<std::size_t> source_col;
  auto add_role = [&](const std::vector<std::string>& list, Role role) {
    for (const auto& name : list) {
      auto it = col_of.find(name);
      if (it == col_of.end())
        throw ValidationError("role assignment names unknown column '" + name +
                              "'");
      names.push_back(name);
      roles.push_back(role);
      source_col.push_back(it->second);
    }
  };
  add_role(opt.active_columns, Role::Active);
  add_role(opt.supplementary_columns, Role::Supplementary);
  {
    std::unordered_set<std::string> seen;
    for (const auto& n : names)
      if (!seen.insert(n).second)
        throw ValidationError("column '" + n + "' assigned more than one role");
  }

  DataTable t;
  t.attributes = names;
  t.attribute_roles = roles;

  std::vector<std::vector<double>> rows;
  std::vector<std::string> record;
  std::unordered_set<std::string> labels_seen;
  std::size_t lineno = 1;
  while (detail::read_csv_record(in, record)) {
    ++lineno;
    if (record.size() == 1 && record[0].empty()) continue;  // blank line
    if (record.size() != header.size())
      throw ValidationError("malformed CSV: line " + std::to_string(lineno) +
                            " has " + std::to_string(record.size()) +
                            " fields, expected " +
                            std::to_string(header.size()));
    const std::string& short_label = record[0];
    if (!labels_seen.insert(short_label).second)
      throw ValidationError("duplicate entity label '" + short_label + "'");
    std::vector<double> vals(names.size());
    bool missing_active = false;
    for (std::size_t k = 0; k < names.size(); ++k) {
      const std::string& cell = record[source_col[k]];
      if (cell.empty() || cell == "NA") {
        vals[k] = std::numeric_limits<double>::quiet_NaN();
        if (roles[k] == Role::Active) missing_active = true;
        continue;
      }
      bool ok = false;
      const double v = detail::parse_double(cell, ok);
      if (!ok || !std::isfinite(v))
        throw ValidationError("malformed CSV: non-numeric cell '" + cell +
                              "' at line " + std::to_string(lineno));
      if (roles[k] == Role::Active && v < 0.0)
        throw ValidationError("negative active value " +
                              detail::format_double(v) + " in column '" +
                              names[k] + "' for entity '" + short_label + "'");
      vals[k] = v;
    }
    if (missing_active) {
      t.warnings.push_back("dropped entity '" + short_label +
                           "': missing active value");
      continue;
    }
    KahanSum row_sum;
    for (std::size_t k = 0; k < names.size(); ++k)
      if (roles[k] == Role::Active) row_sum.add(vals[k]);
    if (!(row_sum.value() > 0.0)) {
      t.warnings.push_back("dropped entity '" + short_label +
                           "': zero active row sum");
      continue;
    }
    t.entities.emplace_back(short_label,
                            opt.has_full_names ? record[1] : std::string{});
    rows.push_back(std::move(vals));
  }

  t.values.resize(static_cast<Eigen::Index>(rows.size()),
                  static_cast<Eigen::Index>(names.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 0; k < names.size(); ++k)
      t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          rows[i][k];
  t.entity_roles.assign(rows.size(), Role::Active);

  validate(t);
  return t;
}

inline DataTable load_csv(const std::string& path, const CsvOptions& opt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  return load_csv_stream(in, opt);
}

inline void validate(const DataTable& t) {
  const auto rows = t.active_rows();
  const auto cols = t.active_cols();
  if (rows.size() < 2)
    throw ValidationError("need at least 2 active rows, have " +
                          std::to_string(rows.size()));
  if (cols.size() < 2)
    throw ValidationError("need at least 2 active columns, have " +
                          std::to_string(cols.size()));
  if (t.entity_roles.size() != t.n_entities() ||
      t.attribute_roles.size() != t.n_attributes() ||
      t.values.rows() != static_cast<Eigen::Index>(t.n_entities()) ||
      t.values.cols() != static_cast<Eigen::Index>(t.n_attributes()))
    throw ValidationError("inconsistent table dimensions");
  {
    std::unordered_set<std::string> seen;
    for (const auto& [short_label, full] : t.entities)
      if (!seen.insert(short_label).second)
        throw ValidationError("duplicate entity label '" + short_label + "'");
  }
  for (std::size_t i : rows) {
    for (std::size_t j : cols) {
      const double v = t.values(i, j);
      if (detail::is_missing(v))
        throw ValidationError("missing active value for entity '" +
                              t.entities[i].first + "'");
      if (!std::isfinite(v))
        throw ValidationError("non-finite active value for entity '" +
                              t.entities[i].first + "'");
      if (v < 0.0)
        throw ValidationError("negative active value for entity '" +
                              t.entities[i].first + "'");
    }
    if (!(t.active_row_sum(i) > 0.0))
      throw ValidationError("entity '" + t.entities[i].first +
                            "' has zero active row sum");
  }
  for (std::size_t j : cols)
    if (!(t.active_col_sum(j) > 0.0))
      throw ValidationError("attribute '" + t.attributes[j] +
                            "' has zero active column sum");
}

/// Row profile over active columns.  The entity must be active.
inline Profile row_profile(const DataTable& t, std::size_t i) {
  if (i >= t.n_entities()) throw ValidationError("entity index out of range");
  if (t.entity_roles[i] != Role::Active)
    throw ValidationError("entity '" + t.entities[i].first + "' is not active");
  const double rs = t.active_row_sum(i);
  if (!(rs > 0.0))
    throw ValidationError("entity '" + t.entities[i].first +
                          "' has zero active row sum");
  Profile p;
  const auto cols = t.active_cols();
  p.weights.reserve(cols.size());
  for (std::size_t j : cols) p.weights.push_back(t.values(i, j) / rs);
  p.parent_mass = rs / t.grand_total();
  return p;
}

/// Column profile over active rows; dual of row_profile.
inline Profile column_profile(const DataTable& t, std::size_t j) {
  if (j >= t.n_attributes())
    throw ValidationError("attribute index out of range");
  const auto rows = t.active_rows();
  KahanSum cs_k;
  for (std::size_t i : rows) {
    const double v = t.values(i, j);
    if (detail::is_missing(v))
      throw ValidationError("attribute '" + t.attributes[j] +
                            "' has missing values");
    cs_k.add(v);
  }
  const double cs = cs_k.value();
  if (!(cs > 0.0))
    throw ValidationError("attribute '" + t.attributes[j] +
                          "' has nonpositive column total");
  Profile p;
  p.weights.reserve(rows.size());
  for (std::size_t i : rows) p.weights.push_back(t.values(i, j) / cs);
  p.parent_mass = cs / t.grand_total();
  return p;
}

inline std::string save_csv_string(const DataTable& t, bool full_names) {
  std::ostringstream out;
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += "\"\"";
      else q.push_back(c);
    }
    q += "\"";
    return q;
  };
  out << "entity";
  if (full_names) out << ",name";
  for (const auto& a : t.attributes) out << ',' << quote(a);
  out << '\n';
  for (std::size_t i = 0; i < t.n_entities(); ++i) {
    out << quote(t.entities[i].first);
    if (full_names) out << ',' << quote(t.entities[i].second);
    for (std::size_t j = 0; j < t.n_attributes(); ++j) {
      const double v = t.values(i, j);
      out << ',';
      if (!detail::is_missing(v)) out << detail::format_double(v);
    }
    out << '\n';
  }
  return out.str();
}

inline void save_csv(const DataTable& t, const std::string& path,
                     bool full_names = false) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << save_csv_string(t, full_names);
}

}  // namespace factorlens
