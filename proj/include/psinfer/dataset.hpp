#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstddef>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "psinfer/errors.hpp"
#include "psinfer/math.hpp"

namespace psinfer {

using Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Immutable cohort data: binary outcome y, binary treatment z, and an n x p
/// covariate matrix. Covariates are continuous or 0/1 numerics; categorical
/// expansion is the caller's job.
struct Dataset {
  Vector y;
  Vector z;
  Matrix x;
  std::vector<std::string> covariate_names;

  Index n() const { return y.size(); }
  Index p() const { return x.cols(); }

  Index treated_count() const {
    Index c = 0;
    for (Index i = 0; i < n(); ++i) c += (z[i] == 1.0);
    return c;
  }
  Index control_count() const { return n() - treated_count(); }

  Index covariate_index(const std::string& name) const {
    for (std::size_t j = 0; j < covariate_names.size(); ++j) {
      if (covariate_names[j] == name) return static_cast<Index>(j);
    }
    throw UnknownColumn(name);
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

inline double parse_cell(const std::string& field, std::size_t row, std::size_t col) {
  std::string t = field;
  // tolerate trailing \r from CRLF files
  while (!t.empty() && (t.back() == '\r' || t.back() == ' ' || t.back() == '\t')) t.pop_back();
  std::size_t lead = 0;
  while (lead < t.size() && (t[lead] == ' ' || t[lead] == '\t')) ++lead;
  t = t.substr(lead);
  if (t.empty()) throw UnparseableCell(row, col, "empty cell");
  double value = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), value);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size()) {
    throw UnparseableCell(row, col, "'" + field + "'");
  }
  return value;
}

inline void require_distinct(const std::vector<std::string>& names) {
  std::set<std::string> seen;
  for (const auto& name : names) {
    if (!seen.insert(name).second) {
      throw InvalidArgument("duplicate covariate name: " + name);
    }
  }
}

}  // namespace detail

/// Loads a strict-dialect CSV: comma separated, mandatory header, '.' decimal
/// point, no quoting. Outcome and treatment cells must parse to exactly 0 or 1;
/// any other value, and any missing cell, is a hard error.
inline Dataset load_csv(const std::string& path, const std::string& outcome,
                        const std::string& treatment, const std::vector<std::string>& covariates) {
  detail::require_distinct(covariates);
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path);

  std::string header;
  if (!std::getline(in, header)) throw EmptyDataset("no header row in " + path);
  auto header_fields = detail::split_csv_line(header);
  for (auto& h : header_fields) {
    while (!h.empty() && (h.back() == '\r' || h.back() == ' ')) h.pop_back();
  }
  auto column_of = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header_fields.begin(), header_fields.end(), name);
    if (it == header_fields.end()) throw MissingColumn(name);
    return static_cast<std::size_t>(it - header_fields.begin());
  };

  const std::size_t y_col = column_of(outcome);
  const std::size_t z_col = column_of(treatment);
  std::vector<std::size_t> x_cols;
  x_cols.reserve(covariates.size());
  for (const auto& name : covariates) x_cols.push_back(column_of(name));

  std::vector<double> ys, zs;
  std::vector<std::vector<double>> xs(covariates.size());
  std::string line;
  std::size_t row = 1;  // 1-based data row counter
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != header_fields.size()) {
      throw UnparseableCell(row, fields.size() + 1, "wrong field count");
    }
    const double yv = detail::parse_cell(fields[y_col], row, y_col + 1);
    if (yv != 0.0 && yv != 1.0) {
      throw NonBinaryOutcome("outcome value '" + fields[y_col] + "' at row " +
                             std::to_string(row));
    }
    const double zv = detail::parse_cell(fields[z_col], row, z_col + 1);
    if (zv != 0.0 && zv != 1.0) {
      throw NonBinaryTreatment("treatment value '" + fields[z_col] + "' at row " +
                               std::to_string(row));
    }
    ys.push_back(yv);
    zs.push_back(zv);
    for (std::size_t j = 0; j < x_cols.size(); ++j) {
      xs[j].push_back(detail::parse_cell(fields[x_cols[j]], row, x_cols[j] + 1));
    }
    ++row;
  }
  if (ys.empty()) throw EmptyDataset("no data rows in " + path);

  Dataset d;
  const auto n = static_cast<Index>(ys.size());
  d.y = Eigen::Map<Vector>(ys.data(), n);
  d.z = Eigen::Map<Vector>(zs.data(), n);
  d.x.resize(n, static_cast<Index>(covariates.size()));
  for (std::size_t j = 0; j < xs.size(); ++j) {
    d.x.col(static_cast<Index>(j)) = Eigen::Map<Vector>(xs[j].data(), n);
  }
  d.covariate_names = covariates;
  return d;
}

/// Writes the dataset in the same dialect load_csv reads, with columns named
/// y, z, then the covariates. Values are shortest-round-trip decimals, so a
/// load of the written file reproduces the dataset bitwise.
inline void write_csv(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open file for writing: " + path);
  out << "y,z";
  for (const auto& name : d.covariate_names) out << ',' << name;
  out << '\n';
  for (Index i = 0; i < d.n(); ++i) {
    out << format_double(d.y[i]) << ',' << format_double(d.z[i]);
    for (Index j = 0; j < d.p(); ++j) out << ',' << format_double(d.x(i, j));
    out << '\n';
  }
}

/// New dataset with the named covariate columns, in the order given.
inline Dataset select_covariates(const Dataset& d, const std::vector<std::string>& names) {
  detail::require_distinct(names);
  Dataset out;
  out.y = d.y;
  out.z = d.z;
  out.x.resize(d.n(), static_cast<Index>(names.size()));
  for (std::size_t j = 0; j < names.size(); ++j) {
    out.x.col(static_cast<Index>(j)) = d.x.col(d.covariate_index(names[j]));
  }
  out.covariate_names = names;
  return out;
}

/// New dataset holding the given rows (repeats allowed), in order.
inline Dataset select_rows(const Dataset& d, const std::vector<Index>& rows) {
  Dataset out;
  const auto m = static_cast<Index>(rows.size());
  out.y.resize(m);
  out.z.resize(m);
  out.x.resize(m, d.p());
  for (Index i = 0; i < m; ++i) {
    const Index r = rows[static_cast<std::size_t>(i)];
    out.y[i] = d.y[r];
    out.z[i] = d.z[r];
    out.x.row(i) = d.x.row(r);
  }
  out.covariate_names = d.covariate_names;
  return out;
}

/// Design matrix [1 | X] over all covariates.
inline Matrix design_matrix(const Dataset& d) {
  Matrix dm(d.n(), d.p() + 1);
  dm.col(0).setOnes();
  if (d.p() > 0) dm.rightCols(d.p()) = d.x;
  return dm;
}

/// Design matrix [1 | X_subset] for the named covariates.
inline Matrix design_matrix(const Dataset& d, const std::vector<std::string>& covariates) {
  detail::require_distinct(covariates);
  Matrix dm(d.n(), static_cast<Index>(covariates.size()) + 1);
  dm.col(0).setOnes();
  for (std::size_t j = 0; j < covariates.size(); ++j) {
    dm.col(static_cast<Index>(j) + 1) = d.x.col(d.covariate_index(covariates[j]));
  }
  return dm;
}

/// Partitions rows by the distinct values of one covariate column (at most 10
/// levels). Each sub-dataset keeps every covariate except the split column.
/// Levels are returned in ascending value order.
inline std::vector<std::pair<std::string, Dataset>> subgroup_split(const Dataset& d,
                                                                   const std::string& column) {
  const Index split_col = d.covariate_index(column);
  std::map<double, std::vector<Index>> levels;
  for (Index i = 0; i < d.n(); ++i) {
    levels[d.x(i, split_col)].push_back(i);
    if (levels.size() > 10) throw TooManyLevels("column " + column + " has more than 10 levels");
  }

  std::vector<std::string> kept_names;
  std::vector<Index> kept_cols;
  for (Index j = 0; j < d.p(); ++j) {
    if (j == split_col) continue;
    kept_names.push_back(d.covariate_names[static_cast<std::size_t>(j)]);
    kept_cols.push_back(j);
  }

  std::vector<std::pair<std::string, Dataset>> out;
  out.reserve(levels.size());
  for (const auto& [value, rows] : levels) {
    Dataset sub;
    const auto m = static_cast<Index>(rows.size());
    sub.y.resize(m);
    sub.z.resize(m);
    sub.x.resize(m, static_cast<Index>(kept_cols.size()));
    for (Index i = 0; i < m; ++i) {
      sub.y[i] = d.y[rows[static_cast<std::size_t>(i)]];
      sub.z[i] = d.z[rows[static_cast<std::size_t>(i)]];
      for (std::size_t j = 0; j < kept_cols.size(); ++j) {
        sub.x(i, static_cast<Index>(j)) = d.x(rows[static_cast<std::size_t>(i)], kept_cols[j]);
      }
    }
    sub.covariate_names = kept_names;
    out.emplace_back(column + "=" + format_double(value), std::move(sub));
  }
  return out;
}

}  // namespace psinfer
