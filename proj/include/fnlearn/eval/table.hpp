#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "fnlearn/errors.hpp"
#include "fnlearn/eval/metrics.hpp"

namespace fnlearn::eval {

/// Models x budgets grid of aggregated measurements.
struct ResultTable {
  struct Row {
    std::string model;
    std::vector<std::vector<double>> measurements;  // per budget
  };

  std::string name;     // file stem, e.g. "classify_accuracy"
  std::string caption;  // one-line description for the text table
  int precision = 2;
  std::vector<int> budgets;
  std::vector<Row> rows;

  Row& row(const std::string& model) {
    for (auto& r : rows)
      if (r.model == model) return r;
    rows.push_back({model, std::vector<std::vector<double>>(budgets.size())});
    return rows.back();
  }

  const Row* find(const std::string& model) const {
    for (const auto& r : rows)
      if (r.model == model) return &r;
    return nullptr;
  }

  void record(const std::string& model, std::size_t budget_index, double value) {
    row(model).measurements.at(budget_index).push_back(value);
  }

  Aggregate cell(const std::string& model, std::size_t budget_index) const {
    const Row* r = find(model);
    if (!r) throw Error("table " + name + " has no row '" + model + "'");
    return aggregate(r->measurements.at(budget_index));
  }
};

inline std::string format_fixed(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

/// `model,budget,mean,ci95`, one line per cell.
inline void write_csv(std::ostream& os, const ResultTable& t) {
  os << "model,budget,mean,ci95\n";
  char buf[96];
  for (const auto& r : t.rows)
    for (std::size_t b = 0; b < t.budgets.size(); ++b) {
      const auto a = aggregate(r.measurements[b]);
      std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g", t.budgets[b], a.mean, a.ci95);
      os << r.model << ',' << buf << '\n';
    }
}

/// Fixed-width text table with `mean± ci` cells and the budgets as columns.
inline std::string format_table(const ResultTable& t) {
  std::size_t name_w = 5;
  for (const auto& r : t.rows) name_w = std::max(name_w, r.model.size());
  std::ostringstream os;
  if (!t.caption.empty()) os << t.caption << '\n';
  os << std::string(name_w, ' ');
  for (int b : t.budgets) os << "  " << std::setw(16) << b;
  os << '\n';
  for (const auto& r : t.rows) {
    os << std::left << std::setw(static_cast<int>(name_w)) << r.model << std::right;
    for (std::size_t b = 0; b < t.budgets.size(); ++b) {
      const auto a = aggregate(r.measurements[b]);
      os << "  " << std::setw(16) << (format_fixed(a.mean, t.precision) + "± " + format_fixed(a.ci95, t.precision));
    }
    os << '\n';
  }
  return os.str();
}

inline void save_table(const std::filesystem::path& dir, const ResultTable& t) {
  {
    std::ofstream os(dir / (t.name + ".csv"), std::ios::binary);
    if (!os) throw Error("cannot write " + (dir / (t.name + ".csv")).string());
    write_csv(os, t);
  }
  std::ofstream os(dir / (t.name + ".txt"), std::ios::binary);
  if (!os) throw Error("cannot write " + (dir / (t.name + ".txt")).string());
  os << format_table(t);
}

}  // namespace fnlearn::eval
