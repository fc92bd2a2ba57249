#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "umlab/ensemble.hpp"

// Aggregate experiment output: one statistic per row, every value paired
// with its standard error and the number of samples behind it. Rendered as
// CSV (plot-ready) and JSON (machine-ready).

namespace umlab {

struct ResultRow {
  std::string experiment;
  std::string statistic;
  std::string qualifier;  // sweep axis label such as "m=3" or "c=1 n=10"
  int n = 0;
  double c = 0.0;
  std::string symmetry;
  bool normalized = true;
  std::uint64_t seed = 0;
  int trials = 0;
  double value = 0.0;
  double se = 0.0;
  std::int64_t count = 0;  // samples behind the value (trials, gaps, ...)
  std::string flag;        // "" | "partial" | "conditioned"
};

struct ResultTable {
  std::vector<ResultRow> rows;
  std::vector<std::string> warnings;
  std::string error;  // nonempty when some trials failed; rows are partial

  bool failed() const { return !error.empty(); }
};

std::string to_string(SymmetryClass s);
SymmetryClass symmetry_from_string(const std::string& s);

// Shortest round-trip decimal form, locale-independent.
std::string format_double(double v);

// Header row plus one line per statistic. Fields never contain commas.
std::string to_csv(const ResultTable& table);
void write_csv(const ResultTable& table, std::ostream& os);

// JSON object with "rows", "warnings" and "error" keys.
std::string to_json(const ResultTable& table);

}  // namespace umlab
