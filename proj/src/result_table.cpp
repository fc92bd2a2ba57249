#include "umlab/result_table.hpp"

#include <charconv>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace umlab {

std::string to_string(SymmetryClass s) {
  return s == SymmetryClass::orthogonal ? "orthogonal" : "unitary";
}

SymmetryClass symmetry_from_string(const std::string& s) {
  if (s == "orthogonal") return SymmetryClass::orthogonal;
  if (s == "unitary") return SymmetryClass::unitary;
  throw std::invalid_argument("unknown symmetry class: " + s);
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

static void append_row(std::string& out, const ResultRow& r) {
  out += r.experiment;
  out += ',';
  out += r.statistic;
  out += ',';
  out += r.qualifier;
  out += ',';
  out += std::to_string(r.n);
  out += ',';
  out += format_double(r.c);
  out += ',';
  out += r.symmetry;
  out += ',';
  out += r.normalized ? "true" : "false";
  out += ',';
  out += std::to_string(r.seed);
  out += ',';
  out += std::to_string(r.trials);
  out += ',';
  out += format_double(r.value);
  out += ',';
  out += format_double(r.se);
  out += ',';
  out += std::to_string(r.count);
  out += ',';
  out += r.flag;
  out += '\n';
}

std::string to_csv(const ResultTable& table) {
  std::string out =
      "experiment,statistic,qualifier,n,c,symmetry,normalized,seed,trials,"
      "value,se,count,flag\n";
  for (const ResultRow& r : table.rows) append_row(out, r);
  return out;
}

void write_csv(const ResultTable& table, std::ostream& os) {
  os << to_csv(table);
}

std::string to_json(const ResultTable& table) {
  nlohmann::ordered_json doc;
  doc["rows"] = nlohmann::ordered_json::array();
  for (const ResultRow& r : table.rows) {
    nlohmann::ordered_json row;
    row["experiment"] = r.experiment;
    row["statistic"] = r.statistic;
    row["qualifier"] = r.qualifier;
    row["n"] = r.n;
    row["c"] = r.c;
    row["symmetry"] = r.symmetry;
    row["normalized"] = r.normalized;
    row["seed"] = r.seed;
    row["trials"] = r.trials;
    row["value"] = r.value;
    row["se"] = r.se;
    row["count"] = r.count;
    row["flag"] = r.flag;
    doc["rows"].push_back(std::move(row));
  }
  doc["warnings"] = table.warnings;
  if (table.error.empty())
    doc["error"] = nullptr;
  else
    doc["error"] = table.error;
  return doc.dump(2) + "\n";
}

}  // namespace umlab
