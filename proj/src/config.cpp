#include "umlab/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace umlab {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  const auto res = std::from_chars(first, last, out);
  if (res.ec != std::errc{} || res.ptr != last)
    throw ConfigError("bad value for " + key + ": '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("bad value for " + key + ": '" + value +
                    "' (want true/false)");
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : value) {
    if (ch == ',') {
      parts.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  cur = trim(cur);
  if (!cur.empty()) parts.push_back(cur);
  return parts;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += format_double(v[i]);
  }
  return out;
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

LabConfig parse_manifest(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("manifest parse failure: ") + e.what());
  }
  if (!doc.contains("config") || !doc["config"].is_object())
    throw ConfigError("manifest has no config object");
  LabConfig cfg;
  for (const auto& [key, value] : doc["config"].items()) {
    if (!value.is_string())
      throw ConfigError("manifest config values must be strings (key " + key +
                        ")");
    apply_key(cfg, key, value.get<std::string>());
  }
  return cfg;
}

}  // namespace

void apply_key(LabConfig& cfg, const std::string& key,
               const std::string& value) {
  ExperimentConfig& e = cfg.experiment;
  if (key == "params.n") {
    e.params.n = parse_number<int>(key, value);
  } else if (key == "params.c") {
    e.params.c = parse_number<double>(key, value);
  } else if (key == "params.symmetry") {
    try {
      e.params.symmetry = symmetry_from_string(value);
    } catch (const std::invalid_argument& err) {
      throw ConfigError(err.what());
    }
  } else if (key == "params.normalized") {
    e.params.normalized = parse_bool(key, value);
  } else if (key == "seed") {
    e.params.master_seed = parse_number<std::uint64_t>(key, value);
    cfg.seed_given = true;
  } else if (key == "energy") {
    e.energy = parse_number<double>(key, value);
  } else if (key == "trials") {
    e.trials = parse_number<int>(key, value);
  } else if (key == "w") {
    e.w = parse_number<double>(key, value);
  } else if (key == "epsilon") {
    e.epsilon = parse_number<double>(key, value);
  } else if (key == "l_loc") {
    e.l_loc = parse_number<double>(key, value);
  } else if (key == "z.re") {
    e.z_re = parse_number<double>(key, value);
  } else if (key == "z.im") {
    e.z_im = parse_number<double>(key, value);
  } else if (key == "m.min") {
    e.m_min = parse_number<int>(key, value);
  } else if (key == "m.max") {
    e.m_max = parse_number<int>(key, value);
  } else if (key == "box_width") {
    e.box_width = parse_number<double>(key, value);
  } else if (key == "window_halfwidth") {
    e.window_halfwidth = parse_number<double>(key, value);
  } else if (key == "sites_per_trial") {
    e.sites_per_trial = parse_number<int>(key, value);
  } else if (key == "bins") {
    e.bins = parse_number<int>(key, value);
  } else if (key == "bin.lo") {
    e.bin_lo = parse_number<double>(key, value);
  } else if (key == "bin.hi") {
    e.bin_hi = parse_number<double>(key, value);
  } else if (key == "c_list") {
    e.c_list.clear();
    for (const std::string& part : split_list(value))
      e.c_list.push_back(parse_number<double>(key, part));
  } else if (key == "n_list") {
    e.n_list.clear();
    for (const std::string& part : split_list(value))
      e.n_list.push_back(parse_number<int>(key, part));
  } else if (key == "truncate_to_m") {
    e.truncate_to_m = parse_number<int>(key, value);
  } else if (key == "workers") {
    e.workers = parse_number<int>(key, value);
    cfg.workers_given = true;
  } else if (key == "out") {
    cfg.out = value;
  } else {
    throw ConfigError("unknown config key: " + key);
  }
}

LabConfig parse_config_text(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{')
    return parse_manifest(text);

  LabConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) +
                        ": expected key=value, got '" + stripped + "'");
    try {
      apply_key(cfg, trim(stripped.substr(0, eq)),
                trim(stripped.substr(eq + 1)));
    } catch (const ConfigError& err) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + err.what());
    }
  }
  return cfg;
}

LabConfig parse_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::vector<std::pair<std::string, std::string>> config_items(
    const LabConfig& cfg) {
  const ExperimentConfig& e = cfg.experiment;
  std::vector<std::pair<std::string, std::string>> items;
  items.emplace_back("params.n", std::to_string(e.params.n));
  items.emplace_back("params.c", format_double(e.params.c));
  items.emplace_back("params.symmetry", to_string(e.params.symmetry));
  items.emplace_back("params.normalized",
                     e.params.normalized ? "true" : "false");
  items.emplace_back("seed", std::to_string(e.params.master_seed));
  items.emplace_back("energy", format_double(e.energy));
  items.emplace_back("trials", std::to_string(e.trials));
  items.emplace_back("w", format_double(e.w));
  items.emplace_back("epsilon", format_double(e.epsilon));
  items.emplace_back("l_loc", format_double(e.l_loc));
  items.emplace_back("z.re", format_double(e.z_re));
  items.emplace_back("z.im", format_double(e.z_im));
  items.emplace_back("m.min", std::to_string(e.m_min));
  items.emplace_back("m.max", std::to_string(e.m_max));
  items.emplace_back("box_width", format_double(e.box_width));
  items.emplace_back("window_halfwidth", format_double(e.window_halfwidth));
  items.emplace_back("sites_per_trial", std::to_string(e.sites_per_trial));
  items.emplace_back("bins", std::to_string(e.bins));
  items.emplace_back("bin.lo", format_double(e.bin_lo));
  items.emplace_back("bin.hi", format_double(e.bin_hi));
  items.emplace_back("c_list", join_doubles(e.c_list));
  items.emplace_back("n_list", join_ints(e.n_list));
  items.emplace_back("truncate_to_m", std::to_string(e.truncate_to_m));
  items.emplace_back("workers", std::to_string(e.workers));
  items.emplace_back("out", cfg.out);
  return items;
}

ValidationReport validate(const LabConfig& cfg) {
  const ExperimentConfig& e = cfg.experiment;
  ValidationReport report;
  const auto violation = [&](const std::string& msg) {
    report.violations.push_back(msg);
  };

  const auto check_n = [&](int n, const std::string& where) {
    if (n < 0 || n > 13)
      violation(where + " must be in [0, 13], got " + std::to_string(n));
  };
  check_n(e.params.n, "params.n");
  for (int n : e.n_list) check_n(n, "n_list entry");
  if (e.trials < 1) violation("trials must be >= 1");
  if (!(e.w > 0.0 && e.w < 1.0)) violation("w must be in (0, 1)");
  if (!(e.epsilon > 0.0 && e.epsilon < 1.0))
    violation("epsilon must be in (0, 1)");
  if (!(e.l_loc > 0.0 && e.l_loc < 1.0)) violation("l_loc must be in (0, 1)");
  if (!(e.z_im > 0.0)) violation("z.im must be > 0");
  if (!(e.box_width > 0.0)) violation("box_width must be > 0");
  if (e.window_halfwidth < 0.0) violation("window_halfwidth must be >= 0");
  if (e.sites_per_trial < 1) violation("sites_per_trial must be >= 1");
  if (e.bins < 1) violation("bins must be >= 1");
  if (!(e.bin_hi > e.bin_lo)) violation("bin range must be nonempty");
  if (e.workers < 1) violation("workers must be >= 1");
  if (e.truncate_to_m > e.params.n)
    violation("truncate_to_m must be <= params.n");
  if (e.m_min >= 0 && e.m_max >= 0 && e.m_min > e.m_max)
    violation("m.min must be <= m.max");

  const double delta = e.params.c / 6.0;
  report.two_mu = (1.0 - e.epsilon) * (3.0 * (1.0 + delta) - 1.0) -
                  (3.0 * (1.0 + e.l_loc) - 1.0) - e.w;
  if (report.two_mu <= 0.0)
    report.warnings.push_back(
        "exponent budget 2mu = " + format_double(report.two_mu) +
        " is not positive: the (w, epsilon, l_loc) choice leaves the "
        "localization bound no slack at c = " + format_double(e.params.c));
  return report;
}

}  // namespace umlab
