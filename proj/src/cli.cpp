#include "umlab/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "umlab/config.hpp"
#include "umlab/version.hpp"

namespace umlab {

namespace {

int default_workers() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

std::uint64_t random_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

ResultTable dispatch(const std::string& sub, const ExperimentConfig& cfg) {
  if (sub == "sample") return sample_summary(cfg);
  if (sub == "spectrum") return spectrum_summary(cfg);
  if (sub == "dos") return dos_histogram(cfg);
  if (sub == "poisson-test") return poisson_test(cfg);
  if (sub == "counting") return component_counting(cfg);
  if (sub == "truncation-flow") return truncation_flow(cfg);
  if (sub == "localization") return localization_run(cfg);
  if (sub == "delocalization") return delocalization_run(cfg);
  if (sub == "sweep") return phase_sweep(cfg);
  throw std::logic_error("unhandled subcommand " + sub);
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << bytes;
  if (!out) throw std::runtime_error("short write to " + path.string());
}

}  // namespace

int run_cli(std::vector<std::string> args) {
  CLI::App app{"simulation laboratory for the hierarchical Gaussian ensemble"};
  app.require_subcommand(1);

  std::string config_path, out_flag, symmetry_flag;
  std::uint64_t seed_flag = 0;
  int workers_flag = 1;
  ExperimentConfig f;  // flag override values land here
  bool normalized_flag = true;

  auto* opt_config =
      app.add_option("--config", config_path, "key=value file or a manifest");
  auto* opt_seed = app.add_option("--seed", seed_flag, "master seed");
  auto* opt_out = app.add_option("--out", out_flag, "output directory");
  auto* opt_workers =
      app.add_option("--workers", workers_flag, "trial worker pool size");
  auto* opt_n = app.add_option("--n", f.params.n, "hierarchy depth");
  auto* opt_c = app.add_option("--c", f.params.c, "decay exponent");
  auto* opt_symmetry = app.add_option("--symmetry", symmetry_flag,
                                      "orthogonal | unitary");
  auto* opt_normalized =
      app.add_option("--normalized", normalized_flag,
                     "divide by the spectral normalizer (true/false)");
  auto* opt_energy = app.add_option("--energy", f.energy, "reference energy");
  auto* opt_trials = app.add_option("--trials", f.trials, "number of trials");
  auto* opt_w = app.add_option("--w", f.w, "window exponent");
  auto* opt_epsilon =
      app.add_option("--epsilon", f.epsilon, "truncation exponent");
  auto* opt_l_loc = app.add_option("--l-loc", f.l_loc, "resolvent exponent");
  auto* opt_z_re = app.add_option("--z-re", f.z_re, "Re z");
  auto* opt_z_im = app.add_option("--z-im", f.z_im, "Im z");
  auto* opt_m_min = app.add_option("--m-min", f.m_min, "truncation range low");
  auto* opt_m_max = app.add_option("--m-max", f.m_max, "truncation range high");
  auto* opt_box =
      app.add_option("--box-width", f.box_width, "counting box width");
  auto* opt_window = app.add_option("--window-halfwidth", f.window_halfwidth,
                                    "rescaled window half-width (0 = auto)");
  auto* opt_sites = app.add_option("--sites-per-trial", f.sites_per_trial,
                                   "localization site draws per trial");
  auto* opt_bins = app.add_option("--bins", f.bins, "DOS histogram bins");
  auto* opt_bin_lo = app.add_option("--bin-lo", f.bin_lo, "DOS range low");
  auto* opt_bin_hi = app.add_option("--bin-hi", f.bin_hi, "DOS range high");
  auto* opt_c_list =
      app.add_option("--c-list", f.c_list, "sweep c values")->delimiter(',');
  auto* opt_n_list =
      app.add_option("--n-list", f.n_list, "sweep n values")->delimiter(',');
  auto* opt_trunc = app.add_option("--truncate-to-m", f.truncate_to_m,
                                   "run on the depth-m truncation");

  static const std::vector<std::pair<const char*, const char*>> kSubs = {
      {"sample", "draw matrices and summarize entry moments"},
      {"spectrum", "spectral range and density at the reference energy"},
      {"dos", "density-of-states histogram"},
      {"poisson-test", "local gap and counting statistics near E"},
      {"counting", "block point-process counts of the truncated matrix"},
      {"truncation-flow", "coupled truncation error versus depth"},
      {"localization", "eigenfunction mass outside shrinking balls"},
      {"delocalization", "bulk eigenvector spread and semicircle distance"},
      {"sweep", "phase summary over a (c, n) grid"},
      {"validate", "check the config and report the exponent budget"},
  };
  for (const auto& [name, desc] : kSubs)
    app.add_subcommand(name, desc)->fallthrough();

  std::reverse(args.begin(), args.end());
  try {
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  LabConfig cfg;
  try {
    if (opt_config->count()) cfg = parse_config_file(config_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }

  if (opt_n->count()) cfg.experiment.params.n = f.params.n;
  if (opt_c->count()) cfg.experiment.params.c = f.params.c;
  if (opt_symmetry->count()) {
    try {
      cfg.experiment.params.symmetry = symmetry_from_string(symmetry_flag);
    } catch (const std::invalid_argument& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return 1;
    }
  }
  if (opt_normalized->count()) cfg.experiment.params.normalized = normalized_flag;
  if (opt_energy->count()) cfg.experiment.energy = f.energy;
  if (opt_trials->count()) cfg.experiment.trials = f.trials;
  if (opt_w->count()) cfg.experiment.w = f.w;
  if (opt_epsilon->count()) cfg.experiment.epsilon = f.epsilon;
  if (opt_l_loc->count()) cfg.experiment.l_loc = f.l_loc;
  if (opt_z_re->count()) cfg.experiment.z_re = f.z_re;
  if (opt_z_im->count()) cfg.experiment.z_im = f.z_im;
  if (opt_m_min->count()) cfg.experiment.m_min = f.m_min;
  if (opt_m_max->count()) cfg.experiment.m_max = f.m_max;
  if (opt_box->count()) cfg.experiment.box_width = f.box_width;
  if (opt_window->count()) cfg.experiment.window_halfwidth = f.window_halfwidth;
  if (opt_sites->count()) cfg.experiment.sites_per_trial = f.sites_per_trial;
  if (opt_bins->count()) cfg.experiment.bins = f.bins;
  if (opt_bin_lo->count()) cfg.experiment.bin_lo = f.bin_lo;
  if (opt_bin_hi->count()) cfg.experiment.bin_hi = f.bin_hi;
  if (opt_c_list->count()) cfg.experiment.c_list = f.c_list;
  if (opt_n_list->count()) cfg.experiment.n_list = f.n_list;
  if (opt_trunc->count()) cfg.experiment.truncate_to_m = f.truncate_to_m;
  if (opt_seed->count()) {
    cfg.experiment.params.master_seed = seed_flag;
    cfg.seed_given = true;
  }
  if (opt_workers->count()) {
    cfg.experiment.workers = workers_flag;
    cfg.workers_given = true;
  }
  if (opt_out->count()) cfg.out = out_flag;

  if (!cfg.seed_given) {
    cfg.experiment.params.master_seed = random_seed();
    cfg.seed_given = true;
  }
  if (!cfg.workers_given) {
    cfg.experiment.workers = default_workers();
    cfg.workers_given = true;
  }
  if (cfg.out.empty()) {
    const char* env = std::getenv("ULTRAMETRIC_LAB_OUT");
    cfg.out = (env && *env) ? env : "./out";
  }

  const std::string sub = app.get_subcommands().front()->get_name();
  std::cout << "seed: " << cfg.experiment.params.master_seed << "\n";

  if (sub == "validate") {
    const ValidationReport report = validate(cfg);
    for (const std::string& v : report.violations)
      std::cout << "violation: " << v << "\n";
    for (const std::string& w : report.warnings)
      std::cout << "warning: " << w << "\n";
    std::cout << "2mu = " << format_double(report.two_mu) << "\n";
    std::cout << (report.ok() ? "config ok\n" : "config has violations\n");
    return 0;
  }

  ResultTable table;
  try {
    table = dispatch(sub, cfg.experiment);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    table.error = e.what();  // flush what exists, flag it, exit 2 below
  }

  try {
    namespace fs = std::filesystem;
    const fs::path outdir(cfg.out);
    fs::create_directories(outdir);
    const fs::path csv_path = outdir / (sub + ".csv");
    const fs::path json_path = outdir / (sub + ".json");
    const fs::path manifest_path = outdir / "manifest.json";
    write_file(csv_path, to_csv(table));
    write_file(json_path, to_json(table));

    nlohmann::ordered_json manifest;
    manifest["version"] = kVersion;
    manifest["subcommand"] = sub;
    manifest["seed"] = cfg.experiment.params.master_seed;
    nlohmann::ordered_json conf;
    for (const auto& [key, value] : config_items(cfg)) conf[key] = value;
    manifest["config"] = std::move(conf);
    manifest["outputs"] = {csv_path.string(), json_path.string()};
    write_file(manifest_path, manifest.dump(2) + "\n");

    for (const std::string& w : table.warnings)
      std::cout << "warning: " << w << "\n";
    if (table.failed()) std::cerr << "error: " << table.error << "\n";
    std::cout << "wrote " << csv_path.string() << "\n";
    std::cout << "wrote " << json_path.string() << "\n";
    std::cout << "wrote " << manifest_path.string() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "output error: " << e.what() << "\n";
    return 1;
  }

  return table.failed() ? 2 : 0;
}

}  // namespace umlab
