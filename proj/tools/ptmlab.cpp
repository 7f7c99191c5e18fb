// ptmlab: command-line front end for the paired tent map experiments.
#include "ptm/experiments.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Random paired tent map cocycles: Ulam matrices, Lyapunov spectra, quarantine cone checks"};
  app.set_help_flag("-h,--help", "Print help");

  std::string command;
  std::string config_path, eps, driver, backend, out;
  std::size_t bins = 0, steps = 0, threads = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> extra;

  app.add_option("command", command, "ulam | lyapunov | sweep | cone-check | mc-compare | oseledets")
      ->required()
      ->check(CLI::IsMember({"ulam", "lyapunov", "sweep", "cone-check", "mc-compare", "oseledets"}));
  auto* o_config = app.add_option("--config", config_path, "Flat key = value config file");
  auto* o_eps = app.add_option("--eps", eps, "Comma-separated eps list (decimal or p/q)");
  auto* o_driver = app.add_option("--driver", driver, "Driver spec, e.g. iid_uniform:a=[0,1];b=[0,1]");
  auto* o_bins = app.add_option("--bins", bins, "Ulam bin count (0 = recommended)");
  auto* o_steps = app.add_option("--steps", steps, "Cocycle length");
  auto* o_seed = app.add_option("--seed", seed, "Driver seed");
  auto* o_backend = app.add_option("--backend", backend, "ulam or exact")->check(CLI::IsMember({"ulam", "exact"}));
  auto* o_out = app.add_option("--out", out, "Output path (default stdout)");
  auto* o_threads = app.add_option("--threads", threads, "Worker threads for eps lists");
  app.add_option("--set", extra, "Any other config key, as key=value (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return ptm::exit_config;
  }

  ptm::ExperimentConfig cfg;
  try {
    if (o_config->count()) cfg = ptm::ExperimentConfig::load(config_path);
    cfg.command = command;
    for (const auto& kv : extra) {
      auto eq = kv.find('=');
      if (eq == std::string::npos) throw ptm::ConfigError("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    // Explicit flags win over the file and over --set.
    if (o_eps->count()) cfg.set("eps", eps);
    if (o_driver->count()) cfg.driver_text = driver;
    if (o_bins->count()) cfg.bins = bins;
    if (o_steps->count()) cfg.steps = steps;
    if (o_seed->count()) cfg.seed = seed;
    if (o_backend->count()) cfg.backend = backend;
    if (o_out->count()) cfg.out = out;
    if (o_threads->count()) cfg.threads = threads;
  } catch (const ptm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return ptm::exit_config;
  }
  return ptm::run_command(cfg, std::cout, std::cerr);
}
