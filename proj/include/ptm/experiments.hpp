#ifndef PTM_EXPERIMENTS_HPP
#define PTM_EXPERIMENTS_HPP

#include "ptm/driving.hpp"
#include "ptm/lyapunov.hpp"
#include "ptm/quarantine.hpp"
#include "ptm/ulam.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ptm {

enum ExitCode : int {
  exit_ok = 0,
  exit_config = 1,
  exit_anomaly = 2,
  exit_cone_violation = 3,
};

// Resolved parameters for one CLI invocation.
//
// File format: one "key = value" per line, '#' starts a comment. Keys:
//   command, eps (comma list, decimal or p/q), driver, seed, backend (ulam|exact),
//   bins (0 picks recommended_bins), steps, reortho, coarsen_tol, out, threads,
//   rational (ulam), lambda3, qr (number of QR vectors), samples, zero_mass,
//   sampler (admissible|unrestricted), depth.
struct ExperimentConfig {
  std::string command;
  std::vector<std::string> eps_text{"0.01"};
  std::string driver_text = "constant:a=1;b=1";
  std::uint64_t seed = 1;
  std::string backend = "ulam";
  std::size_t bins = 0;
  std::size_t steps = 10000;
  std::size_t reortho = 32;
  double coarsen_tol = 1e-14;
  std::string out;  // empty writes to the given stream
  std::size_t threads = 1;
  bool rational = false;
  bool lambda3 = true;
  std::size_t qr = 3;
  std::size_t samples = 1000;
  bool zero_mass = false;
  std::string sampler = "admissible";
  std::size_t depth = 200;

  // Throws ConfigError on unknown keys or malformed values.
  void set(std::string_view key, std::string_view value);
  static ExperimentConfig parse(std::string_view text);
  static ExperimentConfig load(const std::string& path);

  // Throws ConfigError; checks every field a command will read.
  void validate() const;

  std::vector<Rational> eps_exact() const;
  std::vector<double> eps_values() const;  // ascending order
  DriverSpec driver() const;
  Backend backend_for(double eps) const;
  CocycleRun run_for(double eps) const;

  // Everything that affects results; out and threads are left out.
  nlohmann::json to_json() const;
  std::uint64_t hash() const;  // FNV-1a 64 over to_json().dump()
};

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t x);

// Fixed 17-significant-digit formatting for CSV and headers.
std::string format_double(double x);

struct UlamCommandResult {
  std::size_t n = 0;
  std::size_t nonzeros = 0;
  RowSumReport rows;
  bool rational = false;
};
UlamCommandResult cmd_ulam(const ExperimentConfig& cfg, std::ostream& out);

// Returns the exit code; writes {"command", "config", "config_hash", "results": [...]}.
int cmd_lyapunov(const ExperimentConfig& cfg, std::ostream& out);

struct SweepRow {
  double eps = 0.0;
  double lambda2 = 0.0;
  double err = 0.0;
  double mc_lambda2 = 0.0;
  double predicted = 0.0;
  double r = 0.0;  // |lambda2 + eps E[a+b]| / (eps^2 |ln eps|), 0 at eps = 0
  bool anomaly = false;
};

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_through_origin = 0.0;
};
LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y);

struct SweepResult {
  std::vector<SweepRow> rows;  // ascending eps
  LineFit fit;
  double mean_ab = 0.0;
  double r_ratio = 0.0;  // r(eps_min) / r(eps_max) over eps > 0
};
// Points run on cfg.threads workers; rows come back in eps order.
SweepResult run_sweep(const ExperimentConfig& cfg);
void write_sweep_csv(std::ostream& out, const ExperimentConfig& cfg, const SweepResult& res);
int cmd_sweep(const ExperimentConfig& cfg, std::ostream& out);

// exit_cone_violation when a trial in the asserted regime fails; violations above
// the threshold are exploratory and leave the exit code alone.
int cone_exit_code(const std::vector<InvarianceReport>& reports);
int cmd_cone_check(const ExperimentConfig& cfg, std::ostream& out);

// Idealized versus exact-overlap two-state exponents on the same orbit.
nlohmann::json mc_compare(const ExperimentConfig& cfg);
int cmd_mc_compare(const ExperimentConfig& cfg, std::ostream& out);

OseledetsResult cmd_oseledets(const ExperimentConfig& cfg, std::ostream& out);

// Dispatches on cfg.command, maps exceptions to exit codes, writes to cfg.out
// (plus a timestamped sidecar "<out>.log") or to `out`.
int run_command(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace ptm

#endif
