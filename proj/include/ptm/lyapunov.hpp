#ifndef PTM_LYAPUNOV_HPP
#define PTM_LYAPUNOV_HPP

#include "ptm/densities.hpp"
#include "ptm/driving.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace ptm {

struct Backend {
  enum class Kind { ulam, exact_pc };
  Kind kind = Kind::ulam;
  std::size_t n_bins = 8192;
  double coarsen_tol = 1e-14;  // relative to the sup norm of the pushed density

  static Backend ulam(std::size_t n_bins) { return {Kind::ulam, n_bins, 1e-14}; }
  static Backend exact(double coarsen_tol = 1e-14) { return {Kind::exact_pc, 0, coarsen_tol}; }
  std::string to_string() const;
};

struct CocycleRun {
  DriverSpec spec;
  double eps = 0.0;
  std::size_t n_steps = 10000;
  Backend backend;
  std::size_t reortho_period = 32;

  // Throws ConfigError on invalid settings; returns advisory warnings.
  std::vector<std::string> validate() const;
  nlohmann::json to_json() const;
};

// Smallest power of two with at least 64/eps bins, never below `floor`.
std::size_t recommended_bins(double eps, std::size_t floor = 8192);

struct Estimate {
  double value = 0.0;
  double error = 0.0;               // jackknife over 10 blocks (0 when not applicable)
  std::vector<double> block_rates;
  std::size_t renormalizations = 0;
  std::size_t steps = 0;
  bool anomaly = false;
  bool collapsed = false;           // state reached exactly zero, value is -inf
  std::string note;

  nlohmann::json to_json() const;
};

struct Lambda2Estimate : Estimate {
  double bv_rate = 0.0;  // growth rate of the BV norm of the same orbit
};

struct Lambda3Estimate : Estimate {
  double psi_star_used = 0.0;
  double deflation_health = 0.0;  // |int_{J+} g| / ||g||_BV at the last period, after deflation
  double slow_fraction = 0.0;     // same ratio just before the last deflation
  // Rate over the periods completed before an exact collapse. Float breakpoints are
  // dyadic, and at eps = 0 dyadic step functions die in finitely many steps.
  double pre_collapse_rate = 0.0;
};

// Growth of a mass-carrying density (default 1/2): log(||L^(n) f|| / ||L^(n/2) f||) / (n - n/2).
// The first half is burn-in; the norm is bounded above and below, so the rate is 0.
Estimate lambda1_estimate(const CocycleRun& run, const std::optional<PCDensity<double>>& f = std::nullopt);

// Push of sign, renormalized by its J+ integral every reortho_period steps.
Lambda2Estimate lambda2_estimate(const CocycleRun& run);

// int_{J+} L^(n)(f - int f / 2) / int_{J+} L^(n) sign.
double psi_n(const CocycleRun& run, const PCDensity<double>& f, std::size_t n);

struct PsiTrace {
  std::size_t cadence = 1;            // k for eps > 0
  std::vector<double> checkpoints;    // psi at cadence, 2 cadence, ...
  double value = 0.0;
  double ratio = 0.0;                 // mean per-cadence contraction of successive differences
  bool converged = false;
};

// Checkpoints every k steps until successive values differ by less than tol,
// within max_steps (defaults to run.n_steps).
PsiTrace psi_trace(const CocycleRun& run, const PCDensity<double>& f, double tol, std::size_t max_steps = 0);
// Throws NumericalAnomaly on non-convergence.
double psi_star(const CocycleRun& run, const PCDensity<double>& f, double tol);

// Rate of decay after removing mass and the psi-star component; the default input is a
// fixed asymmetric step function.
Lambda3Estimate lambda3_estimate(const CocycleRun& run, const std::optional<PCDensity<double>>& f = std::nullopt,
                                 std::size_t deflation_period = 8);

struct SpectrumReport {
  nlohmann::json run;
  Estimate lambda1;
  Lambda2Estimate lambda2;
  std::optional<Lambda3Estimate> lambda3;
  std::vector<double> qr_exponents;  // sorted descending
  std::vector<std::vector<double>> qr_block_rates;
  bool qr_rank_collapse = false;
  std::vector<std::string> warnings;
  double mc_lambda2 = 0.0;
  double predicted_lambda2 = 0.0;

  nlohmann::json to_json() const;
};

// QR iteration of q bin-mass vectors through the Ulam chain; ulam backend only, q <= 16.
SpectrumReport qr_spectrum(const CocycleRun& run, std::size_t q);

struct OseledetsResult {
  PCDensity<double> vector;  // normalized to int_{J+} = 1
  BVNormReport<double> norm;
  std::size_t depth = 0;
};

// L_{sigma^{-1}} ... L_{sigma^{-n}} sign along the past of the driver.
OseledetsResult oseledets_vector_2(const CocycleRun& run, std::size_t pullback_depth);

// Full spectrum as reported by the lyapunov subcommand.
SpectrumReport spectrum(const CocycleRun& run, bool with_lambda3, std::size_t qr_q);

}  // namespace ptm

#endif
