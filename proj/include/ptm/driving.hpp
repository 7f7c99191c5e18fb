#ifndef PTM_DRIVING_HPP
#define PTM_DRIVING_HPP

#include "ptm/interval_maps.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ptm {

enum class DriverKind { constant, iid_uniform, finite_markov, rotation };

// Ergodic base system producing the leakage controls (a_j, b_j) in [0,1].
//
// Text form (used on the command line and in config files):
//   constant:a=1;b=1
//   iid_uniform:a=[0,1];b=[0,1]
//   finite_markov:P=[[0.9,0.1],[0.2,0.8]];ab=[[1,0],[0,1]]
//   rotation:alpha=0.618034;a=[0.5,0.25,0];b=[0.5,0,0.25]
// Rotation coefficients are [c0, c1, s1, c2, s2, ...] for
// c0 + sum_m c_m cos(2 pi m t) + s_m sin(2 pi m t).
struct DriverSpec {
  DriverKind kind = DriverKind::constant;
  double a = 1.0;
  double b = 1.0;
  std::array<double, 2> a_range{0.0, 1.0};
  std::array<double, 2> b_range{0.0, 1.0};
  std::vector<std::vector<double>> transition;
  std::vector<std::pair<double, double>> states;
  double alpha = 0.0;
  std::vector<double> a_coef;
  std::vector<double> b_coef;
  std::uint64_t seed = 0;

  static DriverSpec constant_pair(double a, double b);
  static DriverSpec iid_uniform(std::array<double, 2> a_range, std::array<double, 2> b_range, std::uint64_t seed);
  static DriverSpec parse(std::string_view text, std::uint64_t seed = 0);

  // Canonical text form, without the seed.
  std::string to_string() const;
  // Throws ConfigError on non-stochastic matrices, values outside [0,1],
  // or a (or b) identically zero.
  void validate() const;
  // Two-sided extension; every kind supports it.
  bool supports_pullback() const { return true; }
};

struct DriverOrbit {
  std::vector<std::pair<double, double>> samples;

  std::size_t size() const { return samples.size(); }
};

// Samples for times 0..n-1.
DriverOrbit generate(const DriverSpec& spec, std::size_t n);
// Samples for times -1, -2, ..., -n (index 0 is time -1), consistent with generate().
DriverOrbit generate_past(const DriverSpec& spec, std::size_t n);

// Stationary expectation of a + b.
double mean_ab(const DriverSpec& spec);

std::vector<double> stationary_distribution(const std::vector<std::vector<double>>& transition);

// Fibre maps T_{eps a_j, eps b_j} along an orbit.
std::vector<PairedTentMap<double>> fibre_maps(const DriverOrbit& orbit, double eps);
std::vector<PairedTentMap<Rational>> fibre_maps(const DriverOrbit& orbit, const Rational& eps);

// Two-state coarse graining in the column-stochastic convention, acting on
// (mass on J-, mass on J+). The idealized model uses transfer probabilities
// eps*a, eps*b; the exact-overlap model uses the hole measures eps*a/(1+eps*a).
enum class TwoStateModel { idealized, exact_overlap };
using Matrix2 = std::array<std::array<double, 2>, 2>;
Matrix2 two_state_matrix(double a, double b, double eps, TwoStateModel model = TwoStateModel::idealized);

// Birkhoff average of log det of the two-state cocycle, i.e. (1/n) sum log(1 - eps(a_j+b_j)).
double mc_second_exponent(const DriverSpec& spec, double eps, std::size_t n);
double mc_second_exponent(const DriverOrbit& orbit, double eps);

struct TwoExponents {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
};

// Exponents of the explicit 2x2 product by Gram-Schmidt QR.
TwoExponents mc_cocycle_exponents_qr(const DriverSpec& spec, double eps, std::size_t n,
                                     TwoStateModel model = TwoStateModel::idealized);
TwoExponents mc_cocycle_exponents_qr(const DriverOrbit& orbit, double eps,
                                     TwoStateModel model = TwoStateModel::idealized);

}  // namespace ptm

#endif
