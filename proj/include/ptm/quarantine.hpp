#ifndef PTM_QUARANTINE_HPP
#define PTM_QUARANTINE_HPP

#include "ptm/densities.hpp"
#include "ptm/driving.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace ptm {

// Unique k with 2^k eps < 1/4 <= 2^{k+1} eps.
unsigned k_from_epsilon(const Rational& eps);
unsigned k_from_epsilon(double eps);

// Largest eps for which the invariance of the cone is asserted rather than explored.
Rational invariance_threshold();

struct ConeParams {
  Rational eps;
  unsigned k = 0;
  Rational q;  // 1 - 39 eps; C1 decays like (2q)^{-j}, C2 grows like q^{-j}
  std::vector<std::string> warnings;

  static ConeParams from_epsilon(const Rational& eps);

  Rational c1_bound(unsigned j) const;  // multiplies ||f_0||_1
  Rational c2_bound(unsigned j) const;
  Rational c3_bound() const;
  // The C3 step of the invariance argument closes iff 33/2 + 2^{1-k} q^{-k} / eps < 33 q.
  bool c3_step_closes() const;
};

// (f_0, ..., f_k); f_0 carries mass that has not leaked recently, f_j mass that leaked j steps ago.
template <class S>
struct QuarantineTuple {
  std::vector<PCDensity<S>> f;

  std::size_t size() const { return f.size(); }
  PCDensity<S> phi() const;  // f_0 + ... + f_k
};

QuarantineTuple<double> to_double(const QuarantineTuple<Rational>& t);

template <class S>
QuarantineTuple<S> zero_tuple(const PCDensity<S>& f0, unsigned k);

// (L(1_{H^c} f_0 + f_k), L(1_H f_0), L f_1, ..., L f_{k-1}); a 1-tuple just gets L.
template <class S>
QuarantineTuple<S> lambda_step(const PairedTentMap<S>& map, const QuarantineTuple<S>& t);

struct ConeReport {
  std::vector<bool> c1;  // index j-1
  std::vector<bool> c2;
  bool c3 = true;
  // bound minus value, divided by ||f_0||_1 (negative means violated)
  std::vector<double> c1_margin;
  std::vector<double> c2_margin;
  double c3_margin = 0.0;

  bool passed() const;
  double worst_c1() const;
  double worst_c2() const;
  std::string describe_failure() const;
};

template <class S>
ConeReport cone_check(const QuarantineTuple<S>& t, const ConeParams& p);

template <class S>
std::pair<S, S> phi_pm(const QuarantineTuple<S>& t);

enum class SamplerMode {
  // f_1 lives in [-eps, eps] and f_j (j >= 2) within eps (2(1+eps))^{j-1} of +-1,
  // the only places leaked mass can occupy.
  admissible,
  // f_j anywhere in [-1,1]; such tuples satisfy C1-C3 but need not stay in the cone.
  unrestricted,
};

QuarantineTuple<Rational> sample_cone_element(std::uint64_t seed, const ConeParams& p, bool zero_mass,
                                              SamplerMode mode = SamplerMode::admissible);

struct InvarianceOptions {
  bool zero_mass = false;
  SamplerMode mode = SamplerMode::admissible;
  std::size_t max_counterexamples = 3;
};

struct InvarianceReport {
  Rational eps;
  unsigned k = 0;
  std::size_t samples = 0;
  std::size_t violations = 0;
  std::size_t mass_floor_violations = 0;  // ||(Lambda t)_0||_1 < (1 - 39 eps) ||f_0||_1
  std::size_t zero_mass_breaks = 0;
  bool asserted = true;                   // eps within the proved regime
  double worst_c1 = 0.0, worst_c2 = 0.0, worst_c3 = 0.0;
  double worst_mass_ratio = 0.0;          // min ||g_0|| / ||f_0||
  double worst_phi_constant = 0.0;        // max |phi+ ratio - (1 - eps(a+b))| / (eps^2 |ln eps|)
  std::vector<std::string> warnings;
  nlohmann::json counterexamples = nlohmann::json::array();

  bool ok() const { return violations == 0 && mass_floor_violations == 0 && zero_mass_breaks == 0; }
  nlohmann::json to_json() const;
};

// Random cone elements pushed by one random fibre map each (exact arithmetic).
InvarianceReport invariance_trial(const DriverSpec& spec, const Rational& eps, std::size_t n_samples,
                                  const InvarianceOptions& opts = {});

}  // namespace ptm

#endif
