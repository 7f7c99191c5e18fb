#include "ptm/quarantine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace ptm {

namespace {

Rational pow_rational(const Rational& base, unsigned e) {
  Rational r(1);
  for (unsigned i = 0; i < e; ++i) r *= base;
  return r;
}

Rational power_of_two(unsigned e) {
  mpz_class z(1);
  z <<= e;
  return Rational(z);
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Dyadic grid keeps denominators small enough for long exact chains.
Rational dyadic_between(std::mt19937_64& rng, const Rational& lo, const Rational& hi) {
  mpz_class num(static_cast<unsigned long>(rng() >> 34));  // 30 random bits
  Rational u(num, mpz_class(1) << 30);
  u.canonicalize();
  return Rational(lo + u * (hi - lo));
}

// Random step function with `cells` pieces on [lo, hi], zero elsewhere.
PCDensity<Rational> random_steps(std::mt19937_64& rng, const Rational& lo, const Rational& hi, unsigned cells) {
  std::vector<Rational> cuts;
  for (unsigned i = 0; i + 1 < cells; ++i) cuts.push_back(dyadic_between(rng, lo, hi));
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  std::vector<Rational> edges{lo};
  for (auto& c : cuts) {
    if (edges.back() < c && c < hi) edges.push_back(c);
  }
  edges.push_back(hi);

  PCDensity<Rational> out;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    Rational h = dyadic_between(rng, Rational(-1), Rational(1));
    out = out + PCDensity<Rational>::indicator({edges[i], edges[i + 1]}, h);
  }
  return out;
}

// Where leaked mass can sit j steps after passing a hole.
std::vector<Interval<Rational>> admissible_support(unsigned j, const Rational& eps) {
  if (j == 1) return {{Rational(-eps), eps}};
  Rational len = eps * pow_rational(Rational(2 * (1 + eps)), j - 1);
  if (len > Rational(1, 2)) len = Rational(1, 2);
  return {{Rational(-1), Rational(-1 + len)}, {Rational(1 - len), Rational(1)}};
}

PCDensity<Rational> random_component(std::mt19937_64& rng, unsigned j, const Rational& eps, SamplerMode mode) {
  if (mode == SamplerMode::unrestricted) {
    return random_steps(rng, Rational(-1), Rational(0), 1 + static_cast<unsigned>(rng() % 4)) +
           random_steps(rng, Rational(0), Rational(1), 1 + static_cast<unsigned>(rng() % 4));
  }
  PCDensity<Rational> out;
  for (const auto& piece : admissible_support(j, eps)) {
    // Split straddling pieces at 0 so every PCDensity stays valid.
    if (piece.lo < 0 && piece.hi > 0) {
      out = out + random_steps(rng, piece.lo, Rational(0), 1 + static_cast<unsigned>(rng() % 3));
      out = out + random_steps(rng, Rational(0), piece.hi, 1 + static_cast<unsigned>(rng() % 3));
    } else {
      out = out + random_steps(rng, piece.lo, piece.hi, 1 + static_cast<unsigned>(rng() % 3));
    }
  }
  return out;
}

// Same function with the half means removed, so it moves no mass between J- and J+.
PCDensity<Rational> remove_half_means(const PCDensity<Rational>& p) {
  std::vector<Rational> bp{Rational(-1), Rational(0), Rational(1)};
  std::vector<Rational> vals{p.integral_minus(), p.integral_plus()};
  return p - PCDensity<Rational>(bp, vals);
}

double ratio(const Rational& num, const Rational& den) {
  if (den == 0) return num == 0 ? 0.0 : std::numeric_limits<double>::infinity();
  return ptm::to_double(Rational(num / den));
}

}  // namespace

unsigned k_from_epsilon(const Rational& eps) {
  if (!(eps > 0)) throw DomainError("k_from_epsilon: eps must be positive");
  if (eps >= Rational(1, 4)) throw DomainError("k_from_epsilon: eps must be below 1/4");
  unsigned k = 0;
  while (power_of_two(k + 1) * eps < Rational(1, 4)) ++k;
  return k;
}

unsigned k_from_epsilon(double eps) { return k_from_epsilon(Rational(eps)); }

Rational invariance_threshold() { return Rational(1, 2000); }

ConeParams ConeParams::from_epsilon(const Rational& eps) {
  ConeParams p;
  p.eps = eps;
  p.k = k_from_epsilon(eps);
  p.q = 1 - 39 * eps;
  if (eps > invariance_threshold()) {
    p.warnings.push_back("eps above 1/2000: cone invariance is not asserted, only explored");
  }
  if (eps >= Rational(1, 33)) p.warnings.push_back("eps >= 1/33: the L1 lower bound of the cone argument fails");
  if (3 >= 4 * pow_rational(p.q, p.k)) p.warnings.push_back("3/(1-39 eps)^k >= 4");
  return p;
}

Rational ConeParams::c1_bound(unsigned j) const { return Rational(4 / pow_rational(Rational(2 * q), j)); }
Rational ConeParams::c2_bound(unsigned j) const { return Rational(3 * eps / pow_rational(q, j)); }
Rational ConeParams::c3_bound() const { return Rational(33 * eps); }

bool ConeParams::c3_step_closes() const {
  Rational two_k = power_of_two(k);
  Rational lhs = Rational(33, 2) + 2 / (two_k * pow_rational(q, k) * eps);
  return lhs < 33 * q;
}

template <class S>
PCDensity<S> QuarantineTuple<S>::phi() const {
  PCDensity<S> sum;
  for (const auto& c : f) sum = sum + c;
  return sum;
}

QuarantineTuple<double> to_double(const QuarantineTuple<Rational>& t) {
  QuarantineTuple<double> out;
  for (const auto& c : t.f) out.f.push_back(to_double(c));
  return out;
}

template <class S>
QuarantineTuple<S> zero_tuple(const PCDensity<S>& f0, unsigned k) {
  QuarantineTuple<S> t;
  t.f.assign(k + 1, PCDensity<S>());
  t.f[0] = f0;
  return t;
}

template <class S>
QuarantineTuple<S> lambda_step(const PairedTentMap<S>& map, const QuarantineTuple<S>& t) {
  if (t.f.empty()) throw DomainError("lambda_step: empty tuple");
  const std::size_t k = t.f.size() - 1;
  QuarantineTuple<S> out;
  out.f.resize(k + 1);
  if (k == 0) {
    out.f[0] = transfer_pc(map, t.f[0]);
    return out;
  }
  auto [in_hole, outside] = split_by_mask(t.f[0], hole_union(map));
  out.f[0] = transfer_pc(map, outside + t.f[k]);
  out.f[1] = transfer_pc(map, in_hole);
  for (std::size_t j = 2; j <= k; ++j) out.f[j] = transfer_pc(map, t.f[j - 1]);
  return out;
}

bool ConeReport::passed() const {
  return c3 && std::all_of(c1.begin(), c1.end(), [](bool b) { return b; }) &&
         std::all_of(c2.begin(), c2.end(), [](bool b) { return b; });
}

double ConeReport::worst_c1() const {
  return c1_margin.empty() ? std::numeric_limits<double>::infinity()
                           : *std::min_element(c1_margin.begin(), c1_margin.end());
}

double ConeReport::worst_c2() const {
  return c2_margin.empty() ? std::numeric_limits<double>::infinity()
                           : *std::min_element(c2_margin.begin(), c2_margin.end());
}

std::string ConeReport::describe_failure() const {
  std::ostringstream out;
  for (std::size_t j = 0; j < c1.size(); ++j) {
    if (!c1[j]) out << "C1 fails at j=" << j + 1 << " (margin " << c1_margin[j] << "); ";
  }
  for (std::size_t j = 0; j < c2.size(); ++j) {
    if (!c2[j]) out << "C2 fails at j=" << j + 1 << " (margin " << c2_margin[j] << "); ";
  }
  if (!c3) out << "C3 fails (margin " << c3_margin << "); ";
  return out.str();
}

template <class S>
ConeReport cone_check(const QuarantineTuple<S>& t, const ConeParams& p) {
  if (t.f.size() != p.k + 1) throw DomainError("cone_check: tuple length does not match k + 1");
  auto bound = [](const Rational& r) {
    if constexpr (ScalarTraits<S>::exact) {
      return r;
    } else {
      return ptm::to_double(r);
    }
  };
  const S l1_0 = t.f[0].l1();
  const double scale = ptm::to_double(l1_0) > 0 ? ptm::to_double(l1_0) : 1.0;
  ConeReport r;
  for (unsigned j = 1; j <= p.k; ++j) {
    S v = var0c(t.f[j]);
    S b1 = S(bound(p.c1_bound(j)) * l1_0);
    r.c1.push_back(v <= b1);
    r.c1_margin.push_back(ptm::to_double(S(b1 - v)) / scale);
    S m = t.f[j].l1();
    S b2 = S(bound(p.c2_bound(j)) * l1_0);
    r.c2.push_back(m <= b2);
    r.c2_margin.push_back(ptm::to_double(S(b2 - m)) / scale);
  }
  S v0 = var0c(t.f[0]);
  S b3 = S(bound(p.c3_bound()) * l1_0);
  r.c3 = v0 <= b3;
  r.c3_margin = ptm::to_double(S(b3 - v0)) / scale;
  return r;
}

template <class S>
std::pair<S, S> phi_pm(const QuarantineTuple<S>& t) {
  S plus(0);
  S minus(0);
  for (const auto& c : t.f) {
    plus += c.integral_plus();
    minus += c.integral_minus();
  }
  return {plus, minus};
}

QuarantineTuple<Rational> sample_cone_element(std::uint64_t seed, const ConeParams& p, bool zero_mass,
                                              SamplerMode mode) {
  std::mt19937_64 rng(seed);
  auto signed_level = [&] {
    Rational mag = dyadic_between(rng, Rational(1, 2), Rational(1));
    return (rng() & 1) ? mag : Rational(-mag);
  };
  const Rational beta = signed_level();
  const Rational alpha_free = signed_level();
  const Rational reference_l1 = zero_mass ? Rational(2 * abs(beta)) : Rational(abs(alpha_free) + abs(beta));

  PCDensity<Rational> pert = remove_half_means(random_steps(rng, Rational(-1), Rational(0), 2 + rng() % 6) +
                                               random_steps(rng, Rational(0), Rational(1), 2 + rng() % 6));
  const Rational pert_var = var0c(pert);
  const Rational u(uniform01(rng));

  std::vector<PCDensity<Rational>> shapes(p.k + 1);
  std::vector<Rational> slack(p.k + 1, Rational(0));
  for (unsigned j = 1; j <= p.k; ++j) {
    if (rng() % 5 == 0) continue;  // some components empty
    shapes[j] = random_component(rng, j, p.eps, mode);
    slack[j] = Rational(0.05 + 0.9 * uniform01(rng));
  }

  Rational shrink(1);
  for (int attempt = 0; attempt < 64; ++attempt, shrink /= 2) {
    QuarantineTuple<Rational> t;
    t.f.resize(p.k + 1);
    Rational leaked_mass(0);
    for (unsigned j = 1; j <= p.k; ++j) {
      if (slack[j] == 0) continue;
      Rational v = var0c(shapes[j]);
      Rational m = shapes[j].l1();
      if (m == 0) continue;
      Rational s = p.c2_bound(j) * reference_l1 / m;
      if (v > 0) s = std::min(s, Rational(p.c1_bound(j) * reference_l1 / v));
      t.f[j] = Rational(shrink * slack[j] * s) * shapes[j];
      leaked_mass += t.f[j].integral();
    }
    Rational alpha = zero_mass ? Rational(-beta - leaked_mass) : alpha_free;
    PCDensity<Rational> f0(std::vector<Rational>{Rational(-1), Rational(0), Rational(1)},
                           std::vector<Rational>{alpha, beta});
    if (pert_var > 0) {
      Rational scale = shrink * u * p.c3_bound() * reference_l1 / (pert_var + u * p.c3_bound() * pert.l1());
      f0 = f0 + scale * pert;
    }
    t.f[0] = std::move(f0);
    if (cone_check(t, p).passed()) return t;
  }
  throw NumericalAnomaly("sample_cone_element: could not produce a cone element");
}

nlohmann::json InvarianceReport::to_json() const {
  nlohmann::json j;
  j["eps"] = eps.get_str();
  j["eps_value"] = ptm::to_double(eps);
  j["k"] = k;
  j["samples"] = samples;
  j["violations"] = violations;
  j["mass_floor_violations"] = mass_floor_violations;
  j["zero_mass_breaks"] = zero_mass_breaks;
  j["asserted"] = asserted;
  j["worst_margin"] = {{"c1", worst_c1}, {"c2", worst_c2}, {"c3", worst_c3}};
  j["worst_mass_ratio"] = worst_mass_ratio;
  j["worst_phi_constant"] = worst_phi_constant;
  j["warnings"] = warnings;
  j["counterexamples"] = counterexamples;
  return j;
}

namespace {

std::string dump_density(const PCDensity<Rational>& f) {
  std::ostringstream out;
  write_two_column(out, f);
  return out.str();
}

}  // namespace

InvarianceReport invariance_trial(const DriverSpec& spec, const Rational& eps, std::size_t n_samples,
                                  const InvarianceOptions& opts) {
  ConeParams p = ConeParams::from_epsilon(eps);
  InvarianceReport rep;
  rep.eps = eps;
  rep.k = p.k;
  rep.samples = n_samples;
  rep.warnings = p.warnings;
  rep.asserted = eps <= invariance_threshold();
  rep.worst_c1 = rep.worst_c2 = rep.worst_c3 = std::numeric_limits<double>::infinity();
  rep.worst_mass_ratio = std::numeric_limits<double>::infinity();

  const auto orbit = generate(spec, std::max<std::size_t>(n_samples, 1));
  const auto maps = fibre_maps(orbit, eps);
  const double eps_d = ptm::to_double(eps);
  const double phi_scale = eps_d > 0 ? eps_d * eps_d * std::fabs(std::log(eps_d)) : 1.0;
  std::mt19937_64 seeds(spec.seed ^ 0x5DEECE66DULL);

  for (std::size_t i = 0; i < n_samples; ++i) {
    const std::uint64_t sample_seed = seeds();
    auto t = sample_cone_element(sample_seed, p, opts.zero_mass, opts.mode);
    auto g = lambda_step(maps[i], t);
    auto rep_i = cone_check(g, p);
    rep.worst_c1 = std::min(rep.worst_c1, rep_i.worst_c1());
    rep.worst_c2 = std::min(rep.worst_c2, rep_i.worst_c2());
    rep.worst_c3 = std::min(rep.worst_c3, rep_i.c3_margin);

    const Rational l1_f0 = t.f[0].l1();
    const Rational l1_g0 = g.f[0].l1();
    const bool floor_ok = l1_g0 >= p.q * l1_f0;
    rep.worst_mass_ratio = std::min(rep.worst_mass_ratio, ratio(l1_g0, l1_f0));

    bool zero_ok = true;
    if (opts.zero_mass) {
      zero_ok = g.phi().integral() == 0;
      auto [phi_before, unused_minus] = phi_pm(t);
      auto [phi_after, unused_after] = phi_pm(g);
      (void)unused_minus;
      (void)unused_after;
      const auto& [a, b] = orbit.samples[i];
      double dev = std::fabs(ratio(phi_after, phi_before) - (1.0 - eps_d * (a + b)));
      rep.worst_phi_constant = std::max(rep.worst_phi_constant, dev / phi_scale);
    }

    if (!rep_i.passed()) ++rep.violations;
    if (!floor_ok) ++rep.mass_floor_violations;
    if (!zero_ok) ++rep.zero_mass_breaks;
    if ((!rep_i.passed() || !floor_ok || !zero_ok) && rep.counterexamples.size() < opts.max_counterexamples) {
      nlohmann::json ce;
      ce["sample"] = i;
      ce["seed"] = sample_seed;
      ce["a"] = orbit.samples[i].first;
      ce["b"] = orbit.samples[i].second;
      ce["failure"] = rep_i.describe_failure() + (floor_ok ? "" : "L1 floor fails; ") + (zero_ok ? "" : "zero mass lost; ");
      ce["input"] = nlohmann::json::array();
      for (const auto& c : t.f) ce["input"].push_back(dump_density(c));
      ce["output"] = nlohmann::json::array();
      for (const auto& c : g.f) ce["output"].push_back(dump_density(c));
      rep.counterexamples.push_back(std::move(ce));
    }
  }
  return rep;
}

#define PTM_INSTANTIATE(S)                                                              \
  template struct QuarantineTuple<S>;                                                   \
  template QuarantineTuple<S> zero_tuple(const PCDensity<S>&, unsigned);                \
  template QuarantineTuple<S> lambda_step(const PairedTentMap<S>&, const QuarantineTuple<S>&); \
  template ConeReport cone_check(const QuarantineTuple<S>&, const ConeParams&);         \
  template std::pair<S, S> phi_pm(const QuarantineTuple<S>&);
PTM_INSTANTIATE(double)
PTM_INSTANTIATE(Rational)
#undef PTM_INSTANTIATE

}  // namespace ptm
