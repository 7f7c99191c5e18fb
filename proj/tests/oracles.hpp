// Test-side reference computations. Nothing here calls the library's branch,
// preimage or transfer code; densities are read only through their raw arrays.
#ifndef PTM_TESTS_ORACLES_HPP
#define PTM_TESTS_ORACLES_HPP

#include "ptm/densities.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace oracle {

using ptm::Rational;

inline Rational q(long p, long d = 1) {
  Rational r(p, d);
  r.canonicalize();
  return r;
}

// The paired tent map written out piece by piece.
template <class S>
S tent(const S& ea, const S& eb, const S& x) {
  if (x == 0) return S(0);
  if (x <= S(-1) / 2) return S(2 * (1 + eb) * (x + 1) - 1);
  if (x < 0) return S(-2 * (1 + eb) * x - 1);
  if (x <= S(1) / 2) return S(-2 * (1 + ea) * x + 1);
  return S(2 * (1 + ea) * (x - 1) + 1);
}

// All x with T(x) = y, from the four inverse formulas.
inline std::vector<Rational> tent_preimages(const Rational& ea, const Rational& eb, const Rational& y) {
  std::vector<Rational> out;
  auto keep = [&](Rational x, const Rational& lo, const Rational& hi) {
    if (lo <= x && x <= hi) out.push_back(x);
  };
  const Rational sm = 2 * (1 + eb);
  const Rational sp = 2 * (1 + ea);
  keep(Rational((y + 1) / sm - 1), -1, q(-1, 2));
  keep(Rational(-(y + 1) / sm), q(-1, 2), 0);
  keep(Rational((1 - y) / sp), 0, q(1, 2));
  keep(Rational((y - 1) / sp + 1), q(1, 2), 1);
  return out;
}

// Value of a step function at a point that is not one of its breakpoints.
template <class S>
S eval(const ptm::PCDensity<S>& f, const S& x) {
  const auto& bp = f.breakpoints();
  for (std::size_t i = 0; i + 1 < bp.size(); ++i) {
    if (bp[i] < x && x < bp[i + 1]) return f.values()[i];
  }
  return S(0);
}

inline void sort_unique(std::vector<Rational>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

// int f * g by midpoint sums over the common refinement.
inline Rational integral_product(const ptm::PCDensity<Rational>& f, const ptm::PCDensity<Rational>& g) {
  std::vector<Rational> cuts(f.breakpoints());
  cuts.insert(cuts.end(), g.breakpoints().begin(), g.breakpoints().end());
  sort_unique(cuts);
  Rational total = 0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    Rational mid = (cuts[i] + cuts[i + 1]) / 2;
    total += eval(f, mid) * eval(g, mid) * (cuts[i + 1] - cuts[i]);
  }
  return total;
}

// int f(x) g(T x) dx; cells are cut at f's breakpoints, the branch ends and T^{-1} of g's breakpoints.
inline Rational integral_f_g_of_T(const ptm::PCDensity<Rational>& f, const ptm::PCDensity<Rational>& g,
                                  const Rational& ea, const Rational& eb) {
  std::vector<Rational> cuts(f.breakpoints());
  for (long k : {-2, -1, 0, 1, 2}) cuts.push_back(q(k, 2));
  for (const auto& y : g.breakpoints()) {
    for (auto& x : tent_preimages(ea, eb, y)) cuts.push_back(x);
  }
  sort_unique(cuts);
  Rational total = 0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    Rational mid = (cuts[i] + cuts[i + 1]) / 2;
    total += eval(f, mid) * eval(g, tent(ea, eb, mid)) * (cuts[i + 1] - cuts[i]);
  }
  return total;
}

// Random step function with dyadic-plus-triadic breakpoints and small integer values.
inline ptm::PCDensity<Rational> random_step(std::mt19937_64& rng, int cuts = 6) {
  std::uniform_int_distribution<long> pos(-2999, 2999);
  std::uniform_int_distribution<long> val(-7, 7);
  std::vector<Rational> bp{-1, 0, 1};
  for (int i = 0; i < cuts; ++i) bp.push_back(q(pos(rng), 3000));
  sort_unique(bp);
  std::vector<Rational> v;
  for (std::size_t i = 0; i + 1 < bp.size(); ++i) v.push_back(q(val(rng), 4));
  return ptm::PCDensity<Rational>(bp, v);
}

inline ptm::PCDensity<double> random_step_double(std::mt19937_64& rng, int cuts = 6) {
  return ptm::to_double(random_step(rng, cuts));
}

// Sum of |jumps| strictly inside (-1,0) and (0,1).
template <class S>
S variation_excluding_zero(const ptm::PCDensity<S>& f) {
  S total(0);
  const auto& bp = f.breakpoints();
  for (std::size_t i = 1; i + 1 < bp.size(); ++i) {
    if (bp[i] == 0) continue;
    S d = f.values()[i] - f.values()[i - 1];
    total += d < 0 ? S(-d) : d;
  }
  return total;
}

template <class S>
S l1_distance(const ptm::PCDensity<S>& f, const ptm::PCDensity<S>& g) {
  return (f - g).l1();
}

}  // namespace oracle

#endif
