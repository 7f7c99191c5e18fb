#ifndef PTM_INTERVAL_MAPS_HPP
#define PTM_INTERVAL_MAPS_HPP

#include "ptm/scalar.hpp"

#include <array>
#include <vector>

namespace ptm {

template <class S>
struct Interval {
  S lo;
  S hi;

  S length() const { return hi > lo ? S(hi - lo) : S(0); }
  bool empty() const { return !(lo < hi); }
  bool contains(const S& x) const { return lo <= x && x <= hi; }
};

template <class S>
Interval<S> intersect(const Interval<S>& a, const Interval<S>& b) {
  Interval<S> r{a.lo > b.lo ? a.lo : b.lo, a.hi < b.hi ? a.hi : b.hi};
  if (r.hi < r.lo) r.hi = r.lo;
  return r;
}

// One affine piece on a closed domain, written around an anchor point
// (anchor_x -> anchor_y) that is one of the exact images -1 or 1.
template <class S>
struct Branch {
  Interval<S> domain;
  S slope;
  S anchor_x;
  S anchor_y;

  S intercept() const { return S(anchor_y - slope * anchor_x); }
  S apply(const S& x) const;
  S inverse(const S& y) const { return S((y - anchor_y) / slope + anchor_x); }
  Interval<S> image() const;
};

// The two holes: points of J+ = [0,1] mapped into J- and vice versa.
template <class S>
struct HolePair {
  Interval<S> h_minus;
  Interval<S> h_plus;
};

// Paired tent map with leakage parameters eps_a (right half) and eps_b
// (left half), both already multiplied by the global epsilon.
//
//   T(x) = 2(1+b)(x+1) - 1   on [-1,-1/2]
//        = -2(1+b)x - 1      on [-1/2,0)
//        = 0                 at 0
//        = -2(1+a)x + 1      on (0,1/2]
//        = 2(1+a)(x-1) + 1   on [1/2,1]
template <class S>
class PairedTentMap {
 public:
  PairedTentMap() : PairedTentMap(S(0), S(0)) {}
  PairedTentMap(S eps_a, S eps_b);

  const S& eps_a() const { return eps_a_; }
  const S& eps_b() const { return eps_b_; }

  // |slope| on J- and J+ respectively.
  S slope_minus() const { return S(2 * (1 + eps_b_)); }
  S slope_plus() const { return S(2 * (1 + eps_a_)); }

 private:
  S eps_a_;
  S eps_b_;
};

template <class S>
S eval_map(const PairedTentMap<S>& map, const S& x);

template <class S>
HolePair<S> holes(const PairedTentMap<S>& map);

// Branches in left-to-right order; their domains tile [-1,1].
template <class S>
std::array<Branch<S>, 4> branch_decomposition(const PairedTentMap<S>& map);

// T^{-1}(target) as sorted disjoint intervals, up to finitely many points.
template <class S>
std::vector<Interval<S>> preimage_of_interval(const PairedTentMap<S>& map,
                                              const Interval<S>& target);

PairedTentMap<Rational> to_rational(const PairedTentMap<double>& map);
PairedTentMap<double> to_double(const PairedTentMap<Rational>& map);

}  // namespace ptm

#endif
