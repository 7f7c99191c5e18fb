#ifndef PTM_DENSITIES_HPP
#define PTM_DENSITIES_HPP

#include "ptm/interval_maps.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ptm {

// Piecewise-constant function on [-1,1], an element of BV modulo null sets.
// Breakpoints run strictly increasing from -1 to 1 and always contain 0;
// values[i] is the value on the open cell (breakpoints[i], breakpoints[i+1]).
template <class S>
class PCDensity {
 public:
  PCDensity();  // the zero density
  PCDensity(std::vector<S> breakpoints, std::vector<S> values);

  static PCDensity constant(const S& c);
  static PCDensity indicator(const Interval<S>& support, const S& height = S(1));
  static PCDensity sign();  // -1 on J-, +1 on J+

  const std::vector<S>& breakpoints() const { return breakpoints_; }
  const std::vector<S>& values() const { return values_; }
  std::size_t cells() const { return values_.size(); }
  S cell_length(std::size_t i) const { return S(breakpoints_[i + 1] - breakpoints_[i]); }
  // Index of the cell holding x in its closure; breakpoints resolve to the cell on their right.
  std::size_t cell_index(const S& x) const;
  // Value on the cell whose interior contains x; x must not be a breakpoint.
  S value_at(const S& x) const;

  S integral() const;
  S integral_over(const Interval<S>& range) const;
  S integral_minus() const { return integral_over({S(-1), S(0)}); }
  S integral_plus() const { return integral_over({S(0), S(1)}); }
  S l1() const;
  S sup_abs() const;

  PCDensity& operator*=(const S& c);
  friend PCDensity operator*(const S& c, PCDensity f) { return f *= c; }
  friend PCDensity operator+(const PCDensity& f, const PCDensity& g) { return combine(f, g, S(1)); }
  friend PCDensity operator-(const PCDensity& f, const PCDensity& g) { return combine(f, g, S(-1)); }

  // Same function with the given extra breakpoints inserted (values unchanged).
  PCDensity refined(std::span<const S> extra) const;

 private:
  static PCDensity combine(const PCDensity& f, const PCDensity& g, const S& g_coef);

  std::vector<S> breakpoints_;
  std::vector<S> values_;
};

template <class S>
struct BVNormReport {
  S l1;
  S var0c;
  S bv;
};

// Exact Perron-Frobenius pushforward, branch by branch.
template <class S>
PCDensity<S> transfer_pc(const PairedTentMap<S>& map, const PCDensity<S>& f);

// 1_s * f for a finite union s of closed intervals; endpoints of s become breakpoints.
template <class S>
PCDensity<S> masked(const PCDensity<S>& f, const std::vector<Interval<S>>& s);

// (1_s f, 1_{s^c} f) on a common breakpoint set, so the pair sums to f cell-wise.
template <class S>
std::pair<PCDensity<S>, PCDensity<S>> split_by_mask(const PCDensity<S>& f,
                                                    const std::vector<Interval<S>>& s);

// Variation over [-1,0) plus variation over (0,1]; the jump at 0 is not counted.
template <class S>
S var0c(const PCDensity<S>& f);

template <class S>
BVNormReport<S> bv_norm(const PCDensity<S>& f);

// Merges runs of adjacent cells (never across 0) whose values span at most tol,
// replacing each run by its length-weighted mean. Integrals over J- and J+ are kept.
template <class S>
PCDensity<S> coarsen(const PCDensity<S>& f, const S& tol);

template <class S>
struct LeakDecomposition {
  PCDensity<S> h_final;              // mass that never visited a hole
  std::vector<PCDensity<S>> leaks;   // g_1..g_k, mass leaked at step j
};

// h^(j) = L(1_{H^c} h^(j-1)), g_j = L(1_H h^(j-1)) along the given maps.
template <class S>
LeakDecomposition<S> leak_decomposition(std::span<const PairedTentMap<S>> orbit, const PCDensity<S>& f);

template <class S>
std::vector<Interval<S>> hole_union(const PairedTentMap<S>& map);

template <class S>
PCDensity<double> to_double(const PCDensity<S>& f);

// Two-column text: "breakpoint value-on-right-cell"; the final row (x = 1)
// repeats the last cell value so step plots close. Lines starting with '#' are header.
template <class S>
void write_two_column(std::ostream& out, const PCDensity<S>& f, const std::vector<std::string>& header = {});

PCDensity<double> read_two_column(std::istream& in);

}  // namespace ptm

#endif
