#ifndef PTM_ULAM_HPP
#define PTM_ULAM_HPP

#include "ptm/densities.hpp"

#include <iosfwd>
#include <span>
#include <vector>

namespace ptm {

// Ulam matrix on the uniform partition of [-1,1] into n bins (n even, so 0 is
// a bin boundary): P_ij = m(I_i cap T^{-1} I_j) / m(I_i), stored by rows.
// Vectors hold bin masses and are acted on from the left, w = v P.
template <class S>
class UlamMatrix {
 public:
  UlamMatrix(std::size_t n, std::vector<std::size_t> row_start, std::vector<std::size_t> cols, std::vector<S> vals);

  std::size_t size() const { return n_; }
  std::size_t nonzeros() const { return vals_.size(); }
  std::span<const std::size_t> row_cols(std::size_t i) const;
  std::span<const S> row_vals(std::size_t i) const;
  S entry(std::size_t i, std::size_t j) const;
  S row_sum(std::size_t i) const;

 private:
  std::size_t n_;
  std::vector<std::size_t> row_start_;
  std::vector<std::size_t> cols_;
  std::vector<S> vals_;
};

// Left endpoint of bin i (i = n gives 1).
template <class S>
S bin_edge(std::size_t i, std::size_t n);

template <class S>
UlamMatrix<S> build_ulam(const PairedTentMap<S>& map, std::size_t n);

template <class S>
std::vector<S> apply(const UlamMatrix<S>& m, std::span<const S> v);

// Matrix-free v -> v P for one fibre, exact up to rounding: the mass landing in a
// target bin is a difference of the piecewise-linear cumulative mass at the
// endpoints of its preimage. w must have the size of v; scratch is reused storage.
void ulam_apply(const PairedTentMap<double>& map, std::span<const double> v, std::span<double> w,
                std::vector<double>& scratch);

// Bin masses of f (cell integrals over the uniform n-partition).
template <class S>
std::vector<S> discretize(const PCDensity<S>& f, std::size_t n);

// Density with value v_i * n / 2 on bin i.
template <class S>
PCDensity<S> lift(std::span<const S> v, std::size_t n);

struct RowSumReport {
  double max_deviation = 0.0;
  bool exact = false;  // every row sums to exactly 1 (rational mode)
};

template <class S>
RowSumReport row_sum_report(const UlamMatrix<S>& m);

// "row col value" lines, zero-based indices; rational entries are written as p/q.
template <class S>
void write_coordinate(std::ostream& out, const UlamMatrix<S>& m);

}  // namespace ptm

#endif
