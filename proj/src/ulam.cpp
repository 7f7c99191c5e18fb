#include "ptm/ulam.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <tuple>

namespace ptm {

template <class S>
UlamMatrix<S>::UlamMatrix(std::size_t n, std::vector<std::size_t> row_start, std::vector<std::size_t> cols,
                          std::vector<S> vals)
    : n_(n), row_start_(std::move(row_start)), cols_(std::move(cols)), vals_(std::move(vals)) {
  if (row_start_.size() != n_ + 1 || cols_.size() != vals_.size() || row_start_.back() != vals_.size()) {
    throw DomainError("UlamMatrix: inconsistent sparse storage");
  }
}

template <class S>
std::span<const std::size_t> UlamMatrix<S>::row_cols(std::size_t i) const {
  return {cols_.data() + row_start_[i], row_start_[i + 1] - row_start_[i]};
}

template <class S>
std::span<const S> UlamMatrix<S>::row_vals(std::size_t i) const {
  return {vals_.data() + row_start_[i], row_start_[i + 1] - row_start_[i]};
}

template <class S>
S UlamMatrix<S>::entry(std::size_t i, std::size_t j) const {
  auto cols = row_cols(i);
  auto it = std::lower_bound(cols.begin(), cols.end(), j);
  if (it == cols.end() || *it != j) return S(0);
  return row_vals(i)[static_cast<std::size_t>(it - cols.begin())];
}

template <class S>
S UlamMatrix<S>::row_sum(std::size_t i) const {
  S sum(0);
  for (const auto& v : row_vals(i)) sum += v;
  return sum;
}

template <class S>
S bin_edge(std::size_t i, std::size_t n) {
  if constexpr (ScalarTraits<S>::exact) {
    Rational q(static_cast<long>(2 * i), static_cast<long>(n));
    q.canonicalize();
    return S(q - 1);
  } else {
    return -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n);
  }
}

namespace {

void check_bins(std::size_t n) {
  if (n < 2 || n % 2 != 0) throw ConfigError("Ulam partition needs an even number of bins >= 2");
}

template <class S>
std::size_t bin_of(const S& x, std::size_t n) {
  double t = (ptm::to_double(x) + 1.0) * 0.5 * static_cast<double>(n);
  auto i = static_cast<std::ptrdiff_t>(std::floor(t));
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(n) - 1));
}

}  // namespace

template <class S>
UlamMatrix<S> build_ulam(const PairedTentMap<S>& map, std::size_t n) {
  check_bins(n);
  std::vector<S> edges(n + 1);
  for (std::size_t i = 0; i <= n; ++i) edges[i] = bin_edge<S>(i, n);
  const S inv_width = S(S(n) / 2);

  std::vector<std::tuple<std::size_t, std::size_t, S>> triplets;
  triplets.reserve(6 * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (const auto& pre : preimage_of_interval(map, Interval<S>{edges[j], edges[j + 1]})) {
      // Float rounding can put bin_of one off; widen by a bin and let the overlap decide.
      std::size_t first = bin_of(pre.lo, n);
      std::size_t last = bin_of(pre.hi, n);
      first = first > 0 ? first - 1 : 0;
      last = std::min(last + 1, n - 1);
      for (std::size_t i = first; i <= last; ++i) {
        S overlap = intersect(Interval<S>{edges[i], edges[i + 1]}, pre).length();
        if (overlap > 0) triplets.emplace_back(i, j, S(overlap * inv_width));
      }
    }
  }
  std::sort(triplets.begin(), triplets.end(), [](const auto& l, const auto& r) {
    return std::tie(std::get<0>(l), std::get<1>(l)) < std::tie(std::get<0>(r), std::get<1>(r));
  });

  std::vector<std::size_t> row_start(n + 1, 0);
  std::vector<std::size_t> cols;
  std::vector<S> vals;
  std::size_t last_i = n;
  for (auto& [i, j, v] : triplets) {
    if (i == last_i && cols.back() == j) {
      vals.back() += v;
    } else {
      cols.push_back(j);
      vals.push_back(std::move(v));
    }
    last_i = i;
    row_start[i + 1] = vals.size();
  }
  for (std::size_t i = 1; i <= n; ++i) row_start[i] = std::max(row_start[i], row_start[i - 1]);
  return UlamMatrix<S>(n, std::move(row_start), std::move(cols), std::move(vals));
}

template <class S>
std::vector<S> apply(const UlamMatrix<S>& m, std::span<const S> v) {
  if (v.size() != m.size()) throw DomainError("Ulam apply: vector length does not match matrix");
  std::vector<S> w(m.size(), S(0));
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (v[i] == 0) continue;
    auto cols = m.row_cols(i);
    auto vals = m.row_vals(i);
    for (std::size_t k = 0; k < cols.size(); ++k) w[cols[k]] += v[i] * vals[k];
  }
  return w;
}

void ulam_apply(const PairedTentMap<double>& map, std::span<const double> v, std::span<double> w,
                std::vector<double>& scratch) {
  const std::size_t n = v.size();
  check_bins(n);
  if (w.size() != n) throw DomainError("ulam_apply: output length does not match input");
  const double h = 2.0 / static_cast<double>(n);
  const double inv_h = static_cast<double>(n) / 2.0;

  auto& cdf = scratch;
  cdf.resize(n + 1);
  cdf[0] = 0.0;
  for (std::size_t i = 0; i < n; ++i) cdf[i + 1] = cdf[i] + v[i];
  auto mass_below = [&](double x) {
    double t = (x + 1.0) * inv_h;
    if (t <= 0.0) return 0.0;
    if (t >= static_cast<double>(n)) return cdf[n];
    auto i = static_cast<std::size_t>(t);
    return cdf[i] + (t - static_cast<double>(i)) * v[i];
  };

  std::fill(w.begin(), w.end(), 0.0);
  for (const auto& br : branch_decomposition(map)) {
    const Interval<double> img = br.image();
    const double orient = br.slope > 0 ? 1.0 : -1.0;
    auto preimage = [&](double y) {
      double x = br.inverse(std::clamp(y, img.lo, img.hi));
      return std::clamp(x, br.domain.lo, br.domain.hi);
    };
    auto j_lo = static_cast<std::size_t>(std::clamp(std::floor((img.lo + 1.0) * inv_h), 0.0, double(n - 1)));
    auto j_hi = static_cast<std::size_t>(std::clamp(std::ceil((img.hi + 1.0) * inv_h), 1.0, double(n)));
    double prev = mass_below(preimage(-1.0 + h * static_cast<double>(j_lo)));
    for (std::size_t j = j_lo; j < j_hi; ++j) {
      double cur = mass_below(preimage(-1.0 + h * static_cast<double>(j + 1)));
      w[j] += orient * (cur - prev);
      prev = cur;
    }
  }
}

template <class S>
std::vector<S> discretize(const PCDensity<S>& f, std::size_t n) {
  check_bins(n);
  std::vector<S> out(n, S(0));
  const auto& bp = f.breakpoints();
  std::size_t bin = 0;
  S edge_hi = bin_edge<S>(1, n);
  for (std::size_t c = 0; c < f.cells(); ++c) {
    S lo = bp[c];
    const S& hi = bp[c + 1];
    while (lo < hi) {
      while (bin + 1 < n && !(lo < edge_hi)) {
        ++bin;
        edge_hi = bin_edge<S>(bin + 1, n);
      }
      S top = hi < edge_hi ? hi : edge_hi;
      if (bin + 1 == n) top = hi;
      out[bin] += f.values()[c] * S(top - lo);
      lo = top;
    }
  }
  return out;
}

template <class S>
PCDensity<S> lift(std::span<const S> v, std::size_t n) {
  check_bins(n);
  if (v.size() != n) throw DomainError("lift: vector length does not match bin count");
  std::vector<S> edges(n + 1);
  for (std::size_t i = 0; i <= n; ++i) edges[i] = bin_edge<S>(i, n);
  const S scale = S(S(n) / 2);
  std::vector<S> vals(n);
  for (std::size_t i = 0; i < n; ++i) vals[i] = v[i] * scale;
  return PCDensity<S>(std::move(edges), std::move(vals));
}

template <class S>
RowSumReport row_sum_report(const UlamMatrix<S>& m) {
  RowSumReport r;
  r.exact = true;
  for (std::size_t i = 0; i < m.size(); ++i) {
    S s = m.row_sum(i);
    if (s != 1) r.exact = false;
    r.max_deviation = std::max(r.max_deviation, std::fabs(ptm::to_double(S(s - 1))));
  }
  return r;
}

template <class S>
void write_coordinate(std::ostream& out, const UlamMatrix<S>& m) {
  out << "# n=" << m.size() << " nnz=" << m.nonzeros() << '\n';
  out << std::setprecision(17);
  for (std::size_t i = 0; i < m.size(); ++i) {
    auto cols = m.row_cols(i);
    auto vals = m.row_vals(i);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      out << i << ' ' << cols[k] << ' ';
      if constexpr (ScalarTraits<S>::exact) {
        out << vals[k].get_str();
      } else {
        out << vals[k];
      }
      out << '\n';
    }
  }
}

#define PTM_INSTANTIATE(S)                                                   \
  template class UlamMatrix<S>;                                              \
  template S bin_edge<S>(std::size_t, std::size_t);                          \
  template UlamMatrix<S> build_ulam(const PairedTentMap<S>&, std::size_t);   \
  template std::vector<S> apply(const UlamMatrix<S>&, std::span<const S>);   \
  template std::vector<S> discretize(const PCDensity<S>&, std::size_t);      \
  template PCDensity<S> lift(std::span<const S>, std::size_t);               \
  template RowSumReport row_sum_report(const UlamMatrix<S>&);                \
  template void write_coordinate(std::ostream&, const UlamMatrix<S>&);
PTM_INSTANTIATE(double)
PTM_INSTANTIATE(Rational)
#undef PTM_INSTANTIATE

}  // namespace ptm
