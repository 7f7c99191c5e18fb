#include "ptm/densities.hpp"

#include <algorithm>
#include <iomanip>
#include <istream>
#include <iterator>
#include <limits>
#include <ostream>
#include <sstream>

namespace ptm {

namespace {

template <class S>
std::vector<S> merge_sorted_unique(const std::vector<S>& a, const std::vector<S>& b) {
  std::vector<S> out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Values of f on the cells of a refinement of its breakpoint set.
template <class S>
std::vector<S> values_on(const PCDensity<S>& f, const std::vector<S>& fine) {
  std::vector<S> out;
  out.reserve(fine.size() - 1);
  const auto& bp = f.breakpoints();
  std::size_t cell = 0;
  for (std::size_t i = 0; i + 1 < fine.size(); ++i) {
    while (cell + 1 < f.cells() && !(fine[i] < bp[cell + 1])) ++cell;
    out.push_back(f.values()[cell]);
  }
  return out;
}

template <class S>
std::vector<Interval<S>> normalize_mask(const std::vector<Interval<S>>& s) {
  std::vector<Interval<S>> parts;
  for (const auto& iv : s) {
    Interval<S> c = intersect(iv, Interval<S>{S(-1), S(1)});
    if (!c.empty()) parts.push_back(c);
  }
  std::sort(parts.begin(), parts.end(), [](const auto& l, const auto& r) { return l.lo < r.lo; });
  std::vector<Interval<S>> merged;
  for (auto& p : parts) {
    if (!merged.empty() && !(merged.back().hi < p.lo)) {
      if (merged.back().hi < p.hi) merged.back().hi = p.hi;
    } else {
      merged.push_back(p);
    }
  }
  return merged;
}

}  // namespace

template <class S>
PCDensity<S>::PCDensity() : breakpoints_{S(-1), S(0), S(1)}, values_{S(0), S(0)} {}

template <class S>
PCDensity<S>::PCDensity(std::vector<S> breakpoints, std::vector<S> values)
    : breakpoints_(std::move(breakpoints)), values_(std::move(values)) {
  if (breakpoints_.size() < 2 || values_.size() + 1 != breakpoints_.size()) {
    throw DomainError("PCDensity: need one value per cell");
  }
  if (breakpoints_.front() != -1 || breakpoints_.back() != 1) {
    throw DomainError("PCDensity: breakpoints must start at -1 and end at 1");
  }
  for (std::size_t i = 0; i + 1 < breakpoints_.size(); ++i) {
    if (!(breakpoints_[i] < breakpoints_[i + 1])) {
      throw DomainError("PCDensity: breakpoints must be strictly increasing");
    }
  }
  auto it = std::lower_bound(breakpoints_.begin(), breakpoints_.end(), S(0));
  if (*it != 0) {
    auto cell = static_cast<std::size_t>(it - breakpoints_.begin()) - 1;
    breakpoints_.insert(it, S(0));
    values_.insert(values_.begin() + static_cast<std::ptrdiff_t>(cell), values_[cell]);
  }
}

template <class S>
PCDensity<S> PCDensity<S>::constant(const S& c) {
  return PCDensity({S(-1), S(0), S(1)}, {c, c});
}

template <class S>
PCDensity<S> PCDensity<S>::indicator(const Interval<S>& support, const S& height) {
  return masked(constant(height), {support});
}

template <class S>
PCDensity<S> PCDensity<S>::sign() {
  return PCDensity({S(-1), S(0), S(1)}, {S(-1), S(1)});
}

template <class S>
std::size_t PCDensity<S>::cell_index(const S& x) const {
  auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), x);
  auto idx = static_cast<std::ptrdiff_t>(it - breakpoints_.begin()) - 1;
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(cells()) - 1));
}

template <class S>
S PCDensity<S>::value_at(const S& x) const {
  if (std::binary_search(breakpoints_.begin(), breakpoints_.end(), x)) {
    throw DomainError("PCDensity::value_at: point is a breakpoint");
  }
  return values_[cell_index(x)];
}

template <class S>
S PCDensity<S>::integral() const {
  S total(0);
  for (std::size_t i = 0; i < cells(); ++i) total += values_[i] * cell_length(i);
  return total;
}

template <class S>
S PCDensity<S>::integral_over(const Interval<S>& range) const {
  S total(0);
  for (std::size_t i = 0; i < cells(); ++i) {
    if (!(breakpoints_[i] < range.hi)) break;
    Interval<S> hit = intersect(Interval<S>{breakpoints_[i], breakpoints_[i + 1]}, range);
    if (!hit.empty()) total += values_[i] * hit.length();
  }
  return total;
}

template <class S>
S PCDensity<S>::l1() const {
  S total(0);
  for (std::size_t i = 0; i < cells(); ++i) total += abs_value(values_[i]) * cell_length(i);
  return total;
}

template <class S>
S PCDensity<S>::sup_abs() const {
  S best(0);
  for (const auto& v : values_) {
    S a = abs_value(v);
    if (best < a) best = a;
  }
  return best;
}

template <class S>
PCDensity<S>& PCDensity<S>::operator*=(const S& c) {
  for (auto& v : values_) v *= c;
  return *this;
}

template <class S>
PCDensity<S> PCDensity<S>::refined(std::span<const S> extra) const {
  std::vector<S> add;
  for (const auto& x : extra) {
    if (-1 < x && x < 1) add.push_back(x);
  }
  std::sort(add.begin(), add.end());
  auto fine = merge_sorted_unique(breakpoints_, add);
  auto vals = values_on(*this, fine);
  return PCDensity(std::move(fine), std::move(vals));
}

template <class S>
PCDensity<S> PCDensity<S>::combine(const PCDensity& f, const PCDensity& g, const S& g_coef) {
  auto fine = merge_sorted_unique(f.breakpoints_, g.breakpoints_);
  auto fv = values_on(f, fine);
  auto gv = values_on(g, fine);
  for (std::size_t i = 0; i < fv.size(); ++i) fv[i] += g_coef * gv[i];
  return PCDensity(std::move(fine), std::move(fv));
}

template <class S>
PCDensity<S> transfer_pc(const PairedTentMap<S>& map, const PCDensity<S>& f) {
  struct Piece {
    S y0;
    S y1;
    S value;
  };
  const auto& bp = f.breakpoints();
  const auto& vals = f.values();

  std::vector<std::vector<Piece>> images;
  std::vector<S> ys{S(-1), S(0), S(1)};
  for (const auto& br : branch_decomposition(map)) {
    std::vector<Piece> pieces;
    const S inv_slope = S(1) / abs_value(br.slope);
    std::size_t i = f.cell_index(br.domain.lo);
    for (; i < f.cells() && bp[i] < br.domain.hi; ++i) {
      S l = bp[i] < br.domain.lo ? br.domain.lo : bp[i];
      S r = bp[i + 1] > br.domain.hi ? br.domain.hi : bp[i + 1];
      if (!(l < r)) continue;
      S yl = br.apply(l);
      S yr = br.apply(r);
      if (br.slope < 0) std::swap(yl, yr);
      pieces.push_back(Piece{yl, yr, S(vals[i] * inv_slope)});
    }
    if (br.slope < 0) std::reverse(pieces.begin(), pieces.end());

    std::vector<S> own;
    own.reserve(pieces.size() + 1);
    for (const auto& p : pieces) own.push_back(p.y0);
    if (!pieces.empty()) own.push_back(pieces.back().y1);
    ys = merge_sorted_unique(ys, own);
    images.push_back(std::move(pieces));
  }

  std::vector<S> out(ys.size() - 1, S(0));
  for (const auto& pieces : images) {
    std::size_t p = 0;
    for (std::size_t c = 0; c + 1 < ys.size() && p < pieces.size(); ++c) {
      while (p < pieces.size() && !(ys[c] < pieces[p].y1)) ++p;
      if (p == pieces.size()) break;
      if (ys[c] < pieces[p].y0) continue;
      out[c] += pieces[p].value;
    }
  }
  return PCDensity<S>(std::move(ys), std::move(out));
}

template <class S>
std::pair<PCDensity<S>, PCDensity<S>> split_by_mask(const PCDensity<S>& f, const std::vector<Interval<S>>& s) {
  auto mask = normalize_mask(s);
  std::vector<S> ends;
  for (const auto& iv : mask) {
    ends.push_back(iv.lo);
    ends.push_back(iv.hi);
  }
  PCDensity<S> fine = f.refined(ends);
  const auto& bp = fine.breakpoints();
  std::vector<S> inside(fine.cells(), S(0));
  std::vector<S> outside(fine.cells(), S(0));
  std::size_t m = 0;
  for (std::size_t i = 0; i < fine.cells(); ++i) {
    while (m < mask.size() && !(bp[i] < mask[m].hi)) ++m;
    bool in = m < mask.size() && !(bp[i] < mask[m].lo);
    (in ? inside : outside)[i] = fine.values()[i];
  }
  return {PCDensity<S>(bp, std::move(inside)), PCDensity<S>(bp, std::move(outside))};
}

template <class S>
PCDensity<S> masked(const PCDensity<S>& f, const std::vector<Interval<S>>& s) {
  return split_by_mask(f, s).first;
}

template <class S>
S var0c(const PCDensity<S>& f) {
  S total(0);
  const auto& bp = f.breakpoints();
  const auto& v = f.values();
  for (std::size_t i = 1; i < f.cells(); ++i) {
    if (bp[i] == 0) continue;
    total += abs_value(S(v[i] - v[i - 1]));
  }
  return total;
}

template <class S>
BVNormReport<S> bv_norm(const PCDensity<S>& f) {
  S l1 = f.l1();
  S var = var0c(f);
  S bv = var < l1 ? l1 : var;
  return {l1, var, bv};
}

template <class S>
PCDensity<S> coarsen(const PCDensity<S>& f, const S& tol) {
  if (tol < 0) throw DomainError("coarsen: negative tolerance");
  const auto& bp = f.breakpoints();
  const auto& v = f.values();
  std::vector<S> nbp{bp.front()};
  std::vector<S> nv;
  std::size_t i = 0;
  while (i < f.cells()) {
    S lo = v[i];
    S hi = v[i];
    std::size_t j = i + 1;
    while (j < f.cells() && bp[j] != 0) {
      S nlo = v[j] < lo ? v[j] : lo;
      S nhi = v[j] > hi ? v[j] : hi;
      if (tol < S(nhi - nlo)) break;
      lo = nlo;
      hi = nhi;
      ++j;
    }
    if (lo == hi) {
      nv.push_back(lo);
    } else {
      S mass(0);
      for (std::size_t c = i; c < j; ++c) mass += v[c] * f.cell_length(c);
      S mean(mass / S(bp[j] - bp[i]));
      // Rounding must not push the mean outside the run's range.
      if (mean < lo) mean = lo;
      if (mean > hi) mean = hi;
      nv.push_back(mean);
    }
    nbp.push_back(bp[j]);
    i = j;
  }
  return PCDensity<S>(std::move(nbp), std::move(nv));
}

template <class S>
std::vector<Interval<S>> hole_union(const PairedTentMap<S>& map) {
  auto h = holes(map);
  return {h.h_minus, h.h_plus};
}

template <class S>
LeakDecomposition<S> leak_decomposition(std::span<const PairedTentMap<S>> orbit, const PCDensity<S>& f) {
  if (orbit.empty()) throw DomainError("leak_decomposition: empty orbit");
  LeakDecomposition<S> out;
  PCDensity<S> h = f;
  for (const auto& map : orbit) {
    auto [in_hole, outside] = split_by_mask(h, hole_union(map));
    out.leaks.push_back(transfer_pc(map, in_hole));
    h = transfer_pc(map, outside);
  }
  out.h_final = std::move(h);
  return out;
}

template <class S>
PCDensity<double> to_double(const PCDensity<S>& f) {
  std::vector<double> bp;
  std::vector<double> v;
  for (const auto& x : f.breakpoints()) {
    double d = ptm::to_double(x);
    if (!bp.empty() && !(bp.back() < d)) continue;  // collapsed by rounding
    bp.push_back(d);
  }
  if (bp.size() == f.breakpoints().size()) {
    for (const auto& y : f.values()) v.push_back(ptm::to_double(y));
    return PCDensity<double>(std::move(bp), std::move(v));
  }
  // Rare: distinct rationals rounding to one double. Re-sample by cell midpoints.
  for (std::size_t i = 0; i + 1 < bp.size(); ++i) {
    S mid = ScalarTraits<S>::from_double(0.5 * (bp[i] + bp[i + 1]));
    v.push_back(ptm::to_double(f.values()[f.cell_index(mid)]));
  }
  return PCDensity<double>(std::move(bp), std::move(v));
}

template <class S>
void write_two_column(std::ostream& out, const PCDensity<S>& f, const std::vector<std::string>& header) {
  for (const auto& line : header) out << "# " << line << '\n';
  std::ostringstream buf;
  buf << std::setprecision(17);
  const auto& bp = f.breakpoints();
  for (std::size_t i = 0; i < bp.size(); ++i) {
    const S& val = i < f.cells() ? f.values()[i] : f.values().back();
    buf << ptm::to_double(bp[i]) << ' ' << ptm::to_double(val) << '\n';
  }
  out << buf.str();
}

PCDensity<double> read_two_column(std::istream& in) {
  std::vector<double> bp;
  std::vector<double> v;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    double x = 0;
    double y = 0;
    if (!(row >> x >> y)) throw ConfigError("two-column density: malformed row '" + line + "'");
    bp.push_back(x);
    v.push_back(y);
  }
  if (bp.size() < 2) throw ConfigError("two-column density: fewer than two rows");
  v.pop_back();
  return PCDensity<double>(std::move(bp), std::move(v));
}

#define PTM_INSTANTIATE(S)                                                                              \
  template class PCDensity<S>;                                                                          \
  template PCDensity<S> transfer_pc(const PairedTentMap<S>&, const PCDensity<S>&);                      \
  template PCDensity<S> masked(const PCDensity<S>&, const std::vector<Interval<S>>&);                   \
  template std::pair<PCDensity<S>, PCDensity<S>> split_by_mask(const PCDensity<S>&,                     \
                                                               const std::vector<Interval<S>>&);        \
  template S var0c(const PCDensity<S>&);                                                                \
  template BVNormReport<S> bv_norm(const PCDensity<S>&);                                                \
  template PCDensity<S> coarsen(const PCDensity<S>&, const S&);                                         \
  template std::vector<Interval<S>> hole_union(const PairedTentMap<S>&);                                \
  template LeakDecomposition<S> leak_decomposition(std::span<const PairedTentMap<S>>, const PCDensity<S>&); \
  template PCDensity<double> to_double(const PCDensity<S>&);                                            \
  template void write_two_column(std::ostream&, const PCDensity<S>&, const std::vector<std::string>&);
PTM_INSTANTIATE(double)
PTM_INSTANTIATE(Rational)
#undef PTM_INSTANTIATE

}  // namespace ptm
