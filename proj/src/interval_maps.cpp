#include "ptm/interval_maps.hpp"

#include <algorithm>
#include <cctype>
#include <string>

namespace ptm {

Rational parse_rational(std::string_view text) {
  std::string s(text);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.erase(s.begin());
  if (s.empty()) throw ConfigError("empty numeric literal");

  if (auto slash = s.find('/'); slash != std::string::npos) {
    Rational den = parse_rational(s.substr(slash + 1));
    if (den == 0) throw ConfigError("zero denominator in '" + s + "'");
    Rational q(parse_rational(s.substr(0, slash)) / den);
    return q;
  }

  bool negative = false;
  std::size_t pos = 0;
  if (s[pos] == '+' || s[pos] == '-') {
    negative = s[pos] == '-';
    ++pos;
  }
  std::string digits;
  long exponent = 0;
  bool seen_point = false;
  bool any_digit = false;
  for (; pos < s.size(); ++pos) {
    char c = s[pos];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      digits.push_back(c);
      any_digit = true;
      if (seen_point) --exponent;
    } else if (c == '.' && !seen_point) {
      seen_point = true;
    } else if (c == 'e' || c == 'E') {
      try {
        exponent += std::stol(s.substr(pos + 1));
      } catch (const std::exception&) {
        throw ConfigError("bad exponent in numeric literal '" + s + "'");
      }
      pos = s.size();
      break;
    } else {
      throw ConfigError("bad numeric literal '" + s + "'");
    }
  }
  if (!any_digit) throw ConfigError("bad numeric literal '" + s + "'");

  mpz_class mantissa(digits, 10);
  mpz_class scale = 1;
  mpz_ui_pow_ui(scale.get_mpz_t(), 10, static_cast<unsigned long>(exponent < 0 ? -exponent : exponent));
  Rational q = exponent < 0 ? Rational(mantissa, scale) : Rational(mantissa * scale);
  q.canonicalize();
  return negative ? Rational(-q) : q;
}

template <class S>
S Branch<S>::apply(const S& x) const {
  S y(slope * (x - anchor_x) + anchor_y);
  if constexpr (!ScalarTraits<S>::exact) y = std::clamp(y, S(-1), S(1));
  return y;
}

template <class S>
Interval<S> Branch<S>::image() const {
  S a = apply(domain.lo);
  S b = apply(domain.hi);
  return a < b ? Interval<S>{a, b} : Interval<S>{b, a};
}

template <class S>
PairedTentMap<S>::PairedTentMap(S eps_a, S eps_b) : eps_a_(std::move(eps_a)), eps_b_(std::move(eps_b)) {
  if (eps_a_ < 0 || eps_a_ > 1 || eps_b_ < 0 || eps_b_ > 1) {
    throw DomainError("paired tent map leakage parameters must lie in [0,1]");
  }
}

template <class S>
S eval_map(const PairedTentMap<S>& map, const S& x) {
  if (x < -1 || x > 1) throw DomainError("eval_map: x outside [-1,1]");
  const S half(S(1) / 2);
  if (x == 0) return S(0);
  const auto br = branch_decomposition(map);
  if (x <= -half) return br[0].apply(x);
  if (x < 0) return br[1].apply(x);
  if (x <= half) return br[2].apply(x);
  return br[3].apply(x);
}

template <class S>
HolePair<S> holes(const PairedTentMap<S>& map) {
  S inner_plus(S(1) / map.slope_plus());
  S inner_minus(S(1) / map.slope_minus());
  return HolePair<S>{Interval<S>{S(-1 + inner_minus), S(-inner_minus)},
                     Interval<S>{inner_plus, S(1 - inner_plus)}};
}

template <class S>
std::array<Branch<S>, 4> branch_decomposition(const PairedTentMap<S>& map) {
  const S half(S(1) / 2);
  const S sm = map.slope_minus();
  const S sp = map.slope_plus();
  return {Branch<S>{{S(-1), S(-half)}, sm, S(-1), S(-1)},
          Branch<S>{{S(-half), S(0)}, S(-sm), S(0), S(-1)},
          Branch<S>{{S(0), half}, S(-sp), S(0), S(1)},
          Branch<S>{{half, S(1)}, sp, S(1), S(1)}};
}

template <class S>
std::vector<Interval<S>> preimage_of_interval(const PairedTentMap<S>& map, const Interval<S>& target) {
  if (target.hi < target.lo) throw DomainError("preimage_of_interval: empty target");
  std::vector<Interval<S>> pieces;
  for (const auto& br : branch_decomposition(map)) {
    Interval<S> hit = intersect(br.image(), target);
    if (hit.empty()) continue;
    S x0 = br.inverse(hit.lo);
    S x1 = br.inverse(hit.hi);
    pieces.push_back(x0 < x1 ? Interval<S>{x0, x1} : Interval<S>{x1, x0});
  }
  std::sort(pieces.begin(), pieces.end(), [](const auto& l, const auto& r) { return l.lo < r.lo; });
  std::vector<Interval<S>> merged;
  for (auto& p : pieces) {
    if (!merged.empty() && !(merged.back().hi < p.lo)) {
      if (merged.back().hi < p.hi) merged.back().hi = p.hi;
    } else {
      merged.push_back(std::move(p));
    }
  }
  return merged;
}

PairedTentMap<Rational> to_rational(const PairedTentMap<double>& map) {
  return {Rational(map.eps_a()), Rational(map.eps_b())};
}

PairedTentMap<double> to_double(const PairedTentMap<Rational>& map) {
  return {ptm::to_double(map.eps_a()), ptm::to_double(map.eps_b())};
}

#define PTM_INSTANTIATE(S)                                                             \
  template struct Branch<S>;                                                           \
  template class PairedTentMap<S>;                                                     \
  template S eval_map(const PairedTentMap<S>&, const S&);                              \
  template HolePair<S> holes(const PairedTentMap<S>&);                                 \
  template std::array<Branch<S>, 4> branch_decomposition(const PairedTentMap<S>&);    \
  template std::vector<Interval<S>> preimage_of_interval(const PairedTentMap<S>&,     \
                                                         const Interval<S>&);
PTM_INSTANTIATE(double)
PTM_INSTANTIATE(Rational)
#undef PTM_INSTANTIATE

}  // namespace ptm
