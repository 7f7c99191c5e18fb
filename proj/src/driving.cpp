#include "ptm/driving.hpp"

#include <json.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace ptm {

namespace {

constexpr double kRowSumTolerance = 1e-12;

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Past samples come from an independent stream derived from the same seed.
std::mt19937_64 past_stream(std::uint64_t seed) { return std::mt19937_64(splitmix64(seed)); }

std::size_t sample_row(const std::vector<double>& row, double u) {
  double acc = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j) {
    acc += row[j];
    if (u < acc) return j;
  }
  for (std::size_t j = row.size(); j-- > 0;) {
    if (row[j] > 0) return j;
  }
  return row.size() - 1;
}

double trig_poly(const std::vector<double>& coef, double t) {
  double v = coef.empty() ? 0.0 : coef[0];
  for (std::size_t i = 1; i < coef.size(); i += 2) {
    double m = static_cast<double>((i + 1) / 2);
    v += coef[i] * std::cos(2 * std::numbers::pi * m * t);
    if (i + 1 < coef.size()) v += coef[i + 1] * std::sin(2 * std::numbers::pi * m * t);
  }
  return v;
}

std::pair<double, double> trig_range(const std::vector<double>& coef) {
  double c0 = coef.empty() ? 0.0 : coef[0];
  double spread = 0.0;
  for (std::size_t i = 1; i < coef.size(); ++i) spread += std::fabs(coef[i]);
  return {c0 - spread, c0 + spread};
}

double frac(double x) { return x - std::floor(x); }

void check_unit(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string("driver: ") + what + " outside [0,1]");
}

std::vector<std::vector<double>> reversed_chain(const std::vector<std::vector<double>>& p,
                                                const std::vector<double>& pi) {
  std::size_t n = p.size();
  std::vector<std::vector<double>> r(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) r[i][j] = pi[i] > 0 ? pi[j] * p[j][i] / pi[i] : (i == j ? 1.0 : 0.0);
  }
  return r;
}

}  // namespace

DriverSpec DriverSpec::constant_pair(double a, double b) {
  DriverSpec s;
  s.kind = DriverKind::constant;
  s.a = a;
  s.b = b;
  s.validate();
  return s;
}

DriverSpec DriverSpec::iid_uniform(std::array<double, 2> a_range, std::array<double, 2> b_range,
                                   std::uint64_t seed) {
  DriverSpec s;
  s.kind = DriverKind::iid_uniform;
  s.a_range = a_range;
  s.b_range = b_range;
  s.seed = seed;
  s.validate();
  return s;
}

DriverSpec DriverSpec::parse(std::string_view text, std::uint64_t seed) {
  using nlohmann::json;
  std::string s(text);
  auto colon = s.find(':');
  std::string kind = s.substr(0, colon);
  std::string rest = colon == std::string::npos ? "" : s.substr(colon + 1);

  json params = json::object();
  std::size_t pos = 0;
  while (pos < rest.size()) {
    // Values may contain ';' only inside brackets.
    std::size_t end = pos;
    int depth = 0;
    while (end < rest.size() && !(depth == 0 && rest[end] == ';')) {
      if (rest[end] == '[') ++depth;
      if (rest[end] == ']') --depth;
      ++end;
    }
    std::string item = rest.substr(pos, end - pos);
    pos = end + 1;
    if (item.empty()) continue;
    auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("driver: expected key=value, got '" + item + "'");
    try {
      params[item.substr(0, eq)] = json::parse(item.substr(eq + 1));
    } catch (const json::exception&) {
      throw ConfigError("driver: cannot parse value in '" + item + "'");
    }
  }

  DriverSpec spec;
  spec.seed = seed;
  try {
    if (params.contains("seed")) spec.seed = params.at("seed").get<std::uint64_t>();
    if (kind == "constant") {
      spec.kind = DriverKind::constant;
      spec.a = params.value("a", 1.0);
      spec.b = params.value("b", 1.0);
    } else if (kind == "iid_uniform") {
      spec.kind = DriverKind::iid_uniform;
      spec.a_range = params.value("a", std::array<double, 2>{0.0, 1.0});
      spec.b_range = params.value("b", std::array<double, 2>{0.0, 1.0});
    } else if (kind == "finite_markov") {
      spec.kind = DriverKind::finite_markov;
      spec.transition = params.at("P").get<std::vector<std::vector<double>>>();
      for (const auto& row : params.at("ab")) spec.states.emplace_back(row.at(0).get<double>(), row.at(1).get<double>());
    } else if (kind == "rotation") {
      spec.kind = DriverKind::rotation;
      spec.alpha = params.at("alpha").get<double>();
      spec.a_coef = params.at("a").get<std::vector<double>>();
      spec.b_coef = params.at("b").get<std::vector<double>>();
    } else {
      throw ConfigError("driver: unknown kind '" + kind + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("driver: bad parameters: ") + e.what());
  }
  spec.validate();
  return spec;
}

std::string DriverSpec::to_string() const {
  using nlohmann::json;
  std::ostringstream out;
  out.precision(17);
  switch (kind) {
    case DriverKind::constant:
      out << "constant:a=" << a << ";b=" << b;
      break;
    case DriverKind::iid_uniform:
      out << "iid_uniform:a=" << json(a_range).dump() << ";b=" << json(b_range).dump();
      break;
    case DriverKind::finite_markov: {
      json ab = json::array();
      for (const auto& [sa, sb] : states) ab.push_back({sa, sb});
      out << "finite_markov:P=" << json(transition).dump() << ";ab=" << ab.dump();
      break;
    }
    case DriverKind::rotation:
      out << "rotation:alpha=" << alpha << ";a=" << json(a_coef).dump() << ";b=" << json(b_coef).dump();
      break;
  }
  return out.str();
}

void DriverSpec::validate() const {
  switch (kind) {
    case DriverKind::constant:
      check_unit(a, "a");
      check_unit(b, "b");
      if (a == 0.0 || b == 0.0) throw ConfigError("driver: a and b must not vanish identically");
      break;
    case DriverKind::iid_uniform:
      for (double v : a_range) check_unit(v, "a range");
      for (double v : b_range) check_unit(v, "b range");
      if (a_range[0] > a_range[1] || b_range[0] > b_range[1]) throw ConfigError("driver: empty uniform range");
      if (a_range[1] == 0.0 || b_range[1] == 0.0) throw ConfigError("driver: a and b must not vanish identically");
      break;
    case DriverKind::finite_markov: {
      if (transition.empty() || transition.size() != states.size()) {
        throw ConfigError("driver: transition matrix and state list sizes differ");
      }
      for (const auto& row : transition) {
        if (row.size() != transition.size()) throw ConfigError("driver: transition matrix is not square");
        double sum = 0.0;
        for (double p : row) {
          if (!(p >= 0.0)) throw ConfigError("driver: negative transition probability");
          sum += p;
        }
        if (std::fabs(sum - 1.0) > kRowSumTolerance) throw ConfigError("driver: transition matrix is not stochastic");
      }
      bool any_a = false;
      bool any_b = false;
      for (const auto& [sa, sb] : states) {
        check_unit(sa, "state a");
        check_unit(sb, "state b");
        any_a |= sa > 0;
        any_b |= sb > 0;
      }
      if (!any_a || !any_b) throw ConfigError("driver: a and b must not vanish identically");
      break;
    }
    case DriverKind::rotation: {
      if (!std::isfinite(alpha)) throw ConfigError("driver: rotation angle must be finite");
      for (const auto* coef : {&a_coef, &b_coef}) {
        if (coef->empty()) throw ConfigError("driver: empty trigonometric coefficient list");
        auto [lo, hi] = trig_range(*coef);
        if (lo < 0.0 || hi > 1.0) throw ConfigError("driver: trigonometric polynomial may leave [0,1]");
        bool nonzero = false;
        for (double c : *coef) nonzero |= c != 0.0;
        if (!nonzero) throw ConfigError("driver: a and b must not vanish identically");
      }
      break;
    }
  }
}

DriverOrbit generate(const DriverSpec& spec, std::size_t n) {
  if (n == 0) throw ConfigError("generate: orbit length must be positive");
  spec.validate();
  DriverOrbit orbit;
  orbit.samples.reserve(n);
  std::mt19937_64 rng(spec.seed);
  switch (spec.kind) {
    case DriverKind::constant:
      orbit.samples.assign(n, {spec.a, spec.b});
      break;
    case DriverKind::iid_uniform:
      for (std::size_t j = 0; j < n; ++j) {
        double ua = uniform01(rng);
        double ub = uniform01(rng);
        orbit.samples.emplace_back(spec.a_range[0] + (spec.a_range[1] - spec.a_range[0]) * ua,
                                   spec.b_range[0] + (spec.b_range[1] - spec.b_range[0]) * ub);
      }
      break;
    case DriverKind::finite_markov: {
      auto pi = stationary_distribution(spec.transition);
      std::size_t state = sample_row(pi, uniform01(rng));
      for (std::size_t j = 0; j < n; ++j) {
        orbit.samples.push_back(spec.states[state]);
        state = sample_row(spec.transition[state], uniform01(rng));
      }
      break;
    }
    case DriverKind::rotation: {
      double theta0 = uniform01(rng);
      for (std::size_t j = 0; j < n; ++j) {
        double t = frac(theta0 + static_cast<double>(j) * spec.alpha);
        orbit.samples.emplace_back(trig_poly(spec.a_coef, t), trig_poly(spec.b_coef, t));
      }
      break;
    }
  }
  return orbit;
}

DriverOrbit generate_past(const DriverSpec& spec, std::size_t n) {
  if (n == 0) throw ConfigError("generate_past: orbit length must be positive");
  spec.validate();
  DriverOrbit orbit;
  orbit.samples.reserve(n);
  switch (spec.kind) {
    case DriverKind::constant:
      orbit.samples.assign(n, {spec.a, spec.b});
      break;
    case DriverKind::iid_uniform: {
      auto rng = past_stream(spec.seed);
      for (std::size_t j = 0; j < n; ++j) {
        double ua = uniform01(rng);
        double ub = uniform01(rng);
        orbit.samples.emplace_back(spec.a_range[0] + (spec.a_range[1] - spec.a_range[0]) * ua,
                                   spec.b_range[0] + (spec.b_range[1] - spec.b_range[0]) * ub);
      }
      break;
    }
    case DriverKind::finite_markov: {
      // Re-draw the time-0 state exactly as generate() does, then run the time reversal.
      std::mt19937_64 rng(spec.seed);
      auto pi = stationary_distribution(spec.transition);
      std::size_t state = sample_row(pi, uniform01(rng));
      auto reverse = reversed_chain(spec.transition, pi);
      auto back = past_stream(spec.seed);
      for (std::size_t j = 0; j < n; ++j) {
        state = sample_row(reverse[state], uniform01(back));
        orbit.samples.push_back(spec.states[state]);
      }
      break;
    }
    case DriverKind::rotation: {
      std::mt19937_64 rng(spec.seed);
      double theta0 = uniform01(rng);
      for (std::size_t j = 1; j <= n; ++j) {
        double t = frac(theta0 - static_cast<double>(j) * spec.alpha);
        orbit.samples.emplace_back(trig_poly(spec.a_coef, t), trig_poly(spec.b_coef, t));
      }
      break;
    }
  }
  return orbit;
}

std::vector<double> stationary_distribution(const std::vector<std::vector<double>>& transition) {
  // Solve pi (P - I) = 0 with sum(pi) = 1 replacing the last equation.
  std::size_t n = transition.size();
  std::vector<std::vector<double>> m(n, std::vector<double>(n + 1, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) m[i][j] = transition[j][i] - (i == j ? 1.0 : 0.0);
  }
  for (std::size_t j = 0; j < n; ++j) m[n - 1][j] = 1.0;
  m[n - 1][n] = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::fabs(m[r][col]) > std::fabs(m[piv][col])) piv = r;
    }
    if (std::fabs(m[piv][col]) < 1e-300) throw ConfigError("driver: chain has no unique stationary distribution");
    std::swap(m[piv], m[col]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      double f = m[r][col] / m[col][col];
      for (std::size_t c = col; c <= n; ++c) m[r][c] -= f * m[col][c];
    }
  }
  std::vector<double> pi(n);
  for (std::size_t i = 0; i < n; ++i) pi[i] = std::max(0.0, m[i][n] / m[i][i]);
  return pi;
}

double mean_ab(const DriverSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case DriverKind::constant:
      return spec.a + spec.b;
    case DriverKind::iid_uniform:
      return 0.5 * (spec.a_range[0] + spec.a_range[1]) + 0.5 * (spec.b_range[0] + spec.b_range[1]);
    case DriverKind::finite_markov: {
      auto pi = stationary_distribution(spec.transition);
      double m = 0.0;
      for (std::size_t i = 0; i < pi.size(); ++i) m += pi[i] * (spec.states[i].first + spec.states[i].second);
      return m;
    }
    case DriverKind::rotation: {
      // Trapezoid rule on the circle is exact for trigonometric polynomials of degree < nodes.
      std::size_t degree = std::max(spec.a_coef.size(), spec.b_coef.size());
      std::size_t nodes = std::max<std::size_t>(4096, 4 * degree);
      double sum = 0.0;
      for (std::size_t i = 0; i < nodes; ++i) {
        double t = static_cast<double>(i) / static_cast<double>(nodes);
        sum += trig_poly(spec.a_coef, t) + trig_poly(spec.b_coef, t);
      }
      return sum / static_cast<double>(nodes);
    }
  }
  return 0.0;
}

std::vector<PairedTentMap<double>> fibre_maps(const DriverOrbit& orbit, double eps) {
  std::vector<PairedTentMap<double>> maps;
  maps.reserve(orbit.size());
  for (const auto& [a, b] : orbit.samples) maps.emplace_back(eps * a, eps * b);
  return maps;
}

std::vector<PairedTentMap<Rational>> fibre_maps(const DriverOrbit& orbit, const Rational& eps) {
  std::vector<PairedTentMap<Rational>> maps;
  maps.reserve(orbit.size());
  for (const auto& [a, b] : orbit.samples) maps.emplace_back(Rational(eps * Rational(a)), Rational(eps * Rational(b)));
  return maps;
}

Matrix2 two_state_matrix(double a, double b, double eps, TwoStateModel model) {
  double pa = eps * a;
  double pb = eps * b;
  if (model == TwoStateModel::exact_overlap) {
    pa = pa / (1.0 + pa);
    pb = pb / (1.0 + pb);
  }
  return Matrix2{{{1.0 - pb, pa}, {pb, 1.0 - pa}}};
}

double mc_second_exponent(const DriverOrbit& orbit, double eps) {
  // Running mean: a constant driver returns log(1 - eps(a+b)) bit for bit.
  double mean = 0.0;
  std::size_t k = 0;
  for (const auto& [a, b] : orbit.samples) {
    double det = 1.0 - eps * (a + b);
    if (!(det > 0.0)) throw DomainError("mc_second_exponent: singular two-state determinant (eps(a+b) >= 1)");
    mean += (std::log(det) - mean) / static_cast<double>(++k);
  }
  return mean;
}

double mc_second_exponent(const DriverSpec& spec, double eps, std::size_t n) {
  return mc_second_exponent(generate(spec, n), eps);
}

TwoExponents mc_cocycle_exponents_qr(const DriverOrbit& orbit, double eps, TwoStateModel model) {
  // QR iteration on the transposed product A_0^T A_1^T ... A_{n-1}^T, which has the
  // singular values of A_{n-1} ... A_0. Starting from (1,1)/sqrt2, the left fixed
  // vector of every A_j, removes the O(1/n) transient from the top exponent.
  const double r2 = std::sqrt(0.5);
  std::array<double, 2> q1{r2, r2};
  std::array<double, 2> q2{r2, -r2};
  double log1 = 0.0;
  double log2 = 0.0;
  for (std::size_t j = orbit.size(); j-- > 0;) {
    auto [a, b] = orbit.samples[j];
    if (!(eps * (a + b) < 1.0)) throw DomainError("mc_cocycle_exponents_qr: singular two-state determinant");
    Matrix2 m = two_state_matrix(a, b, eps, model);
    auto apply_t = [&](const std::array<double, 2>& v) {
      return std::array<double, 2>{m[0][0] * v[0] + m[1][0] * v[1], m[0][1] * v[0] + m[1][1] * v[1]};
    };
    auto v1 = apply_t(q1);
    double r11 = std::hypot(v1[0], v1[1]);
    q1 = {v1[0] / r11, v1[1] / r11};
    auto v2 = apply_t(q2);
    double r12 = q1[0] * v2[0] + q1[1] * v2[1];
    v2 = {v2[0] - r12 * q1[0], v2[1] - r12 * q1[1]};
    double r22 = std::hypot(v2[0], v2[1]);
    if (!(r22 > 0.0)) throw NumericalAnomaly("mc_cocycle_exponents_qr: rank collapse");
    q2 = {v2[0] / r22, v2[1] / r22};
    log1 += std::log(r11);
    log2 += std::log(r22);
  }
  double n = static_cast<double>(orbit.size());
  return {log1 / n, log2 / n};
}

TwoExponents mc_cocycle_exponents_qr(const DriverSpec& spec, double eps, std::size_t n, TwoStateModel model) {
  return mc_cocycle_exponents_qr(generate(spec, n), eps, model);
}

}  // namespace ptm
