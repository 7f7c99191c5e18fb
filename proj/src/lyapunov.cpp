#include "ptm/lyapunov.hpp"

#include "ptm/quarantine.hpp"
#include "ptm/ulam.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace ptm {

std::string Backend::to_string() const {
  std::ostringstream out;
  if (kind == Kind::ulam) {
    out << "ulam(" << n_bins << ")";
  } else {
    out << "exact_pc(" << coarsen_tol << ")";
  }
  return out.str();
}

std::size_t recommended_bins(double eps, std::size_t floor) {
  std::size_t n = std::max<std::size_t>(floor, 2);
  if (n % 2) ++n;
  if (eps > 0) {
    while (static_cast<double>(n) < 64.0 / eps) n *= 2;
  }
  return n;
}

std::vector<std::string> CocycleRun::validate() const {
  spec.validate();
  if (!(eps >= 0.0 && eps <= 1.0)) throw ConfigError("eps must lie in [0,1]");
  if (n_steps < 1) throw ConfigError("n_steps must be at least 1");
  if (reortho_period < 1) throw ConfigError("reortho_period must be at least 1");
  std::vector<std::string> warnings;
  if (backend.kind == Backend::Kind::ulam) {
    if (backend.n_bins < 2 || backend.n_bins % 2) throw ConfigError("Ulam backend needs an even bin count >= 2");
    if (eps > 0 && static_cast<double>(backend.n_bins) < 64.0 / eps) {
      std::ostringstream msg;
      msg << "n_bins = " << backend.n_bins << " is below 64/eps = " << 64.0 / eps
          << "; bins do not resolve the holes";
      warnings.push_back(msg.str());
    }
  } else if (!(backend.coarsen_tol >= 0.0)) {
    throw ConfigError("coarsen tolerance must be nonnegative");
  }
  return warnings;
}

nlohmann::json CocycleRun::to_json() const {
  return {{"eps", eps},
          {"driver", spec.to_string()},
          {"seed", spec.seed},
          {"backend", backend.to_string()},
          {"n_steps", n_steps},
          {"reortho_period", reortho_period}};
}

namespace {

constexpr std::size_t kBlocks = 10;

nlohmann::json finite_or_null(double x) {
  return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
}

// Jackknife over contiguous blocks of per-step (or per-period) log increments.
void jackknife(const std::vector<double>& increments, const std::vector<std::size_t>& weights, Estimate& est) {
  const std::size_t m = increments.size();
  if (m == 0) return;
  const double total_w = static_cast<double>(std::accumulate(weights.begin(), weights.end(), std::size_t{0}));
  const double total = std::accumulate(increments.begin(), increments.end(), 0.0);
  const std::size_t blocks = std::min(kBlocks, m);
  std::vector<double> sum(blocks, 0.0);
  std::vector<double> w(blocks, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t b = i * blocks / m;
    sum[b] += increments[i];
    w[b] += static_cast<double>(weights[i]);
  }
  est.block_rates.clear();
  for (std::size_t b = 0; b < blocks; ++b) est.block_rates.push_back(w[b] > 0 ? sum[b] / w[b] : 0.0);
  if (blocks < 2) return;
  std::vector<double> leave_out(blocks);
  for (std::size_t b = 0; b < blocks; ++b) leave_out[b] = (total - sum[b]) / (total_w - w[b]);
  double mean = std::accumulate(leave_out.begin(), leave_out.end(), 0.0) / static_cast<double>(blocks);
  double ss = 0.0;
  for (double x : leave_out) ss += (x - mean) * (x - mean);
  est.error = std::sqrt(static_cast<double>(blocks - 1) / static_cast<double>(blocks) * ss);
}

std::vector<PairedTentMap<double>> forward_maps(const CocycleRun& run, std::size_t length) {
  return fibre_maps(generate(run.spec, std::max<std::size_t>(length, 1)), run.eps);
}

// Bin-mass vectors pushed by Ulam matrices; fibres that repeat use a cached sparse matrix.
class UlamOps {
 public:
  using State = std::vector<double>;

  UlamOps(std::size_t n, std::vector<PairedTentMap<double>> maps) : n_(n), maps_(std::move(maps)) {
    std::map<std::pair<double, double>, std::size_t> index;
    slot_.reserve(maps_.size());
    for (const auto& m : maps_) {
      auto key = std::make_pair(m.eps_a(), m.eps_b());
      auto it = index.find(key);
      if (it == index.end()) {
        if (index.size() >= kMaxCached) {
          slot_.clear();
          cache_.clear();
          return;
        }
        it = index.emplace(key, index.size()).first;
      }
      slot_.push_back(it->second);
    }
    cache_.resize(index.size());
    for (const auto& [key, i] : index) cache_[i].emplace(build_ulam(PairedTentMap<double>(key.first, key.second), n_));
  }

  State make(const PCDensity<double>& f) const { return discretize(f, n_); }

  void push(State& v, std::size_t j) {
    if (!slot_.empty()) {
      v = ptm::apply(*cache_[slot_[j]], std::span<const double>(v));
      return;
    }
    tmp_.resize(n_);
    ulam_apply(maps_[j], v, tmp_, scratch_);
    v.swap(tmp_);
  }

  double integral(const State& v) const { return std::accumulate(v.begin(), v.end(), 0.0); }
  double integral_plus(const State& v) const {
    return std::accumulate(v.begin() + static_cast<std::ptrdiff_t>(n_ / 2), v.end(), 0.0);
  }
  void remove_mass(State& v) const {
    double c = integral(v) / static_cast<double>(n_);
    for (auto& x : v) x -= c;
  }
  void axpy(State& y, double a, const State& x) const {
    for (std::size_t i = 0; i < n_; ++i) y[i] += a * x[i];
  }
  void scale(State& v, double c) const {
    for (auto& x : v) x *= c;
  }
  BVNormReport<double> bv(const State& v) const {
    const double h = static_cast<double>(n_) / 2.0;
    double l1 = 0.0;
    double var = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      l1 += std::fabs(v[i]);
      if (i + 1 < n_ && i + 1 != n_ / 2) var += std::fabs(v[i + 1] - v[i]) * h;
    }
    return {l1, var, std::max(l1, var)};
  }
  bool is_zero(const State& v) const {
    return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
  }
  PCDensity<double> density(const State& v) const { return lift<double>(v, n_); }
  const std::vector<PairedTentMap<double>>& maps() const { return maps_; }

 private:
  static constexpr std::size_t kMaxCached = 16;
  std::size_t n_;
  std::vector<PairedTentMap<double>> maps_;
  std::vector<std::size_t> slot_;
  std::vector<std::optional<UlamMatrix<double>>> cache_;
  std::vector<double> tmp_;
  std::vector<double> scratch_;
};

// Exact piecewise-constant pushes, coarsened relative to the sup norm.
class ExactOps {
 public:
  using State = PCDensity<double>;

  ExactOps(double tol, std::vector<PairedTentMap<double>> maps) : tol_(tol), maps_(std::move(maps)) {}

  State make(const PCDensity<double>& f) const { return f; }
  void push(State& f, std::size_t j) const {
    f = transfer_pc(maps_[j], f);
    f = coarsen(f, tol_ * f.sup_abs());
  }
  double integral(const State& f) const { return f.integral(); }
  double integral_plus(const State& f) const { return f.integral_plus(); }
  void remove_mass(State& f) const {
    double c = f.integral() / 2.0;
    if (c != 0.0) f = f - PCDensity<double>::constant(c);
  }
  void axpy(State& y, double a, const State& x) const {
    if (a != 0.0) y = y + a * x;
  }
  void scale(State& f, double c) const { f *= c; }
  BVNormReport<double> bv(const State& f) const { return bv_norm(f); }
  bool is_zero(const State& f) const {
    return std::all_of(f.values().begin(), f.values().end(), [](double x) { return x == 0.0; });
  }
  PCDensity<double> density(const State& f) const { return f; }
  const std::vector<PairedTentMap<double>>& maps() const { return maps_; }

 private:
  double tol_;
  std::vector<PairedTentMap<double>> maps_;
};

template <class Fn>
auto with_backend(const CocycleRun& run, std::vector<PairedTentMap<double>> maps, Fn&& fn) {
  if (run.backend.kind == Backend::Kind::ulam) {
    UlamOps ops(run.backend.n_bins, std::move(maps));
    return fn(ops);
  }
  ExactOps ops(run.backend.coarsen_tol, std::move(maps));
  return fn(ops);
}

std::size_t psi_cadence(double eps) {
  if (eps <= 0.0 || eps >= 0.25) return 1;
  return std::max(1u, k_from_epsilon(eps));
}

PCDensity<double> default_lambda3_input() {
  return PCDensity<double>::indicator({0.1, 0.45}) + PCDensity<double>::indicator({-0.8, -0.3}, 0.7) +
         PCDensity<double>::indicator({0.6, 0.9}, -0.4);
}

PCDensity<double> centred(const PCDensity<double>& f) {
  double c = f.integral() / 2.0;
  return c == 0.0 ? f : f - PCDensity<double>::constant(c);
}

// Joint push of g and the sign orbit s, with the shared renormalization of psi_n.
template <class Ops>
struct PsiPush {
  Ops& ops;
  typename Ops::State g;
  typename Ops::State s;
  std::size_t period;
  std::size_t step = 0;

  void advance() {
    ops.push(g, step);
    ops.push(s, step);
    ++step;
    if (step % period == 0) {
      double c = ops.integral_plus(s);
      if (!(c > 0.0) || !std::isfinite(c)) throw NumericalAnomaly("psi: J+ integral of the sign push is not positive");
      ops.scale(g, 1.0 / c);
      ops.scale(s, 1.0 / c);
      ops.remove_mass(g);
      ops.remove_mass(s);
    }
  }
  double value() const {
    double den = ops.integral_plus(s);
    if (den == 0.0 || !std::isfinite(den)) throw NumericalAnomaly("psi: zero denominator");
    return ops.integral_plus(g) / den;
  }
};

}  // namespace

nlohmann::json Estimate::to_json() const {
  nlohmann::json j;
  j["value"] = finite_or_null(value);
  j["error"] = error;
  j["block_rates"] = nlohmann::json::array();
  for (double b : block_rates) j["block_rates"].push_back(finite_or_null(b));
  j["renormalizations"] = renormalizations;
  j["steps"] = steps;
  j["anomaly"] = anomaly;
  j["collapsed"] = collapsed;
  if (!note.empty()) j["note"] = note;
  return j;
}

Estimate lambda1_estimate(const CocycleRun& run, const std::optional<PCDensity<double>>& f) {
  run.validate();
  const PCDensity<double> start = f ? *f : PCDensity<double>::constant(0.5);
  const std::size_t n = run.n_steps;
  const std::size_t half = n / 2;
  return with_backend(run, forward_maps(run, n), [&](auto& ops) {
    auto state = ops.make(start);
    double bv_half = ops.bv(state).bv;
    for (std::size_t j = 0; j < n; ++j) {
      ops.push(state, j);
      if (j + 1 == half) bv_half = ops.bv(state).bv;
    }
    const double bv_end = ops.bv(state).bv;
    Estimate est;
    est.steps = n;
    if (!(bv_half > 0.0) || !(bv_end > 0.0)) {
      est.anomaly = true;
      est.collapsed = true;
      est.value = -std::numeric_limits<double>::infinity();
      est.note = "density vanished; lambda1 needs a mass-carrying input";
      return est;
    }
    est.value = std::log(bv_end / bv_half) / static_cast<double>(n - half);
    est.note = "rate over the second half of the orbit";
    return est;
  });
}

Lambda2Estimate lambda2_estimate(const CocycleRun& run) {
  run.validate();
  const std::size_t n = run.n_steps;
  return with_backend(run, forward_maps(run, n), [&](auto& ops) {
    auto s = ops.make(PCDensity<double>::sign());
    std::vector<double> inc;
    inc.reserve(n);
    const double bv0 = ops.bv(s).bv;
    double prev = ops.integral_plus(s);
    double log_scale = 0.0;
    Lambda2Estimate est;
    for (std::size_t j = 0; j < n; ++j) {
      ops.push(s, j);
      double cur = ops.integral_plus(s);
      if (!(cur > 0.0) || !std::isfinite(cur)) {
        throw NumericalAnomaly("lambda2: J+ integral of the sign push reached zero");
      }
      inc.push_back(std::log(cur / prev));
      prev = cur;
      if ((j + 1) % run.reortho_period == 0 || j + 1 == n) {
        ops.scale(s, 1.0 / cur);
        log_scale += std::log(cur);
        ops.remove_mass(s);
        prev = ops.integral_plus(s);
        ++est.renormalizations;
      }
    }
    est.steps = n;
    est.value = std::accumulate(inc.begin(), inc.end(), 0.0) / static_cast<double>(n);
    jackknife(inc, std::vector<std::size_t>(n, 1), est);
    est.bv_rate = (std::log(ops.bv(s).bv) + log_scale - std::log(bv0)) / static_cast<double>(n);
    return est;
  });
}

double psi_n(const CocycleRun& run, const PCDensity<double>& f, std::size_t n) {
  run.validate();
  return with_backend(run, forward_maps(run, n), [&](auto& ops) {
    PsiPush<std::remove_reference_t<decltype(ops)>> push{ops, ops.make(centred(f)),
                                                          ops.make(PCDensity<double>::sign()), run.reortho_period};
    for (std::size_t j = 0; j < n; ++j) push.advance();
    return push.value();
  });
}

PsiTrace psi_trace(const CocycleRun& run, const PCDensity<double>& f, double tol, std::size_t max_steps) {
  run.validate();
  if (!(tol > 0.0)) throw ConfigError("psi_star: tol must be positive");
  if (max_steps == 0) max_steps = run.n_steps;
  PsiTrace trace;
  trace.cadence = psi_cadence(run.eps);
  return with_backend(run, forward_maps(run, max_steps), [&](auto& ops) {
    PsiPush<std::remove_reference_t<decltype(ops)>> push{ops, ops.make(centred(f)),
                                                          ops.make(PCDensity<double>::sign()), run.reortho_period};
    while (push.step + trace.cadence <= max_steps) {
      for (std::size_t i = 0; i < trace.cadence; ++i) push.advance();
      trace.checkpoints.push_back(push.value());
      const std::size_t m = trace.checkpoints.size();
      if (m >= 2 && std::fabs(trace.checkpoints[m - 1] - trace.checkpoints[m - 2]) < tol) {
        trace.converged = true;
        break;
      }
    }
    trace.value = trace.checkpoints.empty() ? 0.0 : trace.checkpoints.back();
    // Mean contraction of successive differences while they are above rounding.
    std::vector<double> diffs;
    for (std::size_t i = 1; i < trace.checkpoints.size(); ++i) {
      double d = std::fabs(trace.checkpoints[i] - trace.checkpoints[i - 1]);
      if (d > 0.0) diffs.push_back(d);
    }
    if (diffs.size() >= 2) {
      trace.ratio = std::pow(diffs.back() / diffs.front(), 1.0 / static_cast<double>(diffs.size() - 1));
    }
    return trace;
  });
}

double psi_star(const CocycleRun& run, const PCDensity<double>& f, double tol) {
  auto trace = psi_trace(run, f, tol);
  if (!trace.converged) throw NumericalAnomaly("psi_star did not converge within the step budget");
  return trace.value;
}

Lambda3Estimate lambda3_estimate(const CocycleRun& run, const std::optional<PCDensity<double>>& f,
                                 std::size_t deflation_period) {
  run.validate();
  if (deflation_period < 1) throw ConfigError("deflation period must be at least 1");
  const PCDensity<double> raw = centred(f ? *f : default_lambda3_input());
  Lambda3Estimate est;
  auto trace = psi_trace(run, raw, 1e-13, std::min<std::size_t>(run.n_steps, 2000));
  est.psi_star_used = trace.value;
  if (!trace.converged) est.note = "psi_star not converged; using the last checkpoint";
  const PCDensity<double> start = raw - trace.value * PCDensity<double>::sign();

  const std::size_t n = run.n_steps;
  return with_backend(run, forward_maps(run, n), [&](auto& ops) {
    auto g = ops.make(start);
    auto s = ops.make(PCDensity<double>::sign());
    double b0 = ops.bv(g).bv;
    if (!(b0 > 0.0)) throw ConfigError("lambda3: input is zero after deflation");
    ops.scale(g, 1.0 / b0);
    std::vector<double> inc;
    std::vector<std::size_t> weights;
    std::size_t since = 0;
    for (std::size_t j = 0; j < n; ++j) {
      ops.push(g, j);
      ops.push(s, j);
      ++since;
      if ((j + 1) % deflation_period != 0 && j + 1 != n) continue;
      ops.remove_mass(g);
      double sp = ops.integral_plus(s);
      if (!(sp > 0.0)) throw NumericalAnomaly("lambda3: J+ integral of the sign push is not positive");
      double gp = ops.integral_plus(g);
      double before = ops.bv(g).bv;
      est.slow_fraction = before > 0.0 ? std::fabs(gp) / before : 0.0;
      ops.axpy(g, -gp / sp, s);
      ops.scale(s, 1.0 / sp);
      ops.remove_mass(s);
      double b = ops.bv(g).bv;
      if (!(b > 0.0) || ops.is_zero(g)) {
        // Faster than any exponential rather than an error; report it via `collapsed`.
        est.collapsed = true;
        est.value = -std::numeric_limits<double>::infinity();
        est.steps = j + 1;
        const std::size_t done = j + 1 - since;
        if (done > 0) est.pre_collapse_rate = std::accumulate(inc.begin(), inc.end(), 0.0) / static_cast<double>(done);
        est.note = "deflated orbit vanished exactly (finite-rank nilpotent part)";
        return est;
      }
      est.deflation_health = std::fabs(ops.integral_plus(g)) / b;
      inc.push_back(std::log(b));
      weights.push_back(since);
      since = 0;
      ops.scale(g, 1.0 / b);
      ++est.renormalizations;
    }
    est.steps = n;
    est.value = std::accumulate(inc.begin(), inc.end(), 0.0) / static_cast<double>(n);
    jackknife(inc, weights, est);
    return est;
  });
}

namespace {

// Modified Gram-Schmidt, applied twice; returns the diagonal of R.
std::vector<double> orthonormalize(std::vector<std::vector<double>>& q) {
  std::vector<double> r(q.size(), 0.0);
  for (std::size_t i = 0; i < q.size(); ++i) {
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t j = 0; j < i; ++j) {
        double h = std::inner_product(q[i].begin(), q[i].end(), q[j].begin(), 0.0);
        for (std::size_t t = 0; t < q[i].size(); ++t) q[i][t] -= h * q[j][t];
      }
    }
    double norm = std::sqrt(std::inner_product(q[i].begin(), q[i].end(), q[i].begin(), 0.0));
    r[i] = norm;
    if (norm > 0.0) {
      for (auto& x : q[i]) x /= norm;
    }
  }
  return r;
}

}  // namespace

SpectrumReport qr_spectrum(const CocycleRun& run, std::size_t q) {
  SpectrumReport rep;
  rep.warnings = run.validate();
  rep.run = run.to_json();
  if (run.backend.kind != Backend::Kind::ulam) throw ConfigError("qr_spectrum needs the ulam backend");
  if (q < 1 || q > 16) throw ConfigError("qr_spectrum: q must lie in 1..16");
  const std::size_t n = run.n_steps;
  const std::size_t bins = run.backend.n_bins;
  if (q > bins) throw ConfigError("qr_spectrum: q exceeds the bin count");

  UlamOps ops(bins, forward_maps(run, n));
  // Start from 1, sign and coarse random steps: rough starting vectors leave a
  // log-transient of order log(n_bins) in every exponent.
  std::mt19937_64 rng(run.spec.seed ^ 0x9E3779B97F4A7C15ULL);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<std::vector<double>> basis;
  basis.push_back(ops.make(PCDensity<double>::constant(1.0)));
  if (q > 1) basis.push_back(ops.make(PCDensity<double>::sign()));
  while (basis.size() < q) {
    std::vector<double> edges{-1.0, 0.0, 1.0};
    for (int c = 0; c < 6; ++c) edges.push_back(unit(rng));
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    std::vector<double> vals(edges.size() - 1);
    for (auto& v : vals) v = unit(rng);
    basis.push_back(ops.make(PCDensity<double>(edges, vals)));
  }
  orthonormalize(basis);

  std::vector<std::vector<double>> inc(q);
  std::vector<std::size_t> weights;
  std::size_t since = 0;
  std::size_t active = q;
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < active; ++i) ops.push(basis[i], j);
    ++since;
    if ((j + 1) % run.reortho_period != 0 && j + 1 != n) continue;
    basis.resize(active);
    auto r = orthonormalize(basis);
    for (std::size_t i = 0; i < active; ++i) {
      if (!(r[i] > 1e-300) || !std::isfinite(r[i])) {
        rep.qr_rank_collapse = true;
        rep.warnings.push_back("rank collapse at step " + std::to_string(j + 1) + "; q reduced to " +
                               std::to_string(i));
        active = i;
        break;
      }
      inc[i].push_back(std::log(r[i]));
    }
    weights.push_back(since);
    since = 0;
  }

  for (std::size_t i = 0; i < q; ++i) {
    if (inc[i].empty()) continue;
    std::size_t covered = std::accumulate(weights.begin(), weights.begin() + static_cast<std::ptrdiff_t>(inc[i].size()),
                                          std::size_t{0});
    double rate = std::accumulate(inc[i].begin(), inc[i].end(), 0.0) / static_cast<double>(covered);
    rep.qr_exponents.push_back(rate);
    Estimate blocks;
    jackknife(inc[i], std::vector<std::size_t>(weights.begin(), weights.begin() + static_cast<std::ptrdiff_t>(inc[i].size())),
              blocks);
    rep.qr_block_rates.push_back(blocks.block_rates);
  }
  std::sort(rep.qr_exponents.begin(), rep.qr_exponents.end(), std::greater<>());
  return rep;
}

OseledetsResult oseledets_vector_2(const CocycleRun& run, std::size_t pullback_depth) {
  run.validate();
  if (!run.spec.supports_pullback()) throw ConfigError("driver has no two-sided extension");
  if (pullback_depth < 1) throw ConfigError("pullback depth must be at least 1");
  auto past = fibre_maps(generate_past(run.spec, pullback_depth), run.eps);
  // Index pullback_depth - 1 holds time -depth, which acts first.
  std::reverse(past.begin(), past.end());
  OseledetsResult out;
  out.depth = pullback_depth;
  out.vector = with_backend(run, std::move(past), [&](auto& ops) {
    auto s = ops.make(PCDensity<double>::sign());
    for (std::size_t j = 0; j < pullback_depth; ++j) {
      ops.push(s, j);
      if ((j + 1) % run.reortho_period == 0 || j + 1 == pullback_depth) {
        double c = ops.integral_plus(s);
        if (!(c > 0.0)) throw NumericalAnomaly("oseledets: J+ integral vanished");
        ops.scale(s, 1.0 / c);
        ops.remove_mass(s);
      }
    }
    ops.scale(s, 1.0 / ops.integral_plus(s));
    return coarsen(ops.density(s), 0.0);
  });
  out.norm = bv_norm(out.vector);
  return out;
}

SpectrumReport spectrum(const CocycleRun& run, bool with_lambda3, std::size_t qr_q) {
  SpectrumReport rep;
  if (qr_q > 0 && run.backend.kind == Backend::Kind::ulam) {
    rep = qr_spectrum(run, qr_q);
  } else {
    rep.warnings = run.validate();
    rep.run = run.to_json();
  }
  rep.lambda1 = lambda1_estimate(run);
  rep.lambda2 = lambda2_estimate(run);
  if (with_lambda3) rep.lambda3 = lambda3_estimate(run);
  const auto orbit = generate(run.spec, run.n_steps);
  rep.mc_lambda2 = mc_second_exponent(orbit, run.eps);
  rep.predicted_lambda2 = -run.eps * mean_ab(run.spec);
  return rep;
}

nlohmann::json SpectrumReport::to_json() const {
  nlohmann::json j = run;
  j["lambda_1"] = finite_or_null(lambda1.value);
  j["lambda_2"] = finite_or_null(lambda2.value);
  j["lambda_3"] = lambda3 ? finite_or_null(lambda3->value) : nlohmann::json(nullptr);
  j["error_bars"] = {{"lambda_1", lambda1.error},
                     {"lambda_2", lambda2.error},
                     {"lambda_3", lambda3 ? lambda3->error : 0.0}};
  nlohmann::json diag;
  diag["lambda_1"] = lambda1.to_json();
  diag["lambda_2"] = lambda2.to_json();
  diag["lambda_2"]["bv_rate"] = lambda2.bv_rate;
  if (lambda3) {
    diag["lambda_3"] = lambda3->to_json();
    diag["lambda_3"]["psi_star"] = lambda3->psi_star_used;
    diag["lambda_3"]["deflation_health"] = lambda3->deflation_health;
    diag["lambda_3"]["slow_fraction"] = lambda3->slow_fraction;
    if (lambda3->collapsed) diag["lambda_3"]["pre_collapse_rate"] = finite_or_null(lambda3->pre_collapse_rate);
  }
  diag["qr_exponents"] = nlohmann::json::array();
  for (double x : qr_exponents) diag["qr_exponents"].push_back(finite_or_null(x));
  diag["qr_block_rates"] = qr_block_rates;
  diag["qr_rank_collapse"] = qr_rank_collapse;
  diag["mc_lambda2"] = mc_lambda2;
  diag["predicted_lambda2"] = predicted_lambda2;
  diag["warnings"] = warnings;
  j["diagnostics"] = diag;
  return j;
}

}  // namespace ptm
