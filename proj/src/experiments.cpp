#include "ptm/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <exception>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

namespace ptm {

namespace {

std::string trim(std::string_view s) {
  auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return std::string(s);
}

template <class T>
T parse_unsigned(std::string_view key, std::string_view text) {
  std::string s = trim(text);
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError("'" + std::string(key) + "' expects a nonnegative integer, got '" + s + "'");
  }
  return value;
}

double parse_real(std::string_view key, std::string_view text) {
  std::string s = trim(text);
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("'" + std::string(key) + "' expects a number, got '" + s + "'");
}

bool parse_bool(std::string_view key, std::string_view text) {
  std::string s = trim(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw ConfigError("'" + std::string(key) + "' expects a boolean, got '" + s + "'");
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t comma = text.find(',', start);
    if (comma == std::string_view::npos) comma = text.size();
    std::string item = trim(text.substr(start, comma - start));
    if (!item.empty()) out.push_back(item);
    start = comma + 1;
  }
  return out;
}

// Runs fn(i) for i < n on up to `threads` workers; the first failure by index is rethrown.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

nlohmann::json envelope(const ExperimentConfig& cfg) {
  return {{"command", cfg.command}, {"config", cfg.to_json()}, {"config_hash", hex64(cfg.hash())}};
}

bool any_anomaly(const SpectrumReport& rep) {
  return rep.lambda1.anomaly || rep.lambda2.anomaly || (rep.lambda3 && rep.lambda3->anomaly);
}

std::string utc_timestamp() {
  std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

void ExperimentConfig::set(std::string_view raw_key, std::string_view value) {
  const std::string key = trim(raw_key);
  const std::string v = trim(value);
  if (key == "command") {
    command = v;
  } else if (key == "eps") {
    eps_text = split_list(v);
  } else if (key == "driver") {
    driver_text = v;
  } else if (key == "seed") {
    seed = parse_unsigned<std::uint64_t>(key, v);
  } else if (key == "backend") {
    backend = v;
  } else if (key == "bins") {
    bins = parse_unsigned<std::size_t>(key, v);
  } else if (key == "steps") {
    steps = parse_unsigned<std::size_t>(key, v);
  } else if (key == "reortho") {
    reortho = parse_unsigned<std::size_t>(key, v);
  } else if (key == "coarsen_tol") {
    coarsen_tol = parse_real(key, v);
  } else if (key == "out") {
    out = v;
  } else if (key == "threads") {
    threads = parse_unsigned<std::size_t>(key, v);
  } else if (key == "rational") {
    rational = parse_bool(key, v);
  } else if (key == "lambda3") {
    lambda3 = parse_bool(key, v);
  } else if (key == "qr") {
    qr = parse_unsigned<std::size_t>(key, v);
  } else if (key == "samples") {
    samples = parse_unsigned<std::size_t>(key, v);
  } else if (key == "zero_mass") {
    zero_mass = parse_bool(key, v);
  } else if (key == "sampler") {
    sampler = v;
  } else if (key == "depth") {
    depth = parse_unsigned<std::size_t>(key, v);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

ExperimentConfig ExperimentConfig::parse(std::string_view text) {
  ExperimentConfig cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    cfg.set(std::string_view(line).substr(0, eq), std::string_view(line).substr(eq + 1));
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void ExperimentConfig::validate() const {
  static const std::vector<std::string> commands{"ulam", "lyapunov", "sweep", "cone-check", "mc-compare", "oseledets"};
  if (std::find(commands.begin(), commands.end(), command) == commands.end()) {
    throw ConfigError("unknown command '" + command + "'");
  }
  if (eps_text.empty()) throw ConfigError("eps list is empty");
  for (const auto& e : eps_exact()) {
    if (e < 0 || e > 1) throw ConfigError("eps must lie in [0,1], got " + e.get_str());
  }
  driver().validate();
  if (backend != "ulam" && backend != "exact") throw ConfigError("backend must be 'ulam' or 'exact'");
  if (bins != 0 && (bins < 2 || bins % 2 != 0)) throw ConfigError("bins must be even and >= 2");
  if (steps < 1) throw ConfigError("steps must be at least 1");
  if (reortho < 1) throw ConfigError("reortho must be at least 1");
  if (!(coarsen_tol >= 0.0)) throw ConfigError("coarsen_tol must be nonnegative");
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (qr > 16) throw ConfigError("qr takes at most 16 vectors");
  if (sampler != "admissible" && sampler != "unrestricted") {
    throw ConfigError("sampler must be 'admissible' or 'unrestricted'");
  }
  const bool single = command == "ulam" || command == "oseledets";
  if (single && eps_text.size() != 1) throw ConfigError(command + " takes a single eps");
  if (command == "cone-check") {
    for (const auto& e : eps_exact()) {
      if (e <= 0 || e >= Rational(1, 4)) throw ConfigError("cone-check needs 0 < eps < 1/4");
    }
    if (samples < 1) throw ConfigError("samples must be at least 1");
  }
  if (command == "ulam" && bins == 0) throw ConfigError("ulam needs an explicit bin count");
}

std::vector<Rational> ExperimentConfig::eps_exact() const {
  std::vector<Rational> out;
  for (const auto& t : eps_text) out.push_back(parse_rational(t));
  return out;
}

std::vector<double> ExperimentConfig::eps_values() const {
  std::vector<double> out;
  for (const auto& e : eps_exact()) out.push_back(ptm::to_double(e));
  std::sort(out.begin(), out.end());
  return out;
}

DriverSpec ExperimentConfig::driver() const { return DriverSpec::parse(driver_text, seed); }

Backend ExperimentConfig::backend_for(double eps) const {
  if (backend == "exact") return Backend::exact(coarsen_tol);
  return Backend::ulam(bins != 0 ? bins : recommended_bins(eps));
}

CocycleRun ExperimentConfig::run_for(double eps) const {
  CocycleRun run;
  run.spec = driver();
  run.eps = eps;
  run.n_steps = steps;
  run.backend = backend_for(eps);
  run.reortho_period = reortho;
  return run;
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json eps = nlohmann::json::array();
  for (const auto& e : eps_exact()) eps.push_back(e.get_str());
  return {{"command", command},     {"eps", eps},
          {"driver", driver().to_string()},
          {"seed", seed},           {"backend", backend},
          {"bins", bins},           {"steps", steps},
          {"reortho", reortho},     {"coarsen_tol", coarsen_tol},
          {"rational", rational},   {"lambda3", lambda3},
          {"qr", qr},               {"samples", samples},
          {"zero_mass", zero_mass}, {"sampler", sampler},
          {"depth", depth}};
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a64(to_json().dump()); }

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t x) {
  std::ostringstream s;
  s << "0x" << std::hex << std::setw(16) << std::setfill('0') << x;
  return s.str();
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::ostringstream s;
  s << std::setprecision(17) << x;
  return s.str();
}

UlamCommandResult cmd_ulam(const ExperimentConfig& cfg, std::ostream& out) {
  const Rational eps = cfg.eps_exact().front();
  const auto orbit = generate(cfg.driver(), 1);
  const auto [a, b] = orbit.samples.front();
  UlamCommandResult res;
  res.n = cfg.bins;
  res.rational = cfg.rational;

  auto emit = [&](const auto& m, const std::string& arithmetic) {
    res.nonzeros = m.nonzeros();
    res.rows = row_sum_report(m);
    out << "# eps=" << eps.get_str() << " a=" << format_double(a) << " b=" << format_double(b)
        << " arithmetic=" << arithmetic << '\n';
    out << "# row_sum_max_deviation=" << format_double(res.rows.max_deviation)
        << " row_sums_exact=" << (res.rows.exact ? "true" : "false") << '\n';
    out << "# config_hash=" << hex64(cfg.hash()) << '\n';
    write_coordinate(out, m);
  };
  if (cfg.rational) {
    // a, b are doubles from the driver; every double is an exact dyadic rational.
    PairedTentMap<Rational> map(Rational(eps * Rational(a)), Rational(eps * Rational(b)));
    emit(build_ulam(map, cfg.bins), "rational");
  } else {
    PairedTentMap<double> map(ptm::to_double(eps) * a, ptm::to_double(eps) * b);
    emit(build_ulam(map, cfg.bins), "double");
  }
  return res;
}

int cmd_lyapunov(const ExperimentConfig& cfg, std::ostream& out) {
  const auto eps = cfg.eps_values();
  std::vector<SpectrumReport> reports(eps.size());
  // Each run already uses the whole orbit; parallelize across eps only.
  parallel_for(eps.size(), cfg.threads, [&](std::size_t i) {
    const CocycleRun run = cfg.run_for(eps[i]);
    const std::size_t q = run.backend.kind == Backend::Kind::ulam ? cfg.qr : 0;
    reports[i] = spectrum(run, cfg.lambda3, q);
  });
  nlohmann::json doc = envelope(cfg);
  doc["results"] = nlohmann::json::array();
  int code = exit_ok;
  for (const auto& r : reports) {
    doc["results"].push_back(r.to_json());
    if (any_anomaly(r)) code = exit_anomaly;
  }
  out << doc.dump(2) << '\n';
  return code;
}

LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("least_squares needs two or more paired points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double den = n * sxx - sx * sx;
  if (den == 0.0) throw DomainError("least_squares: abscissae are all equal");
  LineFit fit;
  fit.slope = (n * sxy - sx * sy) / den;
  fit.intercept = (sy - fit.slope * sx) / n;
  fit.slope_through_origin = sxy / sxx;
  return fit;
}

SweepResult run_sweep(const ExperimentConfig& cfg) {
  const auto eps = cfg.eps_values();
  const DriverSpec spec = cfg.driver();
  SweepResult res;
  res.mean_ab = mean_ab(spec);
  res.rows.resize(eps.size());
  parallel_for(eps.size(), cfg.threads, [&](std::size_t i) {
    const CocycleRun run = cfg.run_for(eps[i]);
    const Lambda2Estimate l2 = lambda2_estimate(run);
    SweepRow& row = res.rows[i];
    row.eps = eps[i];
    row.lambda2 = l2.value;
    row.err = l2.error;
    row.anomaly = l2.anomaly;
    row.mc_lambda2 = mc_second_exponent(generate(spec, cfg.steps), eps[i]);
    row.predicted = -eps[i] * res.mean_ab;
    if (eps[i] > 0) row.r = std::fabs(row.lambda2 - row.predicted) / (eps[i] * eps[i] * std::fabs(std::log(eps[i])));
  });
  if (res.rows.size() >= 2 && res.rows.front().eps != res.rows.back().eps) {
    std::vector<double> x, y;
    for (const auto& r : res.rows) {
      x.push_back(r.eps);
      y.push_back(r.lambda2);
    }
    res.fit = least_squares(x, y);
  }
  const SweepRow* lo = nullptr;
  const SweepRow* hi = nullptr;
  for (const auto& r : res.rows) {
    if (r.eps <= 0) continue;
    if (!lo) lo = &r;
    hi = &r;
  }
  if (lo && hi && hi->r > 0) res.r_ratio = lo->r / hi->r;
  return res;
}

void write_sweep_csv(std::ostream& out, const ExperimentConfig& cfg, const SweepResult& res) {
  const DriverSpec spec = cfg.driver();
  out << "eps,lambda2,err,mc_lambda2,predicted,r,seed,backend,n_steps\n";
  for (const auto& r : res.rows) {
    out << format_double(r.eps) << ',' << format_double(r.lambda2) << ',' << format_double(r.err) << ','
        << format_double(r.mc_lambda2) << ',' << format_double(r.predicted) << ',' << format_double(r.r) << ','
        << spec.seed << ',' << cfg.backend_for(r.eps).to_string() << ',' << cfg.steps << '\n';
  }
  out << "# driver=" << spec.to_string() << '\n';
  out << "# mean_ab=" << format_double(res.mean_ab) << '\n';
  out << "# slope=" << format_double(res.fit.slope) << " intercept=" << format_double(res.fit.intercept)
      << " slope_through_origin=" << format_double(res.fit.slope_through_origin) << '\n';
  out << "# predicted_slope=" << format_double(-res.mean_ab) << '\n';
  out << "# r_ratio=" << format_double(res.r_ratio) << '\n';
  out << "# config_hash=" << hex64(cfg.hash()) << '\n';
}

int cmd_sweep(const ExperimentConfig& cfg, std::ostream& out) {
  const SweepResult res = run_sweep(cfg);
  write_sweep_csv(out, cfg, res);
  for (const auto& r : res.rows) {
    if (r.anomaly) return exit_anomaly;
  }
  return exit_ok;
}

int cone_exit_code(const std::vector<InvarianceReport>& reports) {
  for (const auto& r : reports) {
    if (r.asserted && !r.ok()) return exit_cone_violation;
  }
  return exit_ok;
}

int cmd_cone_check(const ExperimentConfig& cfg, std::ostream& out) {
  const auto eps = cfg.eps_exact();
  const DriverSpec spec = cfg.driver();
  InvarianceOptions opts;
  opts.zero_mass = cfg.zero_mass;
  opts.mode = cfg.sampler == "unrestricted" ? SamplerMode::unrestricted : SamplerMode::admissible;
  std::vector<InvarianceReport> reports(eps.size());
  parallel_for(eps.size(), cfg.threads,
               [&](std::size_t i) { reports[i] = invariance_trial(spec, eps[i], cfg.samples, opts); });

  nlohmann::json doc = envelope(cfg);
  doc["results"] = nlohmann::json::array();
  for (const auto& r : reports) {
    nlohmann::json j = r.to_json();
    j["seed"] = spec.seed;
    j["backend"] = "rational";
    j["n_steps"] = 1;
    doc["results"].push_back(std::move(j));
  }
  out << doc.dump(2) << '\n';
  return cone_exit_code(reports);
}

nlohmann::json mc_compare(const ExperimentConfig& cfg) {
  const DriverSpec spec = cfg.driver();
  const DriverOrbit orbit = generate(spec, cfg.steps);
  const double m = mean_ab(spec);
  nlohmann::json results = nlohmann::json::array();
  for (double eps : cfg.eps_values()) {
    const auto ideal = mc_cocycle_exponents_qr(orbit, eps, TwoStateModel::idealized);
    const auto overlap = mc_cocycle_exponents_qr(orbit, eps, TwoStateModel::exact_overlap);
    results.push_back({{"eps", eps},
                       {"seed", spec.seed},
                       {"backend", "two_state"},
                       {"n_steps", cfg.steps},
                       {"idealized", {{"lambda_1", ideal.lambda1}, {"lambda_2", ideal.lambda2}}},
                       {"exact_overlap", {{"lambda_1", overlap.lambda1}, {"lambda_2", overlap.lambda2}}},
                       {"log_det_average", mc_second_exponent(orbit, eps)},
                       {"predicted", -eps * m},
                       {"gap", overlap.lambda2 - ideal.lambda2}});
  }
  return results;
}

int cmd_mc_compare(const ExperimentConfig& cfg, std::ostream& out) {
  nlohmann::json doc = envelope(cfg);
  doc["results"] = mc_compare(cfg);
  out << doc.dump(2) << '\n';
  return exit_ok;
}

OseledetsResult cmd_oseledets(const ExperimentConfig& cfg, std::ostream& out) {
  const double eps = cfg.eps_values().front();
  const CocycleRun run = cfg.run_for(eps);
  OseledetsResult res = oseledets_vector_2(run, cfg.depth);
  const std::vector<std::string> header{
      "eps=" + cfg.eps_exact().front().get_str(),
      "driver=" + run.spec.to_string(),
      "seed=" + std::to_string(run.spec.seed),
      "backend=" + run.backend.to_string(),
      "depth=" + std::to_string(res.depth),
      "bv_norm=" + format_double(res.norm.bv),
      "l1=" + format_double(res.norm.l1),
      "var0c=" + format_double(res.norm.var0c),
      "integral_plus=" + format_double(res.vector.integral_plus()),
      "config_hash=" + hex64(cfg.hash()),
  };
  write_two_column(out, res.vector, header);
  return res;
}

int run_command(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto started = std::chrono::steady_clock::now();
  const std::string stamp = utc_timestamp();
  int code = exit_ok;
  std::ostringstream body;
  std::string summary;
  try {
    cfg.validate();
    if (cfg.command == "ulam") {
      const auto r = cmd_ulam(cfg, body);
      summary = nlohmann::json{{"n", r.n},
                               {"nonzeros", r.nonzeros},
                               {"row_sum_max_deviation", r.rows.max_deviation},
                               {"row_sums_exact", r.rows.exact}}
                    .dump();
    } else if (cfg.command == "lyapunov") {
      code = cmd_lyapunov(cfg, body);
    } else if (cfg.command == "sweep") {
      code = cmd_sweep(cfg, body);
    } else if (cfg.command == "cone-check") {
      code = cmd_cone_check(cfg, body);
    } else if (cfg.command == "mc-compare") {
      code = cmd_mc_compare(cfg, body);
    } else {
      cmd_oseledets(cfg, body);
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const DomainError& e) {
    err << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const NumericalAnomaly& e) {
    err << "numerical anomaly: " << e.what() << '\n';
    return exit_anomaly;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_anomaly;
  }

  if (cfg.out.empty()) {
    out << body.str();
  } else {
    std::ofstream file(cfg.out, std::ios::binary);
    if (!(file << body.str())) {
      err << "config error: cannot write '" << cfg.out << "'\n";
      return exit_config;
    }
    if (!summary.empty()) out << summary << '\n';
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    std::ofstream log(cfg.out + ".log", std::ios::app);
    log << stamp << " command=" << cfg.command << " config_hash=" << hex64(cfg.hash()) << " exit=" << code
        << " seconds=" << std::fixed << std::setprecision(3) << seconds << '\n';
  }
  if (code == exit_anomaly) err << "numerical anomaly flagged in results\n";
  if (code == exit_cone_violation) err << "cone invariance violated in the asserted regime\n";
  return code;
}

}  // namespace ptm
