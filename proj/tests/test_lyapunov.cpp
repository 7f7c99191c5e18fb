#include "oracles.hpp"
#include "ptm/lyapunov.hpp"

#include <doctest.h>

#include <cmath>

using oracle::q;
using ptm::Backend;
using ptm::CocycleRun;
using ptm::DriverSpec;
using ptm::PCDensity;
using ptm::Rational;
using DD = PCDensity<double>;

namespace {

CocycleRun make_run(double eps, std::size_t steps, Backend backend = Backend::ulam(8192),
                    DriverSpec spec = DriverSpec::constant_pair(1, 1)) {
  CocycleRun run;
  run.spec = spec;
  run.eps = eps;
  run.n_steps = steps;
  run.backend = backend;
  return run;
}

DriverSpec iid(std::uint64_t seed) { return DriverSpec::iid_uniform({0, 1}, {0, 1}, seed); }

}  // namespace

TEST_SUITE("lyapunov") {
  TEST_CASE("run validation") {
    CHECK_THROWS_AS(make_run(0.01, 10, Backend::ulam(7)).validate(), ptm::ConfigError);
    CHECK_THROWS_AS(make_run(1.5, 10).validate(), ptm::ConfigError);
    CHECK_THROWS_AS(make_run(0.01, 0).validate(), ptm::ConfigError);
    CHECK(make_run(0.01, 10, Backend::ulam(1024)).validate().size() == 1);
    CHECK(make_run(0.01, 10, Backend::ulam(8192)).validate().empty());
    CHECK(ptm::recommended_bins(0.01) == 8192);
    CHECK(ptm::recommended_bins(0.005) == 16384);
    CHECK(ptm::recommended_bins(0.0) == 8192);
    CHECK(Backend::ulam(8192).to_string() == "ulam(8192)");
    CHECK(Backend::exact().to_string() == "exact_pc(1e-14)");
    auto j = make_run(0.01, 10).to_json();
    CHECK(j["seed"] == 0);
    CHECK(j["backend"] == "ulam(8192)");
    CHECK(j["n_steps"] == 10);
  }

  TEST_CASE("lambda1 vanishes") {
    auto e = ptm::lambda1_estimate(make_run(0.01, 10000));
    CHECK(std::fabs(e.value) <= 1e-8);
    auto z = ptm::lambda1_estimate(make_run(0.0, 2000));
    CHECK(z.value == 0.0);
    auto mixed = ptm::lambda1_estimate(make_run(0.01, 10000), DD::sign() + DD::constant(1));
    CHECK(std::fabs(mixed.value) <= 1e-8);
    auto ex = ptm::lambda1_estimate(make_run(0.01, 2000, Backend::exact()));
    CHECK(std::fabs(ex.value) <= 1e-8);
    // a mean-zero input sees the second exponent, until float roundoff feeds the constant mode
    auto zero_mass = ptm::lambda1_estimate(make_run(0.01, 400), DD::sign());
    CHECK(std::fabs(zero_mass.value - std::log(0.98)) <= 2e-3);
    auto vanished = ptm::lambda1_estimate(make_run(0.01, 100), DD());
    CHECK(vanished.anomaly);
    CHECK(vanished.collapsed);
  }

  TEST_CASE("lambda2 at eps = 0 is exactly zero") {
    CHECK(ptm::lambda2_estimate(make_run(0.0, 1000)).value == 0.0);
    CHECK(ptm::lambda2_estimate(make_run(0.0, 500, Backend::exact())).value == 0.0);
  }

  TEST_CASE("lambda2 against the two-state reference") {
    auto e = ptm::lambda2_estimate(make_run(0.01, 20000));
    CHECK(std::fabs(e.value - std::log(0.98)) <= 2e-3);
    CHECK(std::fabs(e.value + 0.02) <= 10 * 0.01 * 0.01 * std::fabs(std::log(0.01)));
    CHECK(e.error > 0.0);
    CHECK(e.error < 1e-4);
    CHECK(e.block_rates.size() == 10);
    CHECK(std::fabs(e.bv_rate - e.value) < 1e-3);
    CHECK_FALSE(e.anomaly);
  }

  TEST_CASE("lambda2: exact and Ulam backends agree on the same orbit") {
    for (auto spec : {DriverSpec::constant_pair(1, 1), iid(5)}) {
      auto u = ptm::lambda2_estimate(make_run(0.01, 1500, Backend::ulam(8192), spec));
      auto x = ptm::lambda2_estimate(make_run(0.01, 1500, Backend::exact(), spec));
      CHECK(std::fabs(u.value - x.value) <= 1e-3);
    }
  }

  TEST_CASE("psi_n on sign, constants and the affine shift law") {
    for (auto backend : {Backend::ulam(8192), Backend::exact()}) {
      auto run = make_run(0.01, 1000, backend, iid(2));
      std::vector<std::size_t> ns{1, 10, 100};
      if (backend.kind == Backend::Kind::ulam) ns.push_back(1000);
      std::mt19937_64 rng(31);
      DD f = oracle::random_step_double(rng);
      for (std::size_t n : ns) {
        CHECK(ptm::psi_n(run, DD::sign(), n) == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(std::fabs(ptm::psi_n(run, DD::constant(1), n)) <= 1e-10);
        CHECK(ptm::psi_n(run, DD::indicator({0, 1}), n) == doctest::Approx(0.5).epsilon(1e-10));
        const double a = 1.7, b = -0.3, c = 0.45;
        double lhs = ptm::psi_n(run, a * f + DD::constant(b) + c * DD::sign(), n);
        CHECK(std::fabs(lhs - (a * ptm::psi_n(run, f, n) + c)) <= 1e-10);
      }
    }
  }

  TEST_CASE("psi_star converges geometrically") {
    auto run = make_run(0.01, 4000, Backend::ulam(8192), iid(3));
    CHECK(ptm::psi_star(run, DD::sign(), 1e-12) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::fabs(ptm::psi_star(run, DD::constant(1), 1e-12)) <= 1e-12);
    std::mt19937_64 rng(9);
    for (int t = 0; t < 5; ++t) {
      auto tr = ptm::psi_trace(run, oracle::random_step_double(rng), 1e-12);
      CHECK(tr.converged);
      CHECK(tr.cadence == 4);
      CHECK(tr.ratio < 1.0);
      CHECK(tr.ratio > 0.0);
    }
    auto tiny = make_run(0.01, 3, Backend::ulam(8192), iid(3));
    std::mt19937_64 rng2(10);
    CHECK_THROWS_AS(ptm::psi_star(tiny, oracle::random_step_double(rng2), 1e-15), ptm::NumericalAnomaly);
  }

  TEST_CASE("lambda3 below -0.4 at eps = 0.01") {
    auto e = ptm::lambda3_estimate(make_run(0.01, 3000));
    CHECK(e.value <= -0.4);
    CHECK_FALSE(e.collapsed);
    CHECK(e.deflation_health < 1e-6);
    MESSAGE("lambda3 = " << e.value << " +- " << e.error << ", psi* = " << e.psi_star_used);
  }

  TEST_CASE("eps = 0: the single tent map contracts mean-zero steps at rate -log 2") {
    // 1_[0,1/3] - 1_{J+}/3 is an eigenfunction of the tent transfer operator with eigenvalue -1/2.
    PCDensity<Rational> f = PCDensity<Rational>::indicator({0, q(1, 3)}) -
                            q(1, 3) * PCDensity<Rational>::indicator({0, 1});
    ptm::PairedTentMap<Rational> tent(0, 0);
    CHECK(oracle::l1_distance(ptm::transfer_pc(tent, f), q(-1, 2) * f) == 0);
    PCDensity<Rational> g = f;
    const int n = 40;
    for (int i = 0; i < n; ++i) g = ptm::transfer_pc(tent, g);
    const double rate = std::log(ptm::to_double(ptm::bv_norm(g).bv / ptm::bv_norm(f).bv)) / n;
    CHECK(rate == doctest::Approx(-std::log(2.0)).epsilon(1e-12));

    // Float backends: dyadic breakpoints die in finitely many steps, which is faster still.
    for (auto backend : {Backend::ulam(4096), Backend::exact()}) {
      auto e = ptm::lambda3_estimate(make_run(0.0, 400, backend), ptm::to_double(f));
      CHECK(e.value <= -std::log(2.0) + 1e-2);
      if (e.collapsed) {
        CHECK(std::isinf(e.value));
        CHECK(e.pre_collapse_rate <= -std::log(2.0) + 1e-2);
      }
    }
  }

  TEST_CASE("qr_spectrum") {
    auto z = ptm::qr_spectrum(make_run(0.0, 1000, Backend::ulam(1024)), 2);
    REQUIRE(z.qr_exponents.size() == 2);
    CHECK(std::fabs(z.qr_exponents[0]) <= 1e-6);
    CHECK(std::fabs(z.qr_exponents[1]) <= 1e-6);

    auto r = ptm::qr_spectrum(make_run(0.01, 3000), 3);
    REQUIRE(r.qr_exponents.size() == 3);
    CHECK(r.qr_exponents[0] >= r.qr_exponents[1]);
    CHECK(r.qr_exponents[1] >= r.qr_exponents[2]);
    CHECK(std::fabs(r.qr_exponents[0]) <= 1e-3);
    CHECK(std::fabs(r.qr_exponents[1] - std::log(0.98)) <= 2e-3);
    CHECK(r.qr_exponents[2] <= -0.4);
    CHECK_FALSE(r.qr_rank_collapse);

    CHECK_THROWS_AS(ptm::qr_spectrum(make_run(0.01, 10, Backend::exact()), 2), ptm::ConfigError);
    CHECK_THROWS_AS(ptm::qr_spectrum(make_run(0.01, 10), 17), ptm::ConfigError);
  }

  TEST_CASE("second Oseledets vector") {
    auto z = ptm::oseledets_vector_2(make_run(0.0, 1), 200);
    CHECK(z.vector.breakpoints() == std::vector<double>{-1, 0, 1});
    CHECK(z.vector.values() == std::vector<double>{-1, 1});

    auto v = ptm::oseledets_vector_2(make_run(0.01, 1, Backend::ulam(8192), iid(4)), 200);
    CHECK(v.depth == 200);
    CHECK(v.norm.bv <= 15.0);
    CHECK(v.vector.integral_plus() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::fabs(v.vector.integral()) <= 1e-10);

    // pullbacks settle: distance between depths n and n + 5 shrinks until roundoff
    std::vector<double> dist;
    DD prev = ptm::oseledets_vector_2(make_run(0.01, 1, Backend::ulam(8192), iid(4)), 5).vector;
    for (std::size_t d = 10; d <= 25; d += 5) {
      DD cur = ptm::oseledets_vector_2(make_run(0.01, 1, Backend::ulam(8192), iid(4)), d).vector;
      dist.push_back(oracle::l1_distance(cur, prev));
      prev = cur;
    }
    MESSAGE("Cauchy distances: " << dist[0] << " " << dist[1] << " " << dist[2] << " " << dist[3]);
    for (std::size_t i = 1; i < dist.size(); ++i) CHECK(dist[i] < dist[i - 1]);
    CHECK(oracle::l1_distance(v.vector, prev) <= 1e-6);
  }

  TEST_CASE("spectrum report JSON") {
    auto rep = ptm::spectrum(make_run(0.0, 300, Backend::ulam(1024)), true, 2);
    auto j = rep.to_json();
    for (const char* key : {"eps", "driver", "seed", "backend", "n_steps", "lambda_1", "lambda_2", "lambda_3",
                            "error_bars", "diagnostics"}) {
      CHECK(j.contains(key));
    }
    CHECK(j["lambda_2"] == 0.0);
    if (rep.lambda3 && rep.lambda3->collapsed) CHECK(j["lambda_3"].is_null());
    CHECK(j["diagnostics"]["mc_lambda2"] == 0.0);
  }
}
