#include "oracles.hpp"
#include "ptm/quarantine.hpp"

#include <doctest.h>

using oracle::q;
using ptm::ConeParams;
using ptm::PairedTentMap;
using ptm::QuarantineTuple;
using ptm::Rational;
using RD = ptm::PCDensity<Rational>;

namespace {

Rational total_l1(const QuarantineTuple<Rational>& t) {
  Rational s = 0;
  for (const auto& c : t.f) s += c.l1();
  return s;
}

// f_0 sits exactly on the C3 bound with a single jump pair that no fold can cancel,
// and f_k is the largest spike C1 and C2 allow next to -1.
QuarantineTuple<Rational> c3_extremal(const ConeParams& p) {
  const Rational eps = p.eps;
  // var0c = 2d must equal 33 eps (2 + d/10)
  const Rational d = 66 * eps / (2 - 33 * eps / 10);
  RD f0 = RD::constant(1) + RD::indicator({q(1, 5), q(3, 10)}, d);
  auto t = ptm::zero_tuple(f0, p.k);
  const Rational h = p.c1_bound(p.k) * f0.l1();
  t.f[p.k] = RD::indicator({-1, q(-999, 1000)}, h);
  return t;
}

}  // namespace

TEST_SUITE("quarantine") {
  TEST_CASE("k_from_epsilon") {
    CHECK(ptm::k_from_epsilon(q(1, 16)) == 1);
    CHECK(ptm::k_from_epsilon(q(1, 1000)) == 7);
    CHECK(ptm::k_from_epsilon(q(1, 8)) == 0);
    CHECK(ptm::k_from_epsilon(0.001) == 7);
    CHECK(ptm::k_from_epsilon(q(1, 2500)) == 9);
    CHECK_THROWS_AS(ptm::k_from_epsilon(Rational(0)), ptm::DomainError);
    CHECK_THROWS_AS(ptm::k_from_epsilon(q(1, 4)), ptm::DomainError);
    for (long d = 5; d < 5000; d += 37) {
      Rational eps = q(1, d);
      unsigned k = ptm::k_from_epsilon(eps);
      Rational two_k = 1;
      for (unsigned i = 0; i < k; ++i) two_k *= 2;
      CHECK(two_k * eps < q(1, 4));
      CHECK(q(1, 4) <= 2 * two_k * eps);
    }
  }

  TEST_CASE("lambda_step with closed holes just pushes f_0") {
    std::mt19937_64 rng(1);
    RD f = oracle::random_step(rng);
    auto t = ptm::zero_tuple(f, 5);
    PairedTentMap<Rational> id(0, 0);
    auto g = ptm::lambda_step(id, t);
    REQUIRE(g.size() == 6);
    CHECK(oracle::l1_distance(g.f[0], ptm::transfer_pc(id, f)) == 0);
    for (std::size_t j = 1; j < g.size(); ++j) CHECK(g.f[j].l1() == 0);
  }

  TEST_CASE("lambda_step: L1 does not grow and signed mass is conserved") {
    ConeParams p = ConeParams::from_epsilon(q(1, 1000));
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<long> d(0, 1000);
    for (std::uint64_t s = 0; s < 40; ++s) {
      auto t = ptm::sample_cone_element(s, p, false);
      for (int step = 0; step < 3; ++step) {
        PairedTentMap<Rational> m(p.eps * q(d(rng), 1000), p.eps * q(d(rng), 1000));
        auto g = ptm::lambda_step(m, t);
        CHECK(total_l1(g) <= total_l1(t));
        CHECK(g.phi().integral() == t.phi().integral());
        t = g;
      }
    }
  }

  TEST_CASE("cone_check examples") {
    ConeParams p = ConeParams::from_epsilon(q(1, 1000));
    CHECK(ptm::cone_check(ptm::zero_tuple(RD::constant(q(-3, 2)), p.k), p).passed());
    CHECK(ptm::cone_check(ptm::zero_tuple(RD::sign(), p.k), p).passed());
    auto r = ptm::cone_check(ptm::zero_tuple(RD::indicator({0, q(1, 2)}), p.k), p);
    CHECK_FALSE(r.c3);
    CHECK_FALSE(r.passed());
    CHECK(r.c3_margin == doctest::Approx(33 * 0.001 - 1 / 0.5));
    CHECK_THROWS_AS(ptm::cone_check(ptm::zero_tuple(RD::sign(), p.k + 1), p), ptm::DomainError);
  }

  TEST_CASE("phi_pm") {
    auto s = ptm::phi_pm(ptm::zero_tuple(RD::sign(), 3));
    CHECK(s.first == 1);
    CHECK(s.second == -1);
    auto one = ptm::phi_pm(ptm::zero_tuple(RD::constant(1), 3));
    CHECK(one.first == 1);
    CHECK(one.second == 1);

    ConeParams p = ConeParams::from_epsilon(q(1, 1000));
    for (std::uint64_t seed = 100; seed < 200; ++seed) {
      auto t = ptm::sample_cone_element(seed, p, seed % 2 == 0);
      auto [plus, minus] = ptm::phi_pm(t);
      Rational big = abs(plus) > abs(minus) ? Rational(abs(plus)) : Rational(abs(minus));
      CHECK(t.f[0].l1() / 3 <= big);
      CHECK(big <= t.f[0].l1());
    }
  }

  TEST_CASE("sampler produces cone elements") {
    ConeParams p = ConeParams::from_epsilon(q(1, 1000));
    std::size_t passed = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      auto t = ptm::sample_cone_element(seed, p, false);
      if (ptm::cone_check(t, p).passed()) ++passed;
    }
    CHECK(passed == 1000);

    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      auto t = ptm::sample_cone_element(seed, p, true);
      CHECK(ptm::cone_check(t, p).passed());
      auto [plus, minus] = ptm::phi_pm(t);
      CHECK(ptm::to_double(abs(plus + minus)) <= 1e-12 * ptm::to_double(t.f[0].l1()));
    }
    // same seed, same tuple
    auto a = ptm::sample_cone_element(9, p, false);
    auto b = ptm::sample_cone_element(9, p, false);
    for (std::size_t j = 0; j < a.size(); ++j) CHECK(oracle::l1_distance(a.f[j], b.f[j]) == 0);
  }

  TEST_CASE("admissible sampler keeps leaked mass where it can be") {
    ConeParams p = ConeParams::from_epsilon(q(1, 2500));
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      auto t = ptm::sample_cone_element(seed, p, false);
      CHECK(ptm::masked(t.f[1], {{-p.eps, p.eps}}).l1() == t.f[1].l1());
      Rational len = p.eps;
      for (unsigned j = 2; j <= p.k; ++j) {
        len *= 2 * (1 + p.eps);
        Rational l = len < q(1, 2) ? len : q(1, 2);
        CHECK(ptm::masked(t.f[j], {{-1, -1 + l}, {1 - l, 1}}).l1() == t.f[j].l1());
      }
    }
  }

  TEST_CASE("invariance trial in the asserted regime") {
    for (const char* driver : {"constant:a=1;b=1", "iid_uniform:a=[0,1];b=[0,1]"}) {
      auto spec = ptm::DriverSpec::parse(driver, 3);
      auto rep = ptm::invariance_trial(spec, q(1, 2500), 200);
      CHECK(rep.asserted);
      CHECK(rep.violations == 0);
      CHECK(rep.mass_floor_violations == 0);
      CHECK(rep.worst_mass_ratio >= 1 - 39 * 0.0004);
      CHECK(rep.ok());
      auto z = ptm::invariance_trial(spec, q(1, 2500), 100, {true});
      CHECK(z.ok());
      CHECK(z.zero_mass_breaks == 0);
      CHECK(z.to_json()["samples"] == 100);
    }
  }

  TEST_CASE("above the threshold the trial explores and records counterexamples") {
    auto spec = ptm::DriverSpec::parse("constant:a=1;b=1", 3);
    auto rep = ptm::invariance_trial(spec, q(1, 250), 100);
    CHECK_FALSE(rep.asserted);
    CHECK_FALSE(rep.warnings.empty());
    CHECK(rep.counterexamples.size() == std::min<std::size_t>(rep.violations + rep.mass_floor_violations, 3));
    if (!rep.counterexamples.empty()) {
      CHECK(rep.counterexamples[0]["input"].size() == rep.k + 1);
      CHECK(rep.counterexamples[0]["output"].size() == rep.k + 1);
    }
  }

  TEST_CASE("a spike on the fold keeps its variation, so the unrestricted cone is not invariant") {
    ConeParams p = ConeParams::from_epsilon(q(1, 2500));
    REQUIRE(p.k >= 2);
    auto t = ptm::zero_tuple(RD::constant(1), p.k);
    const Rational delta = q(1, 10000);
    t.f[1] = RD::indicator({q(1, 2) - delta, q(1, 2) + delta}, 2);
    REQUIRE(ptm::cone_check(t, p).passed());
    auto g = ptm::lambda_step(PairedTentMap<Rational>(p.eps, p.eps), t);
    auto r = ptm::cone_check(g, p);
    CHECK_FALSE(r.c1[1]);
    CHECK(ptm::var0c(g.f[2]) == 4 / (1 + p.eps));
  }

  TEST_CASE("C3 step: closes at eps = 1/2500, fails at eps = 1/2000") {
    ConeParams small = ConeParams::from_epsilon(q(1, 2500));
    ConeParams edge = ConeParams::from_epsilon(q(1, 2000));
    CHECK(small.c3_step_closes());
    CHECK_FALSE(edge.c3_step_closes());

    auto t = c3_extremal(edge);
    REQUIRE(ptm::cone_check(t, edge).passed());
    CHECK(ptm::cone_check(t, edge).c3_margin == doctest::Approx(0.0).epsilon(1e-12));
    auto g = ptm::lambda_step(PairedTentMap<Rational>(edge.eps, edge.eps), t);
    auto r = ptm::cone_check(g, edge);
    CHECK_FALSE(r.c3);
    MESSAGE("eps=1/2000: var0c/||f0|| after the step = " << ptm::to_double(ptm::var0c(g.f[0]) / g.f[0].l1())
                                                          << " against 33 eps = 0.0165");

    auto t2 = c3_extremal(small);
    REQUIRE(ptm::cone_check(t2, small).passed());
    auto g2 = ptm::lambda_step(PairedTentMap<Rational>(small.eps, small.eps), t2);
    CHECK(ptm::cone_check(g2, small).c3);
  }
}
