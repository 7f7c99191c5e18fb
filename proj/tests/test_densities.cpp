#include "oracles.hpp"
#include "ptm/densities.hpp"

#include <doctest.h>

#include <sstream>

using oracle::q;
using ptm::Interval;
using ptm::PairedTentMap;
using ptm::PCDensity;
using ptm::Rational;
using RD = PCDensity<Rational>;

namespace {

RD j_plus() { return RD::indicator({0, 1}); }

// f with zero integral on each half and var0c(f) <= 1.
RD balanced(std::mt19937_64& rng) {
  RD f = oracle::random_step(rng, 8);
  RD plus = ptm::masked(f, {Interval<Rational>{0, 1}});
  RD minus = ptm::masked(f, {Interval<Rational>{-1, 0}});
  plus = plus - plus.integral() * RD::indicator({0, 1});
  minus = minus - minus.integral() * RD::indicator({-1, 0});
  RD g = plus + minus;
  Rational v = ptm::var0c(g);
  if (v > 0) g *= Rational(1 / v);
  return g;
}

}  // namespace

TEST_SUITE("densities") {
  TEST_CASE("construction invariants") {
    RD no_zero({-1, q(1, 2), 1}, {1, 2});  // 0 gets inserted
    CHECK(no_zero.breakpoints() == std::vector<Rational>{-1, 0, q(1, 2), 1});
    CHECK(no_zero.values() == std::vector<Rational>{1, 1, 2});
    CHECK_THROWS_AS(RD({0, 1}, {1}), ptm::DomainError);
    CHECK_THROWS_AS(RD({-1, 0, 0, 1}, {1, 2, 3}), ptm::DomainError);
    CHECK_THROWS_AS(RD({-1, 0, 1}, {1}), ptm::DomainError);
    RD f({-1, 0, 1}, {2, 3});
    CHECK(f.integral() == 5);
    CHECK(f.integral_minus() == 2);
    CHECK(f.integral_plus() == 3);
    CHECK(RD::sign().integral() == 0);
    CHECK(RD().integral() == 0);
  }

  TEST_CASE("transfer_pc examples") {
    CHECK(oracle::l1_distance(ptm::transfer_pc(PairedTentMap<Rational>(0, 0), j_plus()), j_plus()) == 0);

    std::mt19937_64 rng(3);
    std::uniform_int_distribution<long> d(0, 100);
    for (int t = 0; t < 20; ++t) {
      PairedTentMap<Rational> m(q(d(rng), 100), q(d(rng), 100));
      CHECK(ptm::transfer_pc(m, RD::constant(q(1, 2))).integral() == 1);
    }

    RD pushed = ptm::transfer_pc(PairedTentMap<Rational>(q(1, 2), 0), j_plus());
    CHECK(pushed.integral_minus() == q(1, 3));
  }

  TEST_CASE("transfer_pc satisfies duality with composition (exact)") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<long> d(0, 60);
    for (int t = 0; t < 100; ++t) {
      const Rational ea = q(d(rng), 60), eb = q(d(rng), 60);
      PairedTentMap<Rational> m(ea, eb);
      RD f = oracle::random_step(rng);
      RD g = oracle::random_step(rng);
      Rational lhs = oracle::integral_product(ptm::transfer_pc(m, f), g);
      Rational rhs = oracle::integral_f_g_of_T(f, g, ea, eb);
      CHECK(lhs == rhs);
    }
  }

  TEST_CASE("mass ledger: every push conserves the integral exactly") {
    std::mt19937_64 rng(12);
    std::uniform_int_distribution<long> d(0, 1000);
    RD f = oracle::random_step(rng, 10);
    const Rational mass = f.integral();
    for (int t = 0; t < 12; ++t) {
      f = ptm::transfer_pc(PairedTentMap<Rational>(q(d(rng), 1000), q(d(rng), 1000)), f);
      CHECK(f.integral() == mass);
    }
  }

  TEST_CASE("transfer_pc: double agrees with rational") {
    std::mt19937_64 rng(13);
    RD f = oracle::random_step(rng);
    PairedTentMap<Rational> m(q(3, 40), q(7, 40));
    RD exact = ptm::transfer_pc(m, f);
    PCDensity<double> approx = ptm::transfer_pc(ptm::to_double(m), ptm::to_double(f));
    CHECK(oracle::l1_distance(ptm::to_double(exact), approx) < 1e-13);
  }

  TEST_CASE("masked and split_by_mask") {
    std::mt19937_64 rng(5);
    RD f = oracle::random_step(rng);
    CHECK(oracle::l1_distance(ptm::masked(f, {Interval<Rational>{-1, 1}}), f) == 0);
    CHECK(ptm::masked(f, {}).l1() == 0);
    auto h = ptm::holes(PairedTentMap<Rational>(1, 0));
    RD m = ptm::masked(j_plus(), {h.h_plus});
    CHECK(oracle::l1_distance(m, RD::indicator({q(1, 4), q(3, 4)})) == 0);

    std::vector<Interval<Rational>> s{{q(-1, 3), q(-1, 5)}, {q(1, 7), q(2, 3)}};
    auto [in, out] = ptm::split_by_mask(f, s);
    CHECK(oracle::l1_distance(in + out, f) == 0);
    CHECK(in.breakpoints() == out.breakpoints());
    CHECK(in.integral_over({q(-1, 5), q(1, 7)}) == 0);
  }

  TEST_CASE("var0c examples") {
    CHECK(ptm::var0c(RD::sign()) == 0);
    CHECK(ptm::var0c(RD::constant(q(5, 3))) == 0);
    CHECK(ptm::var0c(RD::indicator({0, q(1, 2)})) == 1);
    std::mt19937_64 rng(21);
    for (int t = 0; t < 30; ++t) {
      RD f = oracle::random_step(rng);
      CHECK(ptm::var0c(f) == oracle::variation_excluding_zero(f));
    }
  }

  TEST_CASE("bv_norm examples") {
    auto s = ptm::bv_norm(RD::sign());
    CHECK(s.l1 == 2);
    CHECK(s.var0c == 0);
    CHECK(s.bv == 2);
    auto z = ptm::bv_norm(RD());
    CHECK(z.l1 == 0);
    CHECK(z.var0c == 0);
    CHECK(z.bv == 0);
    auto p = ptm::bv_norm(j_plus());
    CHECK(p.l1 == 1);
    CHECK(p.var0c == 0);
    CHECK(p.bv == 1);
    RD spike = RD::indicator({q(1, 4), q(1, 2)}, 8);
    auto b = ptm::bv_norm(spike);
    CHECK(b.l1 == 2);
    CHECK(b.var0c == 16);
    CHECK(b.bv == 16);
  }

  TEST_CASE("coarsen") {
    RD distinct({-1, q(-1, 2), 0, q(1, 3), 1}, {1, 2, 3, 4});
    CHECK(ptm::coarsen(distinct, Rational(0)).breakpoints() == distinct.breakpoints());

    RD twin({-1, q(-1, 2), 0, 1}, {2, 2, 5});
    RD merged = ptm::coarsen(twin, Rational(0));
    CHECK(merged.cells() == 2);
    CHECK(merged.integral() == twin.integral());

    // never merges across 0
    RD across({-1, 0, 1}, {1, 1});
    CHECK(ptm::coarsen(across, Rational(0)).cells() == 2);

    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int t = 0; t < 200; ++t) {
      std::vector<double> bp{-1, 0, 1};
      for (int i = 0; i < 30; ++i) bp.push_back(u(rng));
      std::sort(bp.begin(), bp.end());
      std::vector<double> v;
      for (std::size_t i = 0; i + 1 < bp.size(); ++i) v.push_back(1.0 + 0.01 * u(rng));
      PCDensity<double> f(bp, v);
      const double tol = 0.004;
      PCDensity<double> c = ptm::coarsen(f, tol);
      CHECK(oracle::l1_distance(c, f) <= 2 * tol + 1e-15);
      CHECK(c.integral_minus() == doctest::Approx(f.integral_minus()).epsilon(1e-14));
      CHECK(c.integral_plus() == doctest::Approx(f.integral_plus()).epsilon(1e-14));
    }
  }

  TEST_CASE("leak_decomposition with closed holes leaks nothing") {
    std::vector<PairedTentMap<Rational>> orbit(6, PairedTentMap<Rational>(0, 0));
    std::mt19937_64 rng(4);
    auto d = ptm::leak_decomposition<Rational>(orbit, oracle::random_step(rng));
    CHECK(d.leaks.size() == 6);
    for (const auto& g : d.leaks) CHECK(g.l1() == 0);
  }

  TEST_CASE("leak_decomposition: variation halves and half-integrals stay O(eps)") {
    const Rational eps = q(1, 100);
    std::mt19937_64 rng(19);
    std::uniform_int_distribution<long> d(0, 100);
    for (int t = 0; t < 10; ++t) {
      RD f = balanced(rng);
      REQUIRE(ptm::var0c(f) <= 1);
      std::vector<PairedTentMap<Rational>> orbit;
      for (int j = 0; j < 8; ++j) orbit.emplace_back(eps * q(d(rng), 100), eps * q(d(rng), 100));
      for (std::size_t j = 1; j <= orbit.size(); ++j) {
        auto dec = ptm::leak_decomposition<Rational>(std::span(orbit.data(), j), f);
        CHECK(ptm::var0c(dec.h_final) <= Rational(1) / (Rational(1) << static_cast<unsigned>(j)));
        CHECK(abs(dec.h_final.integral_plus()) <= 3 * eps);
        CHECK(abs(dec.h_final.integral_minus()) <= 3 * eps);
        // leaked and kept parts add back up to the full push
        RD total = dec.h_final;
        for (std::size_t i = 0; i < dec.leaks.size(); ++i) {
          RD g = dec.leaks[i];
          for (std::size_t r = i + 1; r < j; ++r) g = ptm::transfer_pc(orbit[r], g);
          total = total + g;
        }
        RD push = f;
        for (std::size_t r = 0; r < j; ++r) push = ptm::transfer_pc(orbit[r], push);
        CHECK(oracle::l1_distance(total, push) == 0);
      }
    }
  }

  TEST_CASE("two-column round trip") {
    std::mt19937_64 rng(2);
    PCDensity<double> f = oracle::random_step_double(rng);
    std::stringstream s;
    ptm::write_two_column(s, f, {"a header line"});
    CHECK(s.str().rfind("# a header line\n", 0) == 0);
    PCDensity<double> g = ptm::read_two_column(s);
    CHECK(g.breakpoints() == f.breakpoints());
    CHECK(g.values() == f.values());
  }
}
