#include <doctest.h>

#include <cmath>

#include "branchlab/gallery.hpp"
#include "branchlab/genfun.hpp"
#include "branchlab/rng.hpp"

#include "helpers.hpp"

using namespace branchlab;
using namespace branchlab::testing;

namespace {

Kernel moyal1_kernel(std::size_t n, BoundaryPolicy policy =
                                        BoundaryPolicy::kSurviveOutside) {
  return gallery::moyal1(gallery::PSpec{}, n, policy).kernel;
}

}  // namespace

TEST_CASE("eval_G reproduces the moyal1 closed form") {
  gallery::PSpec p;
  Kernel k = moyal1_kernel(6);
  ProbVector z(std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5, 0.6});
  ProbVector g = eval_G(k, z);
  for (std::size_t n = 0; n + 1 < 6; ++n)
    CHECK(g[n] == doctest::Approx(1.0 - p.p(n) + p.p(n) * z[n + 1])
                      .epsilon(1e-15));
  // boundary site: the escaped child reads as 0 under SurviveOutside
  CHECK(g[5] == doctest::Approx(1.0 - p.p(5)).epsilon(1e-15));
  Kernel kk = moyal1_kernel(6, BoundaryPolicy::kKill);
  CHECK(eval_G(kk, z)[5] == 1.0);  // and as 1 under Kill
}

TEST_CASE("G(1) = 1 exactly under Kill") {
  Kernel kernels[] = {moyal1_kernel(12, BoundaryPolicy::kKill),
                      single_type_geometric(2.0)};
  auto [mu, nu] = gallery::incomparable_pair();
  for (const Kernel& k : {kernels[0], kernels[1], mu, nu}) {
    ProbVector one = ProbVector::ones(k.size());
    ProbVector g = eval_G(k, one);
    for (std::size_t x = 0; x < k.size(); ++x) CHECK(g[x] == 1.0);
  }
}

TEST_CASE("multinomial closed form agrees with a brute-force expansion") {
  MultinomialLaw law;
  law.total_pmf = {{0, 0.5}, {2, 0.5}};
  law.dispersal = {1.0, 0.0};
  Kernel k;
  k.space.labels = {"a", "b"};
  k.laws = {law, law};
  ProbVector z(std::vector<double>{0.4, 0.9});
  // 0.5 + 0.5 * 0.4^2 = 0.58
  CHECK(eval_G(k, z)[0] == doctest::Approx(0.58).epsilon(1e-15));
  CHECK(multinomial_pgf_brute_force(law, z.values()) ==
        doctest::Approx(0.58).epsilon(1e-15));
}

TEST_CASE("eval_G is monotone in z") {
  Pcg32 rng = Pcg32::for_replica(11, 0);
  auto [mu, nu] = gallery::incomparable_pair();
  Kernel geo = single_type_geometric(1.7);
  Kernel m1 = moyal1_kernel(7);
  for (const Kernel& k : {mu, nu, geo, m1}) {
    for (int trial = 0; trial < 200; ++trial) {
      ProbVector lo(k.size()), hi(k.size());
      for (std::size_t i = 0; i < k.size(); ++i) {
        lo[i] = rng.next_double();
        hi[i] = lo[i] + rng.next_double() * (1.0 - lo[i]);
      }
      CHECK(eval_G(k, lo).leq(eval_G(k, hi), 1e-15));
    }
  }
}

TEST_CASE("eval_phi") {
  gallery::PSpec p;
  Kernel k = moyal1_kernel(6);
  CHECK(eval_phi(k, 2, 0.3) ==
        doctest::Approx(1.0 - p.p(2) + p.p(2) * 0.3).epsilon(1e-15));
  CHECK(eval_phi(k, 2, 1.0) == 1.0);
  Kernel geo = single_type_geometric(2.0);
  CHECK(eval_phi(geo, 0, 0.5) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(eval_phi(geo, 0, 1.5), Error);
  CHECK_THROWS_AS(eval_phi(geo, 3, 0.5), Error);
}

TEST_CASE("iterate: fixed point at 1, descent from U_G, ascent from 0") {
  Kernel geo = single_type_geometric(2.0);

  IterationResult at_one = iterate(geo, ProbVector::ones(1), 1e-12, 100);
  CHECK(at_one.converged);
  CHECK(at_one.iterations == 1);
  CHECK(at_one.residual == 0.0);
  CHECK(at_one.direction == MonotoneDirection::kNone);

  IterationResult up = iterate(geo, ProbVector::zeros(1), 1e-12, 100000);
  CHECK(up.converged);
  CHECK(up.direction == MonotoneDirection::kUp);
  CHECK(up.vector[0] == doctest::Approx(0.5).epsilon(1e-10));

  // 0.8 >= q and G(0.8) <= 0.8, so the iterates fall monotonically to q
  IterationResult down =
      iterate(geo, ProbVector(std::vector<double>{0.8}), 1e-12, 100000);
  CHECK(down.converged);
  CHECK(down.direction == MonotoneDirection::kDown);
  CHECK(down.vector[0] == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(down.vector[0] >= 0.5 - 1e-12);

  // iteration from 0 produces a nondecreasing trace
  ProbVector z = ProbVector::zeros(1);
  for (int i = 0; i < 50; ++i) {
    ProbVector next = eval_G(geo, z);
    CHECK(z.leq(next, 1e-15));
    z = next;
  }
}

TEST_CASE("q_global on geometric kernels hits the analytic roots") {
  // smallest root of m q^2 - (m+1) q + 1 = 0 is 1/m for supercritical m
  IterationResult q2 = q_global(single_type_geometric(2.0));
  CHECK(q2.converged);
  CHECK(q2.vector[0] == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(q2.residual <= 10e-12);

  IterationResult q3 = q_global(single_type_geometric(3.0));
  CHECK(q3.vector[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-10));

  IterationResult sub = q_global(single_type_geometric(0.5));
  CHECK(sub.vector[0] == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("q_global on moyal1 matches the tail-product oracle") {
  gallery::PSpec p;
  auto bundle = gallery::moyal1(p, 40);
  IterationResult q = q_global(bundle.kernel);
  CHECK(q.converged);
  const auto& oracle = bundle.oracles.at("q_global").values;
  for (std::size_t n = 0; n <= 20; ++n)
    CHECK(q.vector[n] == doctest::Approx(oracle[n]).epsilon(0).scale(1).epsilon(1e-9));
  // q(0,X) = 1 - 2^{-1} for c = ln 2
  CHECK(q.vector[0] == doctest::Approx(0.5).epsilon(1e-9));
  // strictly decreasing toward 0
  for (std::size_t n = 0; n + 1 < 40; ++n) CHECK(q.vector[n] > q.vector[n + 1]);
  // Kill boundary brackets the oracle from above
  IterationResult qk = q_global(bundle.kernel.with_boundary(BoundaryPolicy::kKill));
  for (std::size_t n = 0; n < 40; ++n) {
    CHECK(q.vector[n] <= oracle[n] + 1e-12);
    CHECK(qk.vector[n] >= oracle[n] - 1e-12);
  }
}

TEST_CASE("avoidance vector") {
  gallery::PSpec p;
  Kernel k = moyal1_kernel(12, BoundaryPolicy::kKill);

  SUBCASE("self-visit forces zero") {
    ProbVector h = avoidance_vector(k, {3});
    CHECK(h[3] == 0.0);
    for (std::size_t n = 4; n < 12; ++n) CHECK(h[n] == 1.0);
    // below A = {3}: the single path must die before reaching 3
    for (std::size_t n = 0; n < 3; ++n) {
      double product = 1.0;
      for (std::size_t i = n; i < 3; ++i) product *= p.p(i);
      CHECK(h[n] == doctest::Approx(1.0 - product).epsilon(1e-12));
    }
  }

  SUBCASE("single-type kernel, A = {x}") {
    Kernel geo = single_type_geometric(2.0);
    ProbVector h = avoidance_vector(geo, {0});
    CHECK(h[0] == 0.0);
  }
}

TEST_CASE("q_local: full set reduces to the global vector") {
  Kernel geo = single_type_geometric(2.0);
  LocalExtinctionResult local = q_local(geo, {0});
  IterationResult global = q_global(geo);
  CHECK(local.q_local.sup_dist(global.vector) <= 1e-10);
  CHECK(local.converged);
  CHECK(global.vector.leq(local.q_local, 1e-12));  // q(X) <= q(A)
  CHECK(residual(geo, local.q_local) <= 10e-12);
}

TEST_CASE("q_local on moyal1: finite sets die out, the full set is global") {
  auto bundle = gallery::moyal1(gallery::PSpec{}, 40);
  SiteSet finite = {0, 1, 2, 3, 4, 5};

  LocalExtinctionResult local = q_local(bundle.kernel, finite);
  // Kill side is exact for finite sets: q(A) = 1
  for (std::size_t n = 0; n < 40; ++n)
    CHECK(local.bracket_upper[n] == doctest::Approx(1.0).epsilon(1e-9));
  // SurviveOutside pins escapees at certain survival, so its value collapses
  // to the global vector (lower bracket)
  IterationResult global = q_global(bundle.kernel);
  CHECK(local.bracket_lower.sup_dist(global.vector) <= 1e-9);

  LocalExtinctionResult full = q_local(bundle.kernel, all_sites(bundle.kernel));
  CHECK(full.q_local.sup_dist(global.vector) <= 1e-9);
  Kernel kill = bundle.kernel.with_boundary(BoundaryPolicy::kKill);
  LocalExtinctionResult full_kill = q_local(kill, all_sites(kill));
  CHECK(full_kill.q_local.sup_dist(q_global(kill).vector) <= 1e-9);
}

TEST_CASE("q_local monotone in the target set") {
  auto [mu, nu] = gallery::incomparable_pair();
  (void)mu;
  LocalExtinctionResult small = q_local(nu, {0});
  LocalExtinctionResult big = q_local(nu, {0, 1});
  CHECK(big.q_local.leq(small.q_local, 1e-12));
}

TEST_CASE("space-time route agrees with the avoidance route") {
  auto bundle = gallery::moyal1(gallery::PSpec{}, 40);
  for (BoundaryPolicy policy :
       {BoundaryPolicy::kSurviveOutside, BoundaryPolicy::kKill}) {
    Kernel k = bundle.kernel.with_boundary(policy);
    for (const SiteSet& sites :
         {SiteSet{0, 1, 2, 3, 4, 5}, all_sites(k)}) {
      LocalExtinctionResult route1 = q_local(k, sites);
      ProbVector route2 = q_local_space_time(k, sites, 200);
      CHECK(route1.q_local.sup_dist(route2) <= 1e-8);
    }
  }
}

TEST_CASE("space-time kernel global extinction matches the original") {
  auto bundle = gallery::moyal1(gallery::PSpec{}, 30);
  Kernel st = space_time(bundle.kernel, 60);
  LocalExtinctionResult q_st = q_local(st, all_sites(st));
  IterationResult q_orig = q_global(bundle.kernel);
  for (std::size_t x = 0; x < 30; ++x)
    CHECK(q_st.q_local[x] == doctest::Approx(q_orig.vector[x]).epsilon(1e-9));
}

TEST_CASE("check_delta_condition") {
  DeltaConditionResult geo = check_delta_condition(single_type_geometric(2.0),
                                                   0.5, 50);
  CHECK(geo.holds);
  CHECK(geo.n == 1);  // phi(1/2) = 1/2 exactly

  // any kernel with mu_x(0) > 0 defeats delta = 0
  Kernel k = explicit_kernel({"a"}, {{{cfg({{0, 2}}), 0.7}, {Config{}, 0.3}}});
  CHECK_FALSE(check_delta_condition(k, 0.0, 30).holds);

  // homogeneous supercritical family: true at the analytic root
  DeltaConditionResult root = check_delta_condition(single_type_geometric(3.0),
                                                    1.0 / 3.0 + 1e-12, 50);
  CHECK(root.holds);
}

TEST_CASE("residual") {
  Kernel geo = single_type_geometric(2.0);
  CHECK(residual(geo, ProbVector::ones(1)) == 0.0);
  Kernel k = explicit_kernel({"a"}, {{{cfg({{0, 2}}), 0.7}, {Config{}, 0.3}}});
  CHECK(residual(k, ProbVector::zeros(1)) >= 0.3);
  IterationResult q = q_global(geo);
  CHECK(residual(geo, q.vector) <= 10e-12);
}

TEST_CASE("local extinction matches global when the local vector stays away "
          "from one") {
  // irreducible 2-site multinomial kernel with mu_x(0) > 0: inf q > 0, and
  // strong survival makes q(A) = q(X)
  MultinomialLaw law;
  law.total_pmf = {{0, 0.2}, {3, 0.8}};
  law.dispersal = {0.5, 0.5};
  Kernel k;
  k.space.labels = {"a", "b"};
  k.laws = {law, law};
  LocalExtinctionResult local = q_local(k, {0});
  IterationResult global = q_global(k);
  REQUIRE(global.vector.min() > 0.0);
  REQUIRE(local.q_local.max() < 0.9);
  CHECK(local.q_local.sup_dist(global.vector) <= 1e-9);
}
