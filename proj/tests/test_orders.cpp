#include <doctest.h>

#include <cmath>

#include "branchlab/gallery.hpp"
#include "branchlab/orders.hpp"
#include "branchlab/pairgen.hpp"
#include "branchlab/rng.hpp"

#include "helpers.hpp"

using namespace branchlab;
using namespace branchlab::testing;

namespace {

Kernel single_site_pmf(std::vector<std::pair<std::uint32_t, double>> pmf) {
  MultinomialLaw law;
  law.total_pmf = std::move(pmf);
  law.dispersal = {1.0};
  Kernel k;
  k.space.labels = {"a"};
  k.laws = {law};
  return k;
}

}  // namespace

TEST_CASE("germ_check_multinomial certifies identical kernels with margin 0") {
  Kernel k = single_site_pmf({{0, 0.5}, {2, 0.5}});
  OrderVerdict v = germ_check_multinomial(k, k, 0.0);
  CHECK(v.status == OrderStatus::kCertified);
  CHECK(v.margin == 0.0);
}

TEST_CASE("germ_check_multinomial: ordered geometric means certify at 0") {
  Kernel mu = single_type_geometric(3.0);
  Kernel nu = single_type_geometric(2.0);
  OrderVerdict v = germ_check_multinomial(mu, nu, 0.0);
  CHECK(v.status == OrderStatus::kCertified);
  OrderVerdict reverse = germ_check_multinomial(nu, mu, 0.0);
  CHECK(reverse.status == OrderStatus::kFalsified);
  REQUIRE(reverse.witness.has_value());
  // re-evaluating at the witness reproduces the violation
  double t = reverse.witness->z[0];
  CHECK(eval_phi(mu, 0, t) - eval_phi(nu, 0, t) ==
        doctest::Approx(reverse.witness->gap).epsilon(1e-12));
  CHECK(reverse.witness->gap < 0.0);
}

TEST_CASE("germ_check_multinomial: t^2 vs (1+t^2)/2") {
  Kernel mu = single_site_pmf({{2, 1.0}});
  Kernel nu = single_site_pmf({{0, 0.5}, {2, 0.5}});
  OrderVerdict v = germ_check_multinomial(mu, nu, 0.0);
  CHECK(v.status == OrderStatus::kCertified);
}

TEST_CASE("germ_check_multinomial: mixed geometric vs tabulated pair with "
          "ties at both endpoints") {
  // phi_mu(t) = 1/(3-2t) and phi_nu(t) = (1+2t)/3 agree at t = 0 and t = 1
  // and differ by 4t(1-t)/(3(3-2t)) in between, so no value margin exists
  // anywhere near the endpoints; certification must come from the
  // cross-multiplied polynomial.
  Kernel mu = single_type_geometric(2.0);
  Kernel nu = single_site_pmf({{0, 1.0 / 3.0}, {1, 2.0 / 3.0}});
  OrderVerdict v = germ_check_multinomial(mu, nu, 0.0);
  CHECK(v.status == OrderStatus::kCertified);
  OrderVerdict rev = germ_check_multinomial(nu, mu, 0.0);
  CHECK(rev.status == OrderStatus::kFalsified);
}

TEST_CASE("germ_check_multinomial rejects mismatched dispersal") {
  MultinomialLaw a;
  a.total_pmf = {{1, 1.0}};
  a.dispersal = {0.5, 0.5};
  MultinomialLaw b = a;
  b.dispersal = {0.6, 0.4};
  Kernel ka, kb;
  ka.space.labels = kb.space.labels = {"x", "y"};
  ka.laws = {a, a};
  kb.laws = {b, b};
  CHECK_THROWS_WITH_AS(germ_check_multinomial(ka, kb, 0.0),
                       doctest::Contains("dispersal rows differ"), Error);
}

TEST_CASE("order_check_grid on the incomparable pair") {
  auto [mu, nu] = gallery::incomparable_pair();

  OrderVerdict forward = order_check_grid(mu, nu, 0.0, 1.0 / 64.0);
  CHECK(forward.status == OrderStatus::kFalsified);
  REQUIRE(forward.witness.has_value());
  // the violation lives on the z2 = 1 edge with z1 in (1/10, 1)
  CHECK(forward.witness->z[1] == doctest::Approx(1.0));
  CHECK(forward.witness->z[0] > 0.1);
  CHECK(forward.witness->z[0] < 1.0);
  // reproducible: G_nu - G_mu is negative at the witness
  ProbVector zw(forward.witness->z);
  double gap = eval_G(nu, zw)[forward.witness->site] -
               eval_G(mu, zw)[forward.witness->site];
  CHECK(gap == doctest::Approx(forward.witness->gap).epsilon(1e-12));
  CHECK(gap < 0.0);

  OrderVerdict backward = order_check_grid(nu, mu, 0.0, 1.0 / 64.0);
  CHECK(backward.status == OrderStatus::kFalsified);

  // germ boxes keep failing both ways for every delta below 9/10
  for (double delta : {0.25, 0.5, 0.75, 0.875}) {
    CHECK(order_check_grid(mu, nu, delta).status == OrderStatus::kFalsified);
    CHECK(order_check_grid(nu, mu, delta).status == OrderStatus::kFalsified);
  }
}

TEST_CASE("order_check_grid certifies identical kernels and guards size") {
  auto [mu, nu] = gallery::incomparable_pair();
  CHECK(order_check_grid(mu, mu, 0.0).status == OrderStatus::kCertified);
  CHECK(order_check_grid(nu, nu, 0.5).status == OrderStatus::kCertified);

  auto big = gallery::moyal1(gallery::PSpec{}, 40);
  CHECK_THROWS_WITH_AS(order_check_grid(big.kernel, big.kernel, 0.0, 1.0 / 64),
                       doctest::Contains("1e7"), Error);
}

TEST_CASE("stochastic_order_check") {
  ExplicitLaw one_child{{{cfg({{0, 1}}), 1.0}}};
  ExplicitLaw no_child{{{Config{}, 1.0}}};

  SUBCASE("identical laws: diagonal coupling") {
    StochasticOrderResult r = stochastic_order_check(one_child, one_child);
    CHECK(r.verdict.status == OrderStatus::kCertified);
    REQUIRE(r.certificate.has_value());
    REQUIRE(r.certificate->joint.size() == 1);
    CHECK(r.certificate->joint[0].mass == doctest::Approx(1.0));
    CHECK(r.certificate->mu_marginal_residual <= 1e-9);
  }

  SUBCASE("one child dominates none") {
    StochasticOrderResult r = stochastic_order_check(one_child, no_child);
    CHECK(r.verdict.status == OrderStatus::kCertified);
  }

  SUBCASE("the 3-atom counterexample is falsified with the right upper set") {
    ExplicitLaw mu{{{cfg({{0, 2}}), 0.5}, {Config{}, 0.5}}};
    ExplicitLaw nu{{{cfg({{0, 1}}), 1.0}}};
    StochasticOrderResult r = stochastic_order_check(mu, nu);
    CHECK(r.verdict.status == OrderStatus::kFalsified);
    REQUIRE(r.verdict.witness.has_value());
    const OrderWitness& w = *r.verdict.witness;
    CHECK(w.nu_mass == doctest::Approx(1.0));
    CHECK(w.mu_mass == doctest::Approx(0.5));
    // the reported upper set is the one found by exhausting every upper set
    // generated by support atoms: max nu(U) - mu(U) = 0.5 at U = {f >= 1_a}
    REQUIRE(w.upper_set_generators.size() == 1);
    CHECK(w.upper_set_generators[0] == cfg({{0, 1}}));
  }

  SUBCASE("coupling pairs all satisfy the domination constraint") {
    auto [mu, nu] = random_dominated_explicit_pair(404);
    for (std::size_t x = 0; x < mu.size(); ++x) {
      auto r = stochastic_order_check(std::get<ExplicitLaw>(mu.laws[x]),
                                      std::get<ExplicitLaw>(nu.laws[x]));
      REQUIRE(r.verdict.status == OrderStatus::kCertified);
      REQUIRE(r.certificate.has_value());
      for (const auto& pair : r.certificate->joint)
        CHECK(pair.upper.dominates(pair.lower));
      CHECK(r.certificate->mu_marginal_residual <= 1e-9);
      CHECK(r.certificate->nu_marginal_residual <= 1e-9);
    }
  }

  SUBCASE("mutual certification implies equality of the laws") {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
      ExplicitLaw a = random_explicit_law(seed, 2, 3, 3);
      ExplicitLaw b = random_explicit_law(seed + 1000, 2, 3, 3);
      auto ab = stochastic_order_check(a, b);
      auto ba = stochastic_order_check(b, a);
      if (ab.verdict.status == OrderStatus::kCertified &&
          ba.verdict.status == OrderStatus::kCertified) {
        // compare as mass functions
        std::map<Config, double> ma, mb;
        for (const auto& [c, p] : a.support) ma[c] += p;
        for (const auto& [c, p] : b.support) mb[c] += p;
        for (const auto& [c, p] : ma)
          CHECK(std::abs(p - (mb.count(c) ? mb[c] : 0.0)) <= 1e-9);
      }
    }
  }
}

TEST_CASE("order_chain_test holds on seeded dominated pairs") {
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    auto [mu, nu] = random_dominated_explicit_pair(seed);
    ChainReport report = order_chain_test(mu, nu, seed);
    CHECK(report.stochastic.status == OrderStatus::kCertified);
    CHECK(report.pgf.status == OrderStatus::kCertified);
    for (const auto& germ : report.germ)
      CHECK(germ.status == OrderStatus::kCertified);
    CHECK(report.consistent);
  }
}

TEST_CASE("order_chain_test on identical kernels and the incomparable pair") {
  auto [mu, nu] = gallery::incomparable_pair();
  // mu vs mu: everything certifies
  ChainReport same = order_chain_test(mu, mu, 5);
  CHECK(same.stochastic.status == OrderStatus::kCertified);
  CHECK(same.pgf.status == OrderStatus::kCertified);
  CHECK(same.consistent);
  // explicit-vs-multinomial: the coupling stage is skipped, and pgf/germ
  // both falsify, which is consistent with incomparability
  ChainReport inc = order_chain_test(mu, nu, 5);
  CHECK(inc.stochastic.status == OrderStatus::kInconclusive);
  CHECK(inc.pgf.status == OrderStatus::kFalsified);
  for (const auto& germ : inc.germ)
    CHECK(germ.status == OrderStatus::kFalsified);
  CHECK(inc.consistent);
}

TEST_CASE("germ and grid checks agree on multinomial pairs") {
  for (std::uint64_t seed = 50; seed < 62; ++seed) {
    auto [mu, nu] = random_certified_multinomial_pair(seed, 3, 3);
    for (double delta : {0.0, 0.5}) {
      OrderVerdict scalar = germ_check_multinomial(mu, nu, delta);
      OrderVerdict grid = order_check_grid(mu, nu, delta, 1.0 / 16.0);
      CHECK(scalar.status == grid.status);
      CHECK(scalar.status == OrderStatus::kCertified);
      // and the reversed pair falsifies consistently unless the laws tie
      OrderVerdict scalar_rev = germ_check_multinomial(nu, mu, delta);
      OrderVerdict grid_rev = order_check_grid(nu, mu, delta, 1.0 / 16.0);
      CHECK(scalar_rev.status == grid_rev.status);
    }
  }
}

TEST_CASE("theorem_inequality_check") {
  SUBCASE("identical kernels satisfy the bound at any delta") {
    Kernel k = single_site_pmf({{0, 0.4}, {2, 0.6}});
    TheoremReport r = theorem_inequality_check(k, k, 0.25, {0});
    CHECK(r.holds);
  }

  SUBCASE("geometric means 3 >= 2: q = 1/3 <= 1/2") {
    Kernel mu = single_type_geometric(3.0);
    Kernel nu = single_type_geometric(2.0);
    TheoremReport r = theorem_inequality_check(mu, nu, 0.0, {0});
    CHECK(r.holds);
    CHECK(r.q_mu[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
    CHECK(r.q_nu[0] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(r.sup_q_nu_below_one);
    CHECK(r.nu_strong_survival);
    CHECK(r.strong_survival_transfer_ok);
  }

  SUBCASE("uncertified order is refused") {
    Kernel mu = single_type_geometric(2.0);
    Kernel nu = single_type_geometric(3.0);
    CHECK_THROWS_WITH_AS(theorem_inequality_check(mu, nu, 0.0, {0}),
                         doctest::Contains("not certified"), Error);
  }
}

TEST_CASE("geometric order equivalence") {
  std::vector<std::vector<double>> dispersal = {{0.7, 0.3}, {0.2, 0.8}};

  SUBCASE("scaled means: all three hold") {
    auto nu = gallery::geometric_kernel({2.0, 1.5}, dispersal);
    auto mu = gallery::geometric_kernel({2.2, 1.65}, dispersal);
    GeometricEquivalenceReport r = geometric_order_equivalence(mu.kernel,
                                                               nu.kernel);
    CHECK(r.mean_order);
    CHECK(r.pgf.status == OrderStatus::kCertified);
    CHECK(r.germ.status == OrderStatus::kCertified);
    CHECK(r.consistent);
  }

  SUBCASE("identical kernels: margins are zero") {
    auto nu = gallery::geometric_kernel({2.0, 1.5}, dispersal);
    GeometricEquivalenceReport r = geometric_order_equivalence(nu.kernel,
                                                               nu.kernel);
    CHECK(r.mean_order);
    CHECK(r.consistent);
    CHECK(r.pgf.margin == 0.0);
  }

  SUBCASE("incomparable moment matrices: all three fail consistently") {
    auto nu = gallery::geometric_kernel({2.0, 1.5}, dispersal);
    auto mu = gallery::geometric_kernel({2.5, 1.2}, dispersal);  // one up, one down
    GeometricEquivalenceReport r = geometric_order_equivalence(mu.kernel,
                                                               nu.kernel);
    CHECK_FALSE(r.mean_order);
    CHECK(r.pgf.status == OrderStatus::kFalsified);
    CHECK(r.germ.status == OrderStatus::kFalsified);
    CHECK(r.consistent);
  }

  SUBCASE("explicit kernels are refused") {
    Kernel k = explicit_kernel({"a"}, {{{Config{}, 1.0}}});
    CHECK_THROWS_AS(geometric_order_equivalence(k, k), Error);
  }

  SUBCASE("randomized mean perturbations keep the three checks in lockstep") {
    Pcg32 rng = Pcg32::for_replica(606, 0);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> base = {1.0 + rng.next_double(),
                                  1.0 + rng.next_double()};
      std::vector<double> perturbed = base;
      // sometimes a uniform inflation (ordered), sometimes a crossed one
      if (rng.next_double() < 0.5) {
        perturbed[0] *= 1.0 + rng.next_double();
        perturbed[1] *= 1.0 + rng.next_double();
      } else {
        perturbed[0] *= 1.0 + rng.next_double();
        perturbed[1] *= 0.5;
      }
      auto nu = gallery::geometric_kernel(base, dispersal);
      auto mu = gallery::geometric_kernel(perturbed, dispersal);
      GeometricEquivalenceReport r =
          geometric_order_equivalence(mu.kernel, nu.kernel);
      CHECK(r.consistent);
    }
  }
}
