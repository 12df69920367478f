#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "branchlab/gallery.hpp"
#include "branchlab/sim.hpp"

#include "helpers.hpp"

using namespace branchlab;
using namespace branchlab::testing;

TEST_CASE("step: empty configurations are absorbing") {
  Kernel geo = single_type_geometric(2.0);
  Pcg32 rng = Pcg32::for_replica(1, 0);
  Config next = step(geo, Config{}, rng);
  CHECK(next.empty());
}

TEST_CASE("step: moyal1 particle either moves right or dies") {
  Kernel k = gallery::moyal1(gallery::PSpec{}, 10).kernel;
  Pcg32 rng = Pcg32::for_replica(2, 0);
  int moved = 0, died = 0;
  for (int i = 0; i < 4000; ++i) {
    Config next = step(k, cfg({{3, 1}}), rng);
    if (next.empty())
      ++died;
    else {
      REQUIRE(next.entries.size() == 1);
      CHECK(next.entries[0].first == 4);
      CHECK(next.entries[0].second == 1);
      ++moved;
    }
  }
  // p_3 = exp(-ln2 / 16) ~ 0.9576; 4 standard errors ~ 0.0127
  double p3 = gallery::PSpec{}.p(3);
  CHECK(std::abs(moved / 4000.0 - p3) < 4.0 * std::sqrt(p3 * (1 - p3) / 4000));
  (void)died;
}

TEST_CASE("step: deterministic two-children law doubles the population") {
  Kernel k = explicit_kernel({"a"}, {{{cfg({{0, 2}}), 1.0}}});
  Pcg32 rng = Pcg32::for_replica(3, 0);
  Config next = step(k, cfg({{0, 3}}), rng);
  REQUIRE(next.entries.size() == 1);
  CHECK(next.entries[0].second == 6);
}

TEST_CASE("step: empirical placement means match the moment matrix") {
  MultinomialLaw law;
  law.total_pmf = {{0, 0.3}, {1, 0.2}, {3, 0.5}};
  law.dispersal = {0.6, 0.4};
  Kernel k;
  k.space.labels = {"a", "b"};
  k.laws = {law, law};
  MomentMatrix m = mean_matrix(k);

  Pcg32 rng = Pcg32::for_replica(4, 0);
  const int reps = 20000;
  double sum[2] = {0, 0};
  for (int i = 0; i < reps; ++i) {
    Config next = step(k, cfg({{0, 1}}), rng);
    sum[0] += next.count_at(0);
    sum[1] += next.count_at(1);
  }
  for (int y = 0; y < 2; ++y) {
    double se = std::sqrt(3.0 / reps);  // crude bound on the placement variance
    CHECK(std::abs(sum[y] / reps - m.entries[0][y]) < 4 * se);
  }
}

TEST_CASE("run: determinism and stopping reasons") {
  Kernel geo = single_type_geometric(2.0);

  Trajectory empty = run(geo, Config{}, 10, 1000, 9);
  CHECK(empty.stopped_reason == StopReason::kExtinct);
  CHECK(empty.generations.size() == 1);

  Trajectory a = run(geo, cfg({{0, 1}}), 40, 500, 12345);
  Trajectory b = run(geo, cfg({{0, 1}}), 40, 500, 12345);
  REQUIRE(a.generations.size() == b.generations.size());
  for (std::size_t i = 0; i < a.generations.size(); ++i)
    CHECK(a.generations[i] == b.generations[i]);
  CHECK(a.stopped_reason == b.stopped_reason);

  Trajectory c = run(geo, cfg({{0, 1}}), 40, 500, 54321);
  bool differ = c.generations.size() != a.generations.size();
  for (std::size_t i = 0; !differ && i < c.generations.size(); ++i)
    differ = !(c.generations[i] == a.generations[i]);
  CHECK(differ);  // different seed, different path (overwhelmingly)
}

TEST_CASE("run: extinct fraction of the supercritical geometric kernel") {
  Kernel geo = single_type_geometric(2.0);
  int extinct = 0;
  const int reps = 10000;
  for (int r = 0; r < reps; ++r) {
    Trajectory t = run(geo, cfg({{0, 1}}), 50, 200, 777 + r);
    if (t.stopped_reason == StopReason::kExtinct) ++extinct;
  }
  double se = std::sqrt(0.25 / reps);
  CHECK(std::abs(extinct / double(reps) - 0.5) < 3 * se);
}

TEST_CASE("mc_extinction matches analytic extinction probabilities") {
  Kernel geo = single_type_geometric(2.0);
  McEstimate est = mc_extinction(geo, 0, {0}, 20000, 60, 128, 10, 2024);
  CHECK(est.undecided <= 5);
  CHECK(std::abs(est.point - 0.5) < 3 * est.std_error + 1e-3);

  // subcritical: everything dies quickly, nothing undecided
  Kernel sub = single_type_geometric(0.5);
  McEstimate sure = mc_extinction(sub, 0, {0}, 4000, 60, 128, 10, 7);
  CHECK(sure.point == 1.0);
  CHECK(sure.undecided == 0);
}

TEST_CASE("mc_extinction on moyal1: finite sets die out") {
  auto bundle = gallery::moyal1(gallery::PSpec{}, 12);
  Kernel kill = bundle.kernel.with_boundary(BoundaryPolicy::kKill);
  McEstimate est = mc_extinction(kill, 0, {5}, 3000, 60, 1000, 10, 99);
  CHECK(est.point == 1.0);  // every replica dies inside the truncation

  // under SurviveOutside the escapees count as surviving, reproducing the
  // pinned-boundary value 1 - prod p_i of the fixed-point engine
  McEstimate so = mc_extinction(bundle.kernel, 0, {5}, 20000, 60, 1000, 10, 99);
  double pinned = 1.0;
  for (std::size_t i = 0; i < 12; ++i) pinned *= gallery::PSpec{}.p(i);
  double expected = 1.0 - pinned;
  CHECK(std::abs(so.point - expected) < 3 * so.std_error + 1e-3);
}

TEST_CASE("martingale_test") {
  Kernel geo = single_type_geometric(2.0);

  SUBCASE("z = 1 is exact") {
    MartingaleReport r = martingale_test(geo, cfg({{0, 1}}),
                                         ProbVector::ones(1), 2, 500, 5);
    CHECK(r.empirical_mean == 1.0);
    CHECK(r.predicted == 1.0);
    CHECK(r.z_score == 0.0);
  }

  SUBCASE("z at the extinction probability is a martingale") {
    ProbVector q = q_global(geo).vector;
    MartingaleReport r = martingale_test(geo, cfg({{0, 2}}), q, 3, 40000, 31);
    CHECK(r.predicted == doctest::Approx(q[0] * q[0]).epsilon(1e-9));
    CHECK(std::abs(r.z_score) < 4.0);
  }

  SUBCASE("k = 2 equals two nested applications of G") {
    ProbVector z(std::vector<double>{0.3});
    ProbVector g2 = eval_G(geo, eval_G(geo, z));
    MartingaleReport r = martingale_test(geo, cfg({{0, 1}}), z, 2, 100, 8);
    CHECK(r.predicted == g2[0]);
  }

  SUBCASE("one-step identity within 4 / sqrt(R)") {
    Pcg32 zrng = Pcg32::for_replica(77, 0);
    const std::size_t R = 4096;
    int failures = 0;
    for (int trial = 0; trial < 40; ++trial) {
      ProbVector z(std::vector<double>{zrng.next_double()});
      MartingaleReport r =
          martingale_test(geo, cfg({{0, 1}}), z, 1, R, 1000 + trial);
      if (std::abs(r.empirical_mean - r.predicted) >= 4.0 / std::sqrt(R))
        ++failures;
    }
    CHECK(failures <= 1);  // 99%-level Chebyshev check
  }

  SUBCASE("terminal samples on extinct trajectories equal 1") {
    ProbVector q = q_global(geo).vector;
    MartingaleReport r = martingale_test(geo, cfg({{0, 1}}), q, 12, 400, 13);
    int ones = 0;
    for (double w : r.w_samples)
      if (w == 1.0) ++ones;
    CHECK(ones > 100);  // most extinctions happen well before generation 12
  }
}

TEST_CASE("displacement statistics") {
  auto bundle = gallery::moyal1(gallery::PSpec{}, 16);

  SUBCASE("immobile particle stays at distance zero") {
    Kernel k = explicit_kernel({"a", "b"}, {{{cfg({{0, 1}}), 1.0}},
                                            {{cfg({{1, 1}}), 1.0}}});
    k.space.metric = std::vector<std::vector<double>>{{0, 1}, {1, 0}};
    Trajectory t = run(k, cfg({{0, 1}}), 5, 100, 3);
    DisplacementSeries s = displacement_stats(k.space, t, 0);
    for (double v : s.max_displacement) CHECK(v == 0.0);
    for (double v : s.min_displacement) CHECK(v == 0.0);
  }

  SUBCASE("the drift chain walks right at unit speed while alive") {
    Trajectory t = run(bundle.kernel, cfg({{0, 1}}), 15, 100, 41);
    DisplacementSeries s = displacement_stats(bundle.kernel.space, t, 0);
    for (std::size_t n = 0; n < t.generations.size(); ++n) {
      if (t.generations[n].empty()) {
        CHECK(s.max_displacement[n] == 0.0);
      } else {
        CHECK(s.max_displacement[n] == double(n));
        CHECK(s.min_displacement[n] == double(n));
      }
    }
  }

  SUBCASE("missing metric is an error") {
    Kernel k = single_type_geometric(2.0);
    Trajectory t = run(k, cfg({{0, 1}}), 3, 100, 3);
    CHECK_THROWS_AS(displacement_stats(k.space, t, 0), Error);
  }
}

TEST_CASE("growth_test") {
  SUBCASE("supercritical geometric populations blow past 100") {
    Kernel geo = single_type_geometric(2.0);
    GrowthReport r = growth_test(geo, 0, {0}, 3000, 30, 100000, 8);
    REQUIRE(r.surviving > 1000);
    REQUIRE(r.thresholds.size() >= 2);
    CHECK(r.thresholds[1] == 100);
    CHECK(r.fractions[1] >= 0.99);
    // monotone in the horizon
    GrowthReport shorter = growth_test(geo, 0, {0}, 3000, 12, 100000, 8);
    for (std::size_t t = 0; t < r.fractions.size(); ++t)
      CHECK(shorter.fractions[t] <= r.fractions[t] + 1e-12);
  }

  SUBCASE("subcritical kernels pass vacuously") {
    Kernel sub = single_type_geometric(0.5);
    GrowthReport r = growth_test(sub, 0, {0}, 500, 40, 100000, 8);
    CHECK(r.surviving == 0);
  }

  SUBCASE("moyal1 fails the precondition: inf q_local is 0") {
    auto bundle = gallery::moyal1(gallery::PSpec{}, 40);
    CHECK_THROWS_WITH_AS(growth_test(bundle.kernel, 0,
                                     all_sites(bundle.kernel), 100, 20, 1000, 8),
                         doctest::Contains("not bounded away"), Error);
  }
}

TEST_CASE("replica streams make results independent of the thread count") {
  Kernel geo = single_type_geometric(2.0);
  auto run_with_threads = [&](const char* n) {
    setenv("BRANCHLAB_THREADS", n, 1);
    McEstimate est = mc_extinction(geo, 0, {0}, 20000, 50, 128, 10, 555);
    unsetenv("BRANCHLAB_THREADS");
    return est;
  };
  McEstimate one = run_with_threads("1");
  McEstimate eight = run_with_threads("8");
  CHECK(one.point == eight.point);
  CHECK(one.extinct_in_a == eight.extinct_in_a);
  CHECK(one.surviving_in_a == eight.surviving_in_a);
  CHECK(one.undecided == eight.undecided);
}
