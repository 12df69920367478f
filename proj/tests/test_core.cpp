#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "branchlab/core.hpp"
#include "branchlab/gallery.hpp"
#include "branchlab/genfun.hpp"
#include "branchlab/json_io.hpp"
#include "branchlab/rng.hpp"

#include "helpers.hpp"

using namespace branchlab;
using namespace branchlab::testing;

TEST_CASE("validate accepts the moyal1 kernel and sees no triviality") {
  auto bundle = gallery::moyal1(gallery::PSpec{}, 40);
  ValidationReport report = validate(bundle.kernel);
  CHECK(report.ok);
  CHECK_FALSE(report.triviality_flag);
}

TEST_CASE("validate flags mass != 1") {
  Kernel k = explicit_kernel({"a"}, {{{cfg({{0, 1}}), 0.5}, {Config{}, 0.4}}});
  ValidationReport report = validate(k);
  CHECK_FALSE(report.ok);
  bool found = false;
  for (const auto& issue : report.issues)
    if (issue.severity == Severity::kError &&
        issue.message.find("mass 0.9 != 1") != std::string::npos)
      found = true;
  CHECK(found);
}

TEST_CASE("validate flags negative probabilities and bad indices") {
  Kernel k = explicit_kernel({"a"}, {{{cfg({{0, 1}}), 1.2}, {Config{}, -0.2}}});
  CHECK_FALSE(validate(k).ok);

  Kernel bad_idx = explicit_kernel({"a"}, {{{cfg({{7, 1}}), 1.0}}});
  ValidationReport report = validate(bad_idx);
  CHECK_FALSE(report.ok);
  bool found = false;
  for (const auto& issue : report.issues)
    if (issue.message.find("invalid site index") != std::string::npos)
      found = true;
  CHECK(found);
}

TEST_CASE("self-loop point mass trips the triviality flag") {
  Kernel k = explicit_kernel({"a", "b"}, {{{cfg({{0, 1}}), 1.0}},
                                          {{cfg({{1, 1}}), 1.0}}});
  ValidationReport report = validate(k);
  CHECK(report.ok);
  CHECK(report.triviality_flag);
}

TEST_CASE("deterministic right shift is not trivial under the exact check") {
  // every particle has exactly one child, but it always leaves its own
  // communicating class, so extinction questions stay meaningful under Kill
  Kernel k = explicit_kernel(
      {"a", "b"}, {{{cfg({{1, 1}}), 1.0}}, {{cfg({}, 1), 1.0}}});
  ValidationReport report = validate(k);
  CHECK(report.ok);
  CHECK_FALSE(report.triviality_flag);
}

TEST_CASE("mean matrix of moyal1 is the superdiagonal of p_n") {
  gallery::PSpec p;
  auto bundle = gallery::moyal1(p, 10);
  MomentMatrix m = mean_matrix(bundle.kernel);
  for (std::size_t x = 0; x < 10; ++x)
    for (std::size_t y = 0; y < 10; ++y) {
      double expected = (y == x + 1) ? p.p(x) : 0.0;
      CHECK(m.entries[x][y] == doctest::Approx(expected).epsilon(1e-14));
    }
  CHECK(m.outside[9] == doctest::Approx(p.p(9)));
}

TEST_CASE("point mass on one child at self gives an identity row") {
  Kernel k = explicit_kernel({"a", "b"}, {{{cfg({{0, 1}}), 1.0}},
                                          {{cfg({{1, 1}}), 1.0}}});
  MomentMatrix m = mean_matrix(k);
  CHECK(m.entries[0][0] == 1.0);
  CHECK(m.entries[0][1] == 0.0);
  CHECK(m.entries[1][1] == 1.0);
}

TEST_CASE("multinomial mean matrix matches the brute-force expectation") {
  MultinomialLaw law;
  law.total_pmf = {{0, 0.25}, {1, 0.25}, {2, 0.25}, {4, 0.25}};  // mean 1.75
  law.dispersal = {0.5, 0.5};
  Kernel k;
  k.space.labels = {"a", "b"};
  k.laws = {law, law};
  MomentMatrix m = mean_matrix(k);
  for (std::size_t y = 0; y < 2; ++y) {
    double oracle = multinomial_mean_brute_force(law, y);
    CHECK(m.entries[0][y] == doctest::Approx(oracle).epsilon(1e-12));
  }
  // the spec's worked case: mean 2, dispersal (1/2, 1/2) -> row (1, 1)
  MultinomialLaw two;
  two.total_pmf = {{2, 1.0}};
  two.dispersal = {0.5, 0.5};
  Kernel k2;
  k2.space.labels = {"a", "b"};
  k2.laws = {two, two};
  MomentMatrix m2 = mean_matrix(k2);
  CHECK(m2.entries[0][0] == doctest::Approx(1.0));
  CHECK(m2.entries[0][1] == doctest::Approx(1.0));
  CHECK(m2.row_sums[0] == doctest::Approx(2.0));
}

TEST_CASE("total offspring pmf") {
  gallery::PSpec p;
  auto bundle = gallery::moyal1(p, 6);
  Pmf pmf = total_offspring_pmf(bundle.kernel, 3);
  REQUIRE(pmf.mass.size() == 2);
  CHECK(pmf.mass[0] == doctest::Approx(1.0 - p.p(3)));
  CHECK(pmf.mass[1] == doctest::Approx(p.p(3)));

  Kernel empty = explicit_kernel({"a"}, {{{Config{}, 1.0}}});
  Pmf p0 = total_offspring_pmf(empty, 0);
  REQUIRE(p0.mass.size() == 1);
  CHECK(p0.mass[0] == 1.0);

  Kernel split = explicit_kernel({"a", "b"}, {{{cfg({{0, 1}, {1, 1}}), 1.0}},
                                              {{Config{}, 1.0}}});
  Pmf p2 = total_offspring_pmf(split, 0);
  REQUIRE(p2.mass.size() == 3);
  CHECK(p2.mass[2] == doctest::Approx(1.0));

  Kernel geo = single_type_geometric(2.0);
  Pmf pg = total_offspring_pmf(geo, 0, 1e-10);
  double mass = std::accumulate(pg.mass.begin(), pg.mass.end(), 0.0);
  CHECK(mass + pg.tail == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pg.tail <= 1e-10);
  CHECK(pg.mass[0] == doctest::Approx(1.0 / 3.0));
  CHECK(pg.mass[1] == doctest::Approx(2.0 / 9.0));
}

TEST_CASE("total offspring pmf is invariant under site relabeling") {
  auto [mu, nu] = gallery::incomparable_pair();
  (void)nu;
  // swap the two sites of mu
  Kernel swapped = mu;
  std::swap(swapped.space.labels[0], swapped.space.labels[1]);
  for (auto& law : swapped.laws) {
    auto& ex = std::get<ExplicitLaw>(law);
    for (auto& [c, p] : ex.support) {
      std::vector<std::pair<SiteIndex, std::uint32_t>> moved;
      for (auto& [s, cnt] : c.entries) moved.emplace_back(1 - s, cnt);
      c = Config::from_pairs(std::move(moved), c.outside);
    }
  }
  std::swap(swapped.laws[0], swapped.laws[1]);
  for (SiteIndex x = 0; x < 2; ++x) {
    Pmf a = total_offspring_pmf(mu, x);
    Pmf b = total_offspring_pmf(swapped, 1 - x);
    REQUIRE(a.mass.size() == b.mass.size());
    for (std::size_t i = 0; i < a.mass.size(); ++i)
      CHECK(a.mass[i] == doctest::Approx(b.mass[i]).epsilon(1e-14));
  }
}

TEST_CASE("space_time of a deterministic one-site chain") {
  Kernel k = explicit_kernel({"a"}, {{{cfg({{0, 1}}), 1.0}}});
  Kernel st = space_time(k, 2);
  REQUIRE(st.size() == 3);
  CHECK(st.space.labels[0] == "a@0");
  CHECK(st.space.labels[2] == "a@2");
  MomentMatrix m = mean_matrix(st);
  CHECK(m.entries[0][1] == 1.0);
  CHECK(m.entries[1][2] == 1.0);
  CHECK(m.row_sums[2] == 0.0);  // time boundary kills
}

TEST_CASE("space_time mean matrix is block-superdiagonal") {
  auto [mu, nu] = gallery::incomparable_pair();
  (void)mu;
  Kernel st = space_time(nu, 3);
  MomentMatrix big = mean_matrix(st);
  MomentMatrix base = mean_matrix(nu);
  const std::size_t n = nu.size();
  for (std::size_t layer = 0; layer <= 3; ++layer)
    for (std::size_t x = 0; x < n; ++x)
      for (std::size_t col = 0; col < st.size(); ++col) {
        double expected = 0.0;
        if (layer < 3 && col >= (layer + 1) * n && col < (layer + 2) * n)
          expected = base.entries[x][col - (layer + 1) * n];
        CHECK(big.entries[layer * n + x][col] ==
              doctest::Approx(expected).epsilon(1e-14));
      }
}

TEST_CASE("projection check") {
  // constant total-offspring law with any dispersal projects onto the
  // one-site branching process with the same law
  MultinomialLaw site0;
  site0.total_pmf = {{0, 0.3}, {2, 0.7}};
  site0.dispersal = {0.25, 0.75};
  MultinomialLaw site1 = site0;
  site1.dispersal = {0.6, 0.4};
  Kernel kx;
  kx.space.labels = {"a", "b"};
  kx.laws = {site0, site1};

  MultinomialLaw single;
  single.total_pmf = site0.total_pmf;
  single.dispersal = {1.0};
  Kernel kv;
  kv.space.labels = {"v"};
  kv.laws = {single};

  ProjectionResult r = projection_check(kx, kv, {0, 0}, 32, 7);
  CHECK(r.isomorphic);
  CHECK(r.max_deviation <= 1e-10);

  // identity projection
  ProjectionResult id = projection_check(kx, kx, {0, 1}, 16, 7);
  CHECK(id.isomorphic);

  // site-dependent laws do not project onto a singleton
  auto bundle = gallery::moyal1(gallery::PSpec{}, 8);
  Kernel kv2;
  kv2.space.labels = {"v"};
  MultinomialLaw vlaw;
  vlaw.total_pmf = {{0, 1.0 - gallery::PSpec{}.p(0)}, {1, gallery::PSpec{}.p(0)}};
  vlaw.dispersal = {1.0};
  kv2.laws = {vlaw};
  std::vector<SiteIndex> g(8, 0);
  ProjectionResult r2 = projection_check(bundle.kernel, kv2, g, 32, 7);
  CHECK_FALSE(r2.isomorphic);
  CHECK(r2.max_deviation > 1e-6);

  CHECK_THROWS_WITH_AS(projection_check(kx, kx, {0, 0}, 4, 1),
                       doctest::Contains("does not cover"), Error);
}

TEST_CASE("kernel JSON round trip") {
  auto bundle = gallery::moyal1(gallery::PSpec{}, 5);
  nlohmann::json j = kernel_to_json(bundle.kernel);
  Kernel back = kernel_from_json(j);
  CHECK(back.space.labels == bundle.kernel.space.labels);
  CHECK(back.boundary == bundle.kernel.boundary);
  REQUIRE(back.laws.size() == bundle.kernel.laws.size());
  ProbVector z(std::vector<double>{0.1, 0.9, 0.4, 0.7, 0.2});
  ProbVector a = eval_G(bundle.kernel, z);
  ProbVector b = eval_G(back, z);
  CHECK(a.sup_dist(b) == 0.0);

  CHECK_THROWS_AS(kernel_from_json(nlohmann::json::parse("{\"space\":{}}")),
                  Error);
}

TEST_CASE("renormalization is opt-in") {
  nlohmann::json j;
  j["space"]["labels"] = {"a"};
  j["laws"] = nlohmann::json::array();
  j["laws"].push_back({{"type", "explicit"},
                       {"support", {{{"config", nlohmann::json::array()},
                                     {"p", 0.9}}}}});
  j["boundary"] = "kill";
  Kernel strict = kernel_from_json(j);
  CHECK_FALSE(validate(strict).ok);
  std::vector<std::string> notes;
  Kernel fixed = kernel_from_json(j, true, &notes);
  CHECK(validate(fixed).ok);
  CHECK(notes.size() == 1);
}
