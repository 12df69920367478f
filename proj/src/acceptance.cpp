#include "branchlab/acceptance.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>

#include "branchlab/cli.hpp"
#include "branchlab/core.hpp"
#include "branchlab/gallery.hpp"
#include "branchlab/genfun.hpp"
#include "branchlab/json_io.hpp"
#include "branchlab/orders.hpp"
#include "branchlab/pairgen.hpp"
#include "branchlab/rng.hpp"
#include "branchlab/sim.hpp"

namespace branchlab::acceptance {

namespace {

namespace fs = std::filesystem;

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

Kernel geometric_single(double mean) {
  Kernel k;
  k.space.labels = {"a"};
  GeometricLaw law;
  law.mean = mean;
  law.dispersal = {1.0};
  k.laws = {law};
  return k;
}

// ---- independent oracles ------------------------------------------------

// Brute-force multinomial pgf: enumerate every composition of every count
// with its multinomial weight. Never touches the closed-form path.
void compositions(std::uint32_t left, std::size_t box,
                  std::vector<std::uint32_t>& counts,
                  const std::function<void(const std::vector<std::uint32_t>&)>& fn) {
  if (box + 1 == counts.size()) {
    counts[box] = left;
    fn(counts);
    return;
  }
  for (std::uint32_t c = 0; c <= left; ++c) {
    counts[box] = c;
    compositions(left - c, box + 1, counts, fn);
  }
}

double factorial(std::uint32_t n) {
  double f = 1.0;
  for (std::uint32_t i = 2; i <= n; ++i) f *= i;
  return f;
}

double multinomial_pgf_oracle(const MultinomialLaw& law,
                              const std::vector<double>& z) {
  double total = 0.0;
  for (const auto& [n, p] : law.total_pmf) {
    double inner = 0.0;
    std::vector<std::uint32_t> counts(law.dispersal.size(), 0);
    compositions(n, 0, counts, [&](const std::vector<std::uint32_t>& cs) {
      double weight = factorial(n);
      double value = 1.0;
      for (std::size_t y = 0; y < cs.size(); ++y) {
        weight /= factorial(cs[y]);
        for (std::uint32_t i = 0; i < cs[y]; ++i)
          value *= law.dispersal[y] * z[y];
      }
      inner += weight * value;
    });
    total += p * inner;
  }
  return total;
}

// Truncated-series oracle for the geometric closed form: sum the parametric
// pmf against powers of the dispersal average until the tail is below 1e-12.
double geometric_series_oracle(const GeometricLaw& law,
                               const std::vector<double>& z) {
  double s = 0.0;
  for (std::size_t y = 0; y < law.dispersal.size(); ++y)
    s += law.dispersal[y] * z[y];
  double term = 1.0 / (1.0 + law.mean);
  double ratio = law.mean / (1.0 + law.mean);
  double power = 1.0;
  double total = 0.0;
  double cum = 0.0;
  while (cum < 1.0 - 1e-12) {
    total += term * power;
    cum += term;
    term *= ratio;
    power *= s;
    if (term <= 0.0) break;
  }
  return total;
}

struct Timed {
  double seconds;
  bool pass;
  std::string detail;
};

// ---- criteria -----------------------------------------------------------

CriterionResult c1_geometric_roots() {
  CriterionResult r{1, "global extinction, single-type geometric", false, "", 0};
  double t0 = now_seconds();
  IterationResult q2 = q_global(geometric_single(2.0));
  IterationResult q3 = q_global(geometric_single(3.0));
  r.seconds = now_seconds() - t0;
  double e2 = std::abs(q2.vector[0] - 0.5);
  double e3 = std::abs(q3.vector[0] - 1.0 / 3.0);
  r.pass = q2.converged && q3.converged && e2 <= 1e-10 && e3 <= 1e-10 &&
           r.seconds < 0.1;
  r.detail = "|q(2)-1/2| = " + fmt(e2) + ", |q(3)-1/3| = " + fmt(e3) +
             ", runtime " + fmt(r.seconds) + " s (budget 0.1 s)";
  return r;
}

CriterionResult c2_moyal1_oracle() {
  CriterionResult r{2, "moyal1 tail-product oracle with boundary bracket",
                    false, "", 0};
  double t0 = now_seconds();
  auto bundle = gallery::moyal1(gallery::PSpec{}, 40);
  IterationResult so = q_global(bundle.kernel);
  IterationResult kill =
      q_global(bundle.kernel.with_boundary(BoundaryPolicy::kKill));
  r.seconds = now_seconds() - t0;

  double worst = 0.0;
  for (std::size_t n = 0; n <= 20; ++n) {
    double oracle = 1.0 - std::pow(2.0, -std::ldexp(1.0, -int(n)));
    worst = std::max(worst, std::abs(so.vector[n] - oracle));
  }
  bool bracket = true;
  const auto& oracle = bundle.oracles.at("q_global").values;
  for (std::size_t n = 0; n < 40; ++n)
    bracket = bracket && so.vector[n] <= oracle[n] + 1e-12 &&
              kill.vector[n] >= oracle[n] - 1e-12;
  r.pass = worst <= 1e-9 && bracket && r.seconds < 1.0;
  r.detail = "max |q(n) - (1-2^{-2^{-n}})| = " + fmt(worst) +
             " (n <= 20), bracket " + (bracket ? "holds" : "BROKEN") +
             ", runtime " + fmt(r.seconds) + " s (budget 1 s)";
  return r;
}

CriterionResult c3_fixed_point_family() {
  CriterionResult r{3, "moyal1 fixed-point family", false, "", 0};
  double t0 = now_seconds();
  gallery::PSpec p;
  const std::size_t n = 40;
  Kernel kernel = gallery::moyal1(p, n).kernel;
  std::vector<SiteIndex> interior;
  for (SiteIndex i = 0; i + 1 < n; ++i) interior.push_back(i);

  double worst_residual = 0.0;
  bool monotone = true, sup_at_zero = true;
  for (double z0 : {0.6, 0.75, 0.9}) {
    ProbVector z = gallery::moyal1_fixed_point(p, z0, n);
    worst_residual = std::max(worst_residual, residual_on(kernel, z, interior));
    for (std::size_t i = 0; i + 1 < n; ++i)
      monotone = monotone && z[i] > z[i + 1];
    sup_at_zero = sup_at_zero && z.max() == z[0];
  }
  r.seconds = now_seconds() - t0;
  r.pass = worst_residual <= 1e-12 && monotone && sup_at_zero;
  r.detail = "max interior residual = " + fmt(worst_residual) +
             ", strictly decreasing: " + (monotone ? "yes" : "NO") +
             ", sup at coordinate 0: " + (sup_at_zero ? "yes" : "NO");
  return r;
}

CriterionResult c4_local_extinction() {
  CriterionResult r{4, "local extinction, two independent routes", false, "", 0};
  double t0 = now_seconds();
  auto bundle = gallery::moyal1(gallery::PSpec{}, 40);
  SiteSet finite = {0, 1, 2, 3, 4, 5};

  LocalExtinctionResult fin = q_local(bundle.kernel, finite);
  double finite_err = 0.0;
  for (std::size_t x = 0; x < 40; ++x)
    finite_err = std::max(finite_err, std::abs(fin.bracket_upper[x] - 1.0));

  double full_err = 0.0;
  for (BoundaryPolicy policy :
       {BoundaryPolicy::kSurviveOutside, BoundaryPolicy::kKill}) {
    Kernel k = bundle.kernel.with_boundary(policy);
    LocalExtinctionResult full = q_local(k, all_sites(k));
    full_err = std::max(full_err,
                        full.q_local.sup_dist(q_global(k).vector));
  }

  double route_gap = 0.0;
  for (BoundaryPolicy policy :
       {BoundaryPolicy::kSurviveOutside, BoundaryPolicy::kKill}) {
    Kernel k = bundle.kernel.with_boundary(policy);
    for (const SiteSet& sites : {finite, all_sites(k)}) {
      LocalExtinctionResult route1 = q_local(k, sites);
      ProbVector route2 = q_local_space_time(k, sites, 200);
      route_gap = std::max(route_gap, route1.q_local.sup_dist(route2));
    }
  }
  r.seconds = now_seconds() - t0;
  r.pass = finite_err <= 1e-9 && full_err <= 1e-9 && route_gap <= 1e-8;
  r.detail = "|q(finite A) - 1| = " + fmt(finite_err) +
             ", |q(full) - q(X)| = " + fmt(full_err) +
             ", route disagreement = " + fmt(route_gap);
  return r;
}

CriterionResult c5_order_chain(bool fast) {
  CriterionResult r{5, "order chain on random dominated pairs", false, "", 0};
  const std::size_t pairs = fast ? 50 : 200;
  double t0 = now_seconds();
  std::size_t stoch_ok = 0, pgf_ok = 0, germ_ok = 0;
  for (std::size_t i = 0; i < pairs; ++i) {
    auto [mu, nu] = random_dominated_explicit_pair(1000 + i);
    if (stochastic_order_check_kernels(mu, nu).verdict.status ==
        OrderStatus::kCertified)
      ++stoch_ok;
    if (order_check_grid(mu, nu, 0.0).status == OrderStatus::kCertified)
      ++pgf_ok;
    if (order_check_grid(mu, nu, 0.5).status == OrderStatus::kCertified)
      ++germ_ok;
  }
  r.seconds = now_seconds() - t0;
  r.pass = stoch_ok == pairs && pgf_ok == pairs && germ_ok == pairs &&
           r.seconds < 60.0;
  r.detail = "stochastic " + std::to_string(stoch_ok) + "/" +
             std::to_string(pairs) + ", pgf " + std::to_string(pgf_ok) +
             ", germ " + std::to_string(germ_ok) + ", runtime " +
             fmt(r.seconds) + " s (budget 60 s)";
  return r;
}

CriterionResult c6_incomparability() {
  CriterionResult r{6, "two-site incomparability reproduction", false, "", 0};
  double t0 = now_seconds();
  auto [mu, nu] = gallery::incomparable_pair();

  OrderVerdict forward = order_check_grid(mu, nu, 0.0);
  OrderVerdict backward = order_check_grid(nu, mu, 0.0);
  OrderVerdict forward_germ = order_check_grid(mu, nu, 0.5);
  OrderVerdict backward_germ = order_check_grid(nu, mu, 0.5);

  bool falsified = forward.status == OrderStatus::kFalsified &&
                   backward.status == OrderStatus::kFalsified &&
                   forward_germ.status == OrderStatus::kFalsified &&
                   backward_germ.status == OrderStatus::kFalsified;
  bool witness_on_edge = false;
  if (forward.witness) {
    const auto& z = forward.witness->z;
    witness_on_edge = z.size() == 2 && z[1] == 1.0 && z[0] > 0.1 && z[0] < 1.0;
  }
  bool diagonal = true;
  for (double t = 0.0; t < 1.0; t += 1.0 / 512.0) {
    ProbVector z(std::vector<double>{t, t});
    if (eval_G(mu, z)[0] > eval_G(nu, z)[0] + 1e-12) diagonal = false;
  }
  r.seconds = now_seconds() - t0;
  r.pass = falsified && witness_on_edge && diagonal;
  r.detail = std::string("pgf/germ falsified both ways: ") +
             (falsified ? "yes" : "NO") +
             ", witness on the z2 = 1 edge: " + (witness_on_edge ? "yes" : "NO") +
             ", diagonal domination: " + (diagonal ? "yes" : "NO");
  return r;
}

CriterionResult c7_theorem_inequality(bool fast) {
  CriterionResult r{7, "germ-order extinction inequality", false, "", 0};
  const std::size_t pairs = fast ? 30 : 200;
  const double deltas[] = {0.0, 0.25, 0.5};
  double t0 = now_seconds();
  std::size_t certified = 0;
  double worst = -1.0;
  for (std::size_t i = 0; i < pairs; ++i) {
    auto [mu, nu] = random_certified_multinomial_pair(2000 + i, 5, 3);
    bool all_certified = true;
    for (double delta : deltas)
      all_certified = all_certified &&
                      germ_check_multinomial(mu, nu, delta).status ==
                          OrderStatus::kCertified;
    if (all_certified) ++certified;
    for (const SiteSet& sites : {SiteSet{0}, all_sites(mu)}) {
      LocalExtinctionResult qm = q_local(mu, sites);
      LocalExtinctionResult qn = q_local(nu, sites);
      for (double delta : deltas)
        for (std::size_t x = 0; x < 5; ++x) {
          double rhs = qn.q_local[x] * (1.0 - delta) + delta;
          worst = std::max(worst, qm.q_local[x] - rhs);
        }
    }
  }
  r.seconds = now_seconds() - t0;
  r.pass = certified == pairs && worst <= 1e-8 && r.seconds < 300.0;
  r.detail = "certified " + std::to_string(certified) + "/" +
             std::to_string(pairs) + ", worst violation = " + fmt(worst) +
             " (tol 1e-8), runtime " + fmt(r.seconds) + " s (budget 300 s)";
  return r;
}

CriterionResult c8_monte_carlo(bool fast) {
  CriterionResult r{8, "Monte Carlo consistency", false, "", 0};
  const std::size_t seeds = fast ? 10 : 100;
  const std::size_t replicas = fast ? 20000 : 100000;
  double t0 = now_seconds();
  Kernel geo = geometric_single(2.0);

  std::size_t within = 0;
  for (std::size_t s = 0; s < seeds; ++s) {
    McEstimate est =
        mc_extinction(geo, 0, {0}, replicas, 60, 128, 10, 42000 + s);
    if (std::abs(est.point - 0.5) <= 3.0 * est.std_error) ++within;
  }

  Pcg32 zrng = Pcg32::for_replica(99, 0);
  std::size_t mart_ok = 0;
  const std::size_t mart_pairs = 20;
  for (std::size_t i = 0; i < mart_pairs; ++i) {
    ProbVector z(std::vector<double>{zrng.next_double()});
    std::size_t k = 1 + i % 3;
    MartingaleReport rep =
        martingale_test(geo, Config::from_pairs({{0, 1}}), z, k, 20000,
                        7000 + i);
    if (std::abs(rep.z_score) < 4.0) ++mart_ok;
  }
  r.seconds = now_seconds() - t0;

  std::size_t need = seeds * 95 / 100;
  r.pass = within >= need && mart_ok == mart_pairs && r.seconds < 180.0;
  r.detail = std::to_string(within) + "/" + std::to_string(seeds) +
             " seeds within 3 SE of 1/2 (need " + std::to_string(need) +
             "), martingale z-scores in (-4,4): " + std::to_string(mart_ok) +
             "/" + std::to_string(mart_pairs) + ", runtime " + fmt(r.seconds) +
             " s (budget 180 s)";
  return r;
}

CriterionResult c9_oracle_equivalence() {
  CriterionResult r{9, "closed forms against enumeration oracles", false, "", 0};
  double t0 = now_seconds();
  Pcg32 rng = Pcg32::for_replica(314, 0);

  // multinomial closed form vs brute force, <= 3 sites, counts <= 4
  double worst_mn = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t n_sites = 1 + rng.bounded(3);
    MultinomialLaw law;
    double mass_left = 1.0;
    for (std::uint32_t c = 0; c <= 4; ++c) {
      double p = (c == 4) ? mass_left : mass_left * rng.next_double() * 0.5;
      law.total_pmf.emplace_back(c, p);
      mass_left -= (c == 4) ? 0.0 : p;
    }
    std::vector<double> row(n_sites);
    double acc = 0.0;
    for (std::size_t y = 0; y + 1 < n_sites; ++y) {
      row[y] = (1.0 - acc) * rng.next_double() * 0.8;
      acc += row[y];
    }
    row[n_sites - 1] = 1.0 - acc;
    law.dispersal = row;

    Kernel k;
    for (std::size_t i = 0; i < n_sites; ++i)
      k.space.labels.push_back(std::string(1, char('a' + i)));
    for (std::size_t i = 0; i < n_sites; ++i) k.laws.push_back(law);

    ProbVector z(n_sites);
    for (std::size_t i = 0; i < n_sites; ++i) z[i] = rng.next_double();
    double closed = eval_G(k, z)[0];
    double oracle = multinomial_pgf_oracle(law, z.values());
    worst_mn = std::max(worst_mn, std::abs(closed - oracle));
  }

  // geometric closed form vs truncated series
  double worst_geo = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    GeometricLaw law;
    law.mean = 0.25 + 3.0 * rng.next_double();
    law.dispersal = {0.3, 0.7};
    Kernel k;
    k.space.labels = {"a", "b"};
    k.laws = {law, law};
    ProbVector z(std::vector<double>{rng.next_double(), rng.next_double()});
    double closed = eval_G(k, z)[0];
    double oracle = geometric_series_oracle(law, z.values());
    worst_geo = std::max(worst_geo, std::abs(closed - oracle));
  }
  r.seconds = now_seconds() - t0;
  r.pass = worst_mn <= 1e-12 && worst_geo <= 1e-9;
  r.detail = "multinomial |closed - enumerated| = " + fmt(worst_mn) +
             " (tol 1e-12), geometric |closed - series| = " + fmt(worst_geo) +
             " (tol 1e-9)";
  return r;
}

CriterionResult c10_determinism() {
  CriterionResult r{10, "byte-identical reruns across thread counts", false,
                    "", 0};
  double t0 = now_seconds();
  fs::path dir = fs::temp_directory_path() / "branchlab-acceptance";
  fs::create_directories(dir);
  Kernel geo = geometric_single(2.0);
  std::string kernel_path = (dir / "geometric.json").string();
  save_kernel(geo, kernel_path);

  auto run_cmd = [&](const std::vector<std::string>& args, const char* threads)
      -> int {
    setenv("BRANCHLAB_THREADS", threads, 1);
    std::ostringstream sink;
    std::streambuf* old = std::cout.rdbuf(sink.rdbuf());
    int code = cli::dispatch(args);
    std::cout.rdbuf(old);
    unsetenv("BRANCHLAB_THREADS");
    return code;
  };

  bool ok = true;
  std::string detail;
  struct Case {
    const char* name;
    std::vector<std::string> args;
  };
  std::string out1 = (dir / "out1.json").string();
  std::string out2 = (dir / "out2.json").string();
  std::string out3 = (dir / "out3.json").string();
  std::vector<Case> cases = {
      {"simulate mc",
       {"simulate", "mc", "-k", kernel_path, "--site", "a", "--set", "a",
        "--replicas", "20000", "--horizon", "50", "--pop-cap", "128",
        "--margin", "10", "--seed", "7"}},
      {"simulate run",
       {"simulate", "run", "-k", kernel_path, "--init", "a:2", "--horizon",
        "40", "--pop-cap", "1000", "--seed", "11"}},
  };
  for (const Case& c : cases) {
    auto with_out = [&](const std::string& path) {
      std::vector<std::string> args = c.args;
      args.push_back("-o");
      args.push_back(path);
      args.push_back("--manifest");
      args.push_back((dir / "manifest.json").string());
      return args;
    };
    int c1 = run_cmd(with_out(out1), "1");
    int c2 = run_cmd(with_out(out2), "8");
    int c3 = run_cmd(with_out(out3), "8");
    bool same = read_file(out1) == read_file(out2) &&
                read_file(out2) == read_file(out3);
    if (c1 != 0 || c2 != 0 || c3 != 0 || !same) {
      ok = false;
      detail += std::string(c.name) + " diverged; ";
    }
  }
  r.seconds = now_seconds() - t0;
  r.pass = ok;
  r.detail = ok ? "simulate mc / run byte-identical with 1 and 8 threads"
                : detail;
  return r;
}

}  // namespace

std::vector<CriterionResult> run_all(bool fast) {
  std::vector<CriterionResult> results;
  results.push_back(c1_geometric_roots());
  results.push_back(c2_moyal1_oracle());
  results.push_back(c3_fixed_point_family());
  results.push_back(c4_local_extinction());
  results.push_back(c5_order_chain(fast));
  results.push_back(c6_incomparability());
  results.push_back(c7_theorem_inequality(fast));
  results.push_back(c8_monte_carlo(fast));
  results.push_back(c9_oracle_equivalence());
  results.push_back(c10_determinism());
  return results;
}

bool print_report(const std::vector<CriterionResult>& results) {
  bool all = true;
  for (const auto& r : results) {
    all = all && r.pass;
    std::printf("[%s] %2d %s — %s\n", r.pass ? "PASS" : "FAIL", r.id,
                r.name.c_str(), r.detail.c_str());
  }
  std::printf("%s\n", all ? "acceptance: all criteria passed"
                          : "acceptance: FAILURES present");
  std::fflush(stdout);
  return all;
}

}  // namespace branchlab::acceptance
