#include "branchlab/orders.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "branchlab/maxflow.hpp"
#include "branchlab/poly.hpp"
#include "branchlab/rng.hpp"

namespace branchlab {

namespace {

constexpr double kCertSlack = 1e-12;  // rounding slack for structural certificates
// Evaluation noise on ties reaches a few ulps; a gap only counts as a
// violation when it clears this threshold.
constexpr double kFalsifyTol = 1e-12;

struct GeometricView {
  std::vector<std::vector<double>> matrix;  // mean_x * p(x,y), in range
  std::vector<double> constant;             // boundary contribution to 1 - s
};

std::optional<GeometricView> geometric_view(const Kernel& kernel) {
  GeometricView view;
  const std::size_t n = kernel.size();
  for (std::size_t x = 0; x < n; ++x) {
    const auto* geo = std::get_if<GeometricLaw>(&kernel.laws[x]);
    if (!geo) return std::nullopt;
    std::vector<double> row(n);
    for (std::size_t y = 0; y < n; ++y) row[y] = geo->mean * geo->dispersal[y];
    view.matrix.push_back(std::move(row));
    double outside_u =
        kernel.boundary == BoundaryPolicy::kKill ? 0.0 : 1.0;
    view.constant.push_back(geo->mean * geo->dispersal_outside * outside_u);
  }
  return view;
}

// min over u in [0, 1-delta]^N of sum_y D[y] u_y + c. The numerator of
// G_nu - G_mu for geometric pairs is linear in u = 1 - z, so this decides
// nonnegativity exactly, including at u = 0 where values vanish.
bool geometric_pair_certifies(const GeometricView& mu, const GeometricView& nu,
                              double delta) {
  const std::size_t n = mu.matrix.size();
  for (std::size_t x = 0; x < n; ++x) {
    double lo = mu.constant[x] - nu.constant[x];
    for (std::size_t y = 0; y < n; ++y) {
      double d = mu.matrix[x][y] - nu.matrix[x][y];
      if (d < 0.0) lo += d * (1.0 - delta);
    }
    if (lo < -kCertSlack) return false;
  }
  return true;
}

// All site polynomials of G_nu - G_mu have nonnegative Bernstein coefficients
// on [delta,1]^N. Sound for equality cases (zero coefficients allowed).
bool bernstein_pair_certifies(const Kernel& mu, const Kernel& nu,
                              double delta) {
  for (std::size_t x = 0; x < mu.size(); ++x) {
    auto pm = site_pgf_polynomial(mu, static_cast<SiteIndex>(x));
    auto pn = site_pgf_polynomial(nu, static_cast<SiteIndex>(x));
    if (!pm || !pn) return false;
    TensorPoly diff = poly_sub(*pn, *pm);
    if (min_bernstein_coeff(diff, delta) < -kCertSlack) return false;
  }
  return true;
}

struct GridScan {
  double min_gap = 0.0;
  std::vector<double> arg_z;
  SiteIndex arg_site = 0;
  bool any = false;
};

GridScan scan_grid(const Kernel& mu, const Kernel& nu, double delta,
                   double spacing) {
  const std::size_t n = mu.size();
  const std::size_t steps =
      static_cast<std::size_t>(std::ceil((1.0 - delta) / spacing));
  const std::size_t per_axis = steps + 1;
  std::size_t total = 1;
  for (std::size_t v = 0; v < n; ++v) total *= per_axis;

  GridScan scan;
  std::vector<std::size_t> idx(n, 0);
  ProbVector z(n);
  for (std::size_t linear = 0; linear < total; ++linear) {
    std::size_t rem = linear;
    for (std::size_t v = n; v-- > 0;) {
      idx[v] = rem % per_axis;
      rem /= per_axis;
    }
    for (std::size_t v = 0; v < n; ++v)
      z[v] = std::min(1.0, delta + static_cast<double>(idx[v]) * spacing);
    ProbVector gm = eval_G(mu, z);
    ProbVector gn = eval_G(nu, z);
    for (std::size_t x = 0; x < n; ++x) {
      double gap = gn[x] - gm[x];
      if (!scan.any || gap < scan.min_gap) {
        scan.any = true;
        scan.min_gap = gap;
        scan.arg_z = z.values();
        scan.arg_site = static_cast<SiteIndex>(x);
      }
    }
  }
  return scan;
}

double grid_point_count(double delta, double spacing, std::size_t n) {
  double per_axis = std::ceil((1.0 - delta) / spacing) + 1.0;
  return std::pow(per_axis, static_cast<double>(n));
}

}  // namespace

const char* to_string(OrderStatus status) {
  switch (status) {
    case OrderStatus::kCertified: return "certified";
    case OrderStatus::kFalsified: return "falsified";
    default: return "inconclusive";
  }
}

const char* to_string(Relation relation) {
  switch (relation) {
    case Relation::kStochastic: return "stochastic";
    case Relation::kPgf: return "pgf";
    default: return "germ";
  }
}

OrderVerdict order_check_grid(const Kernel& mu, const Kernel& nu, double delta,
                              double spacing) {
  if (mu.size() != nu.size())
    fail("DimensionMismatch", "kernels live on different spaces");
  if (!(delta >= 0.0 && delta < 1.0))
    fail("OutOfRange", "delta must lie in [0,1)");
  const std::size_t n = mu.size();
  if (grid_point_count(delta, spacing, n) > 1e7)
    fail("GridTooLarge", "grid enumeration exceeds 1e7 points");

  OrderVerdict verdict;
  verdict.relation = delta == 0.0 ? Relation::kPgf : Relation::kGerm;
  verdict.delta = delta;

  const double lipschitz = lipschitz_bound(mu) + lipschitz_bound(nu);
  bool structural = false;
  bool structural_known = false;

  double spacing_r = spacing;
  const double spacing_floor = 1.0 / 1024.0;
  for (;;) {
    GridScan scan = scan_grid(mu, nu, delta, spacing_r);
    verdict.margin = scan.min_gap;
    if (scan.min_gap < -kFalsifyTol) {
      verdict.status = OrderStatus::kFalsified;
      OrderWitness w;
      w.z = scan.arg_z;
      w.site = scan.arg_site;
      w.gap = scan.min_gap;
      verdict.witness = w;
      return verdict;
    }
    if (scan.min_gap >= lipschitz * spacing_r) {  // value margin covers cells
      verdict.status = OrderStatus::kCertified;
      return verdict;
    }
    if (!structural_known) {
      structural_known = true;
      structural = bernstein_pair_certifies(mu, nu, delta);
      if (!structural) {
        auto gm = geometric_view(mu);
        auto gn = geometric_view(nu);
        if (gm && gn) structural = geometric_pair_certifies(*gm, *gn, delta);
      }
    }
    if (structural) {
      verdict.status = OrderStatus::kCertified;
      return verdict;
    }
    double half = spacing_r / 2.0;
    if (half < spacing_floor || grid_point_count(delta, half, n) > 1e7) break;
    spacing_r = half;
  }
  verdict.status = OrderStatus::kInconclusive;
  return verdict;
}

namespace {

// phi as a rational P(t)/Q(t) with Q > 0 on [0,1]: tabulated pgfs have
// Q = 1, geometric ones are 1 / (1 + m(1-t)).
struct ScalarPgf {
  TensorPoly num;
  TensorPoly den;
  double lipschitz = 0.0;
  double eval(double t) const {
    std::vector<double> arg{t};
    return num.eval(arg) / den.eval(arg);
  }
};

ScalarPgf scalar_pgf(const OffspringLaw& law) {
  ScalarPgf out;
  if (const auto* mn = std::get_if<MultinomialLaw>(&law)) {
    out.num = poly1d_from_pmf(mn->total_pmf);
    out.den = poly1d_const(1.0);
    out.lipschitz = 0.0;
    for (const auto& [count, p] : mn->total_pmf)
      if (p > 0.0) out.lipschitz = std::max(out.lipschitz, double(count));
    return out;
  }
  if (const auto* geo = std::get_if<GeometricLaw>(&law)) {
    out.num = poly1d_const(1.0);
    out.den = poly1d_linear(1.0 + geo->mean, -geo->mean);  // 1 + m(1-t)
    out.lipschitz = geo->mean * (1.0 + geo->mean);
    return out;
  }
  fail("UnsupportedVariant",
       "germ_check_multinomial needs multinomial or geometric laws");
}

const std::vector<double>* dispersal_of(const OffspringLaw& law,
                                        double& outside) {
  if (const auto* mn = std::get_if<MultinomialLaw>(&law)) {
    outside = mn->dispersal_outside;
    return &mn->dispersal;
  }
  if (const auto* geo = std::get_if<GeometricLaw>(&law)) {
    outside = geo->dispersal_outside;
    return &geo->dispersal;
  }
  fail("UnsupportedVariant",
       "germ_check_multinomial needs multinomial or geometric laws");
}

}  // namespace

OrderVerdict germ_check_multinomial(const Kernel& mu, const Kernel& nu,
                                    double delta, std::size_t grid) {
  if (mu.size() != nu.size())
    fail("DimensionMismatch", "kernels live on different spaces");
  if (!(delta >= 0.0 && delta < 1.0))
    fail("OutOfRange", "delta must lie in [0,1)");
  if (grid < 2) fail("OutOfRange", "grid needs at least two points");
  const std::size_t n = mu.size();

  for (std::size_t x = 0; x < n; ++x) {
    double out_mu = 0.0, out_nu = 0.0;
    const auto* dm = dispersal_of(mu.laws[x], out_mu);
    const auto* dn = dispersal_of(nu.laws[x], out_nu);
    double dev = std::abs(out_mu - out_nu);
    for (std::size_t y = 0; y < n; ++y)
      dev = std::max(dev, std::abs((*dm)[y] - (*dn)[y]));
    if (dev > 1e-12)
      fail("DispersalMismatch", "dispersal rows differ at site " +
                                    mu.space.labels[x] + " by " +
                                    std::to_string(dev));
  }

  OrderVerdict verdict;
  verdict.relation = Relation::kGerm;
  verdict.delta = delta;

  const double spacing_t = (1.0 - delta) / static_cast<double>(grid - 1);
  bool all_certified = true;
  bool any = false;
  for (std::size_t x = 0; x < n; ++x) {
    ScalarPgf pm = scalar_pgf(mu.laws[x]);
    ScalarPgf pn = scalar_pgf(nu.laws[x]);
    double site_min = 0.0;
    double site_arg = delta;
    bool site_any = false;
    for (std::size_t j = 0; j < grid; ++j) {
      double t = std::min(1.0, delta + static_cast<double>(j) * spacing_t);
      double gap = pn.eval(t) - pm.eval(t);
      if (!site_any || gap < site_min) {
        site_any = true;
        site_min = gap;
        site_arg = t;
      }
    }
    if (!any || site_min < verdict.margin) {
      any = true;
      verdict.margin = site_min;
    }
    if (site_min < -kFalsifyTol) {
      verdict.status = OrderStatus::kFalsified;
      OrderWitness w;
      w.z = {site_arg};
      w.site = static_cast<SiteIndex>(x);
      w.gap = site_min;
      verdict.witness = w;
      return verdict;
    }
    if (site_min >= (pm.lipschitz + pn.lipschitz) * spacing_t) continue;
    // Cross-multiplied difference P_nu Q_mu - P_mu Q_nu shares the sign of
    // phi_nu - phi_mu; certify it on [delta,1] in Bernstein form.
    TensorPoly lhs = poly_sub(poly1d_mul(pn.num, pm.den),
                              poly1d_mul(pm.num, pn.den));
    if (min_bernstein_coeff(lhs, delta) < -kCertSlack) all_certified = false;
  }
  verdict.status =
      all_certified ? OrderStatus::kCertified : OrderStatus::kInconclusive;
  return verdict;
}

StochasticOrderResult stochastic_order_check(const ExplicitLaw& mu,
                                             const ExplicitLaw& nu) {
  // merged, zero-mass-free supports
  auto collect = [](const ExplicitLaw& law) {
    std::map<Config, double> atoms;
    for (const auto& [cfg, p] : law.support)
      if (p > 0.0) atoms[cfg] += p;
    return atoms;
  };
  std::map<Config, double> mu_atoms = collect(mu);
  std::map<Config, double> nu_atoms = collect(nu);

  StochasticOrderResult result;
  result.verdict.relation = Relation::kStochastic;

  const std::size_t n_mu = mu_atoms.size();
  const std::size_t n_nu = nu_atoms.size();
  // nodes: 0 = source, 1..n_nu = nu atoms, then mu atoms, last = sink
  MaxFlow flow(2 + n_mu + n_nu);
  const std::size_t sink = 1 + n_nu + n_mu;
  std::vector<const Config*> nu_cfg;
  std::vector<double> nu_mass;
  std::vector<std::size_t> nu_edge;
  for (const auto& [cfg, mass] : nu_atoms) {
    nu_edge.push_back(flow.add_edge(0, 1 + nu_cfg.size(), mass));
    nu_cfg.push_back(&cfg);
    nu_mass.push_back(mass);
  }
  std::vector<const Config*> mu_cfg;
  std::vector<double> mu_mass;
  std::vector<std::size_t> mu_edge;
  for (const auto& [cfg, mass] : mu_atoms) {
    mu_edge.push_back(
        flow.add_edge(1 + n_nu + mu_cfg.size(), sink, mass));
    mu_cfg.push_back(&cfg);
    mu_mass.push_back(mass);
  }
  struct Arc {
    std::size_t nu_idx, mu_idx, edge;
  };
  std::vector<Arc> arcs;
  for (std::size_t g = 0; g < n_nu; ++g)
    for (std::size_t f = 0; f < n_mu; ++f)
      if (mu_cfg[f]->dominates(*nu_cfg[g]))
        arcs.push_back(
            {g, f, flow.add_edge(1 + g, 1 + n_nu + f, 2.0)});

  double total_nu = 0.0;
  for (double m : nu_mass) total_nu += m;
  double pushed = flow.run(0, sink);
  double deficit = total_nu - pushed;

  if (deficit <= 1e-9) {
    result.verdict.status = OrderStatus::kCertified;
    result.verdict.margin = 0.0;
    CouplingCertificate cert;
    std::vector<double> mu_used(n_mu, 0.0), nu_used(n_nu, 0.0);
    for (const Arc& arc : arcs) {
      double m = flow.flow_on(arc.edge);
      if (m > 1e-15) {
        cert.joint.push_back({*mu_cfg[arc.mu_idx], *nu_cfg[arc.nu_idx], m});
        mu_used[arc.mu_idx] += m;
        nu_used[arc.nu_idx] += m;
      }
    }
    for (std::size_t f = 0; f < n_mu; ++f)
      cert.mu_marginal_residual =
          std::max(cert.mu_marginal_residual, std::abs(mu_used[f] - mu_mass[f]));
    for (std::size_t g = 0; g < n_nu; ++g)
      cert.nu_marginal_residual =
          std::max(cert.nu_marginal_residual, std::abs(nu_used[g] - nu_mass[g]));
    result.certificate = std::move(cert);
    return result;
  }

  result.verdict.status = OrderStatus::kFalsified;
  result.verdict.margin = -deficit;
  OrderWitness w;
  std::vector<bool> reach = flow.source_side();
  std::vector<const Config*> generators;
  for (std::size_t g = 0; g < n_nu; ++g)
    if (reach[1 + g]) generators.push_back(nu_cfg[g]);
  // keep minimal generators only
  for (const Config* cand : generators) {
    bool minimal = true;
    for (const Config* other : generators)
      if (other != cand && cand->dominates(*other) && !(*cand == *other))
        minimal = false;
    if (minimal) w.upper_set_generators.push_back(*cand);
  }
  auto upper_mass = [&w](const std::map<Config, double>& atoms) {
    double mass = 0.0;
    for (const auto& [cfg, p] : atoms)
      for (const Config& gen : w.upper_set_generators)
        if (cfg.dominates(gen)) {
          mass += p;
          break;
        }
    return mass;
  };
  w.mu_mass = upper_mass(mu_atoms);
  w.nu_mass = upper_mass(nu_atoms);
  w.gap = w.mu_mass - w.nu_mass;
  result.verdict.witness = std::move(w);
  return result;
}

KernelStochasticResult stochastic_order_check_kernels(const Kernel& mu,
                                                      const Kernel& nu) {
  if (mu.size() != nu.size())
    fail("DimensionMismatch", "kernels live on different spaces");
  KernelStochasticResult out;
  out.verdict.relation = Relation::kStochastic;
  out.verdict.status = OrderStatus::kCertified;
  for (std::size_t x = 0; x < mu.size(); ++x) {
    const auto* em = std::get_if<ExplicitLaw>(&mu.laws[x]);
    const auto* en = std::get_if<ExplicitLaw>(&nu.laws[x]);
    if (!em || !en)
      fail("UnsupportedVariant",
           "stochastic order needs explicit laws at every site");
    out.per_site.push_back(stochastic_order_check(*em, *en));
    if (out.per_site.back().verdict.status != OrderStatus::kCertified) {
      out.verdict.status = OrderStatus::kFalsified;
      if (!out.verdict.witness)
        out.verdict.witness = out.per_site.back().verdict.witness;
    }
  }
  return out;
}

ChainReport order_chain_test(const Kernel& mu, const Kernel& nu,
                             std::uint64_t seed) {
  ChainReport report;
  bool all_explicit = true;
  for (const Kernel* k : {&mu, &nu})
    for (const auto& law : k->laws)
      all_explicit = all_explicit && std::holds_alternative<ExplicitLaw>(law);
  if (all_explicit) {
    report.stochastic = stochastic_order_check_kernels(mu, nu).verdict;
  } else {  // coupling feasibility needs explicit supports; skip that stage
    report.stochastic.relation = Relation::kStochastic;
    report.stochastic.status = OrderStatus::kInconclusive;
  }
  report.pgf = order_check_grid(mu, nu, 0.0);
  report.germ_deltas = {0.25, 0.5, 0.75};
  for (double d : report.germ_deltas)
    report.germ.push_back(order_check_grid(mu, nu, d));

  bool stoch_ok = report.stochastic.status == OrderStatus::kCertified;
  bool pgf_ok = report.pgf.status == OrderStatus::kCertified;
  if (stoch_ok && !pgf_ok)
    report.violations.push_back("stochastic certified but pgf did not");
  if (pgf_ok)
    for (std::size_t i = 0; i < report.germ.size(); ++i)
      if (report.germ[i].status != OrderStatus::kCertified)
        report.violations.push_back(
            "pgf certified but germ at delta " +
            std::to_string(report.germ_deltas[i]) + " did not");

  if (stoch_ok) {  // seeded spot check of G_mu <= G_nu
    Pcg32 rng = Pcg32::for_replica(seed, 0);
    ProbVector z(mu.size());
    for (int trial = 0; trial < 64; ++trial) {
      for (std::size_t i = 0; i < z.size(); ++i) z[i] = rng.next_double();
      ProbVector gm = eval_G(mu, z);
      ProbVector gn = eval_G(nu, z);
      for (std::size_t x = 0; x < z.size(); ++x)
        if (gm[x] > gn[x] + 1e-12) {
          report.violations.push_back(
              "G_mu exceeds G_nu at a sampled point despite a certified "
              "coupling");
          trial = 64;
          break;
        }
    }
  }
  report.consistent = report.violations.empty();
  return report;
}

TheoremReport theorem_inequality_check(const Kernel& mu, const Kernel& nu,
                                       double delta, const SiteSet& sites,
                                       double tol) {
  TheoremReport report;
  bool multinomial_family = true;
  for (const auto& law : mu.laws)
    multinomial_family =
        multinomial_family && !std::holds_alternative<ExplicitLaw>(law);
  for (const auto& law : nu.laws)
    multinomial_family =
        multinomial_family && !std::holds_alternative<ExplicitLaw>(law);

  report.order = multinomial_family
                     ? germ_check_multinomial(mu, nu, delta)
                     : order_check_grid(mu, nu, delta);
  if (report.order.status != OrderStatus::kCertified)
    fail("OrderNotCertified",
         std::string("germ order not certified at delta: status ") +
             to_string(report.order.status));

  LocalExtinctionResult lm = q_local(mu, sites);
  LocalExtinctionResult ln = q_local(nu, sites);
  report.q_mu = lm.q_local;
  report.q_nu = ln.q_local;
  report.max_violation = -1.0;
  for (std::size_t x = 0; x < mu.size(); ++x) {
    double rhs = ln.q_local[x] * (1.0 - delta) + delta;
    report.max_violation = std::max(report.max_violation, lm.q_local[x] - rhs);
  }
  report.holds = report.max_violation <= tol;

  IterationResult qg_nu = q_global(nu);
  report.sup_q_nu_below_one = qg_nu.vector.max() < 1.0 - 1e-9;
  if (report.sup_q_nu_below_one) {
    const double strong_tol = 1e-6;
    report.nu_strong_survival =
        ln.q_local.sup_dist(qg_nu.vector) <= strong_tol;
    if (report.nu_strong_survival) {
      IterationResult qg_mu = q_global(mu);
      report.mu_strong_survival =
          lm.q_local.sup_dist(qg_mu.vector) <= strong_tol;
      report.strong_survival_transfer_ok = report.mu_strong_survival;
    }
  }
  return report;
}

GeometricEquivalenceReport geometric_order_equivalence(const Kernel& mu,
                                                       const Kernel& nu) {
  if (mu.size() != nu.size())
    fail("DimensionMismatch", "kernels live on different spaces");
  auto gm = geometric_view(mu);
  auto gn = geometric_view(nu);
  if (!gm || !gn)
    fail("UnsupportedVariant", "both kernels must be geometric");

  GeometricEquivalenceReport report;
  report.mean_order = true;
  for (std::size_t x = 0; x < mu.size(); ++x) {
    if (gm->constant[x] < gn->constant[x] - kCertSlack)
      report.mean_order = false;
    for (std::size_t y = 0; y < mu.size(); ++y)
      if (gm->matrix[x][y] < gn->matrix[x][y] - kCertSlack)
        report.mean_order = false;
  }
  report.pgf = order_check_grid(mu, nu, 0.0);
  report.germ = order_check_grid(mu, nu, 0.5);
  bool pgf_ok = report.pgf.status == OrderStatus::kCertified;
  bool germ_ok = report.germ.status == OrderStatus::kCertified;
  report.consistent =
      (report.mean_order == pgf_ok) && (report.mean_order == germ_ok);
  return report;
}

}  // namespace branchlab
