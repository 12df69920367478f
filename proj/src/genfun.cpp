#include "branchlab/genfun.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace branchlab {

bool ProbVector::leq(const ProbVector& other, double slack) const {
  if (size() != other.size()) fail("DimensionMismatch", "vector sizes differ");
  for (std::size_t i = 0; i < size(); ++i)
    if (v_[i] > other.v_[i] + slack) return false;
  return true;
}

double ProbVector::sup_dist(const ProbVector& other) const {
  if (size() != other.size()) fail("DimensionMismatch", "vector sizes differ");
  double d = 0.0;
  for (std::size_t i = 0; i < size(); ++i)
    d = std::max(d, std::abs(v_[i] - other.v_[i]));
  return d;
}

double ProbVector::min() const {
  double m = 1.0;
  for (double x : v_) m = std::min(m, x);
  return m;
}

double ProbVector::max() const {
  double m = 0.0;
  for (double x : v_) m = std::max(m, x);
  return m;
}

namespace {

double boundary_coordinate(BoundaryPolicy policy) {
  return policy == BoundaryPolicy::kKill ? 1.0 : 0.0;
}

// phi-style series sum(n) rho(n) * s^n, written as 1 + sum rho(n)(s^n - 1)
// so that s = 1 gives exactly 1.
double tabulated_pgf(const std::vector<std::pair<std::uint32_t, double>>& pmf,
                     double s) {
  double acc = 1.0;
  for (const auto& [n, p] : pmf) {
    double power = 1.0;
    for (std::uint32_t i = 0; i < n; ++i) power *= s;
    acc += p * (power - 1.0);
  }
  return acc;
}

double dispersal_average(const std::vector<double>& row, double outside_mass,
                         double outside_value, const ProbVector& z) {
  double s = 0.0;
  for (std::size_t y = 0; y < row.size(); ++y) s += row[y] * z[y];
  return s + outside_mass * outside_value;
}

double eval_G_coordinate(const Kernel& kernel, const ProbVector& z,
                         std::size_t x, double outside_value) {
  const OffspringLaw& law = kernel.laws[x];
  if (const auto* ex = std::get_if<ExplicitLaw>(&law)) {
    double acc = 1.0;  // 1 + sum p (prod - 1): G(1) = 1 exactly under Kill
    for (const auto& [cfg, p] : ex->support) {
      double prod = 1.0;
      for (const auto& [s, c] : cfg.entries) {
        double zs = z[s];
        for (std::uint32_t i = 0; i < c; ++i) prod *= zs;
      }
      for (std::uint32_t i = 0; i < cfg.outside && prod != 0.0; ++i)
        prod *= outside_value;
      acc += p * (prod - 1.0);
    }
    return std::clamp(acc, 0.0, 1.0);
  }
  if (const auto* mn = std::get_if<MultinomialLaw>(&law)) {
    double s = dispersal_average(mn->dispersal, mn->dispersal_outside,
                                 outside_value, z);
    return std::clamp(tabulated_pgf(mn->total_pmf, s), 0.0, 1.0);
  }
  const auto& geo = std::get<GeometricLaw>(law);
  // 1 - s computed directly from the dispersal row to keep G(1) = 1 exact.
  double one_minus_s = geo.dispersal_outside * (1.0 - outside_value);
  for (std::size_t y = 0; y < geo.dispersal.size(); ++y)
    one_minus_s += geo.dispersal[y] * (1.0 - z[y]);
  return std::clamp(1.0 / (1.0 + geo.mean * one_minus_s), 0.0, 1.0);
}

}  // namespace

ProbVector eval_G(const Kernel& kernel, const ProbVector& z) {
  const std::size_t n = kernel.size();
  if (z.size() != n)
    fail("DimensionMismatch", "z has size " + std::to_string(z.size()) +
                                  ", kernel has " + std::to_string(n));
  const double outside_value = boundary_coordinate(kernel.boundary);
  ProbVector out(n);
  for (std::size_t x = 0; x < n; ++x)
    out[x] = eval_G_coordinate(kernel, z, x, outside_value);
  return out;
}

double eval_phi(const Kernel& kernel, SiteIndex x, double t) {
  if (x >= kernel.size()) fail("OutOfRange", "site index out of range");
  if (!(t >= 0.0 && t <= 1.0)) fail("OutOfRange", "t must lie in [0,1]");
  const OffspringLaw& law = kernel.laws[x];
  if (const auto* ex = std::get_if<ExplicitLaw>(&law)) {
    double acc = 1.0;
    for (const auto& [cfg, p] : ex->support) {
      double power = 1.0;
      std::uint64_t total = cfg.total();
      for (std::uint64_t i = 0; i < total; ++i) power *= t;
      acc += p * (power - 1.0);
    }
    return std::clamp(acc, 0.0, 1.0);
  }
  if (const auto* mn = std::get_if<MultinomialLaw>(&law))
    return std::clamp(tabulated_pgf(mn->total_pmf, t), 0.0, 1.0);
  const auto& geo = std::get<GeometricLaw>(law);
  return std::clamp(1.0 / (1.0 + geo.mean * (1.0 - t)), 0.0, 1.0);
}

IterationResult iterate(const Kernel& kernel, const ProbVector& z0, double tol,
                        std::size_t max_iter) {
  if (!(tol > 0.0)) fail("OutOfRange", "tolerance must be positive");
  IterationResult result;
  ProbVector z = z0;
  ProbVector next = eval_G(kernel, z);
  result.iterations = 1;

  bool up = true, down = true;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (next[i] < z[i]) up = false;
    if (next[i] > z[i]) down = false;
  }
  if (next == z)
    result.direction = MonotoneDirection::kNone;
  else if (up)
    result.direction = MonotoneDirection::kUp;
  else if (down)
    result.direction = MonotoneDirection::kDown;
  else
    result.direction = MonotoneDirection::kNone;

  double step = next.sup_dist(z);
  z = next;
  while (step >= tol && result.iterations < max_iter) {
    next = eval_G(kernel, z);
    step = next.sup_dist(z);
    z = next;
    ++result.iterations;
  }
  result.vector = z;
  result.converged = step < tol;
  result.residual = eval_G(kernel, z).sup_dist(z);
  return result;
}

IterationResult q_global(const Kernel& kernel, double tol,
                         std::size_t max_iter) {
  return iterate(kernel, ProbVector::zeros(kernel.size()), tol, max_iter);
}

ProbVector avoidance_vector(const Kernel& kernel, const SiteSet& sites,
                            double tol, std::size_t max_iter) {
  const std::size_t n = kernel.size();
  if (sites.empty()) fail("OutOfRange", "avoidance set must be nonempty");
  for (SiteIndex s : sites)
    if (s >= n) fail("OutOfRange", "avoidance set references invalid site");

  ProbVector h = ProbVector::ones(n);
  for (SiteIndex s : sites) h[s] = 0.0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    ProbVector next = eval_G(kernel, h);
    for (SiteIndex s : sites) next[s] = 0.0;
    double step = next.sup_dist(h);
    h = next;
    if (step < tol) return h;
  }
  fail("NotConverged", "avoidance iteration did not stabilize");
}

namespace {

struct LocalRun {
  ProbVector q;
  ProbVector h;
  std::size_t k_used = 0;
  bool converged = false;
};

LocalRun q_local_one_policy(const Kernel& kernel, const SiteSet& sites,
                            std::size_t k_max, double tol) {
  LocalRun run;
  run.h = avoidance_vector(kernel, sites, tol, k_max);
  ProbVector z = run.h;
  for (std::size_t k = 0; k < k_max; ++k) {
    ProbVector next = eval_G(kernel, z);
    double step = next.sup_dist(z);
    z = next;
    ++run.k_used;
    if (step < tol) {
      run.converged = true;
      break;
    }
  }
  run.q = z;
  return run;
}

}  // namespace

LocalExtinctionResult q_local(const Kernel& kernel, const SiteSet& sites,
                              std::size_t k_max, double tol) {
  LocalRun own = q_local_one_policy(kernel, sites, k_max, tol);
  LocalExtinctionResult result;
  result.q_local = own.q;
  result.h = own.h;
  result.k_used = own.k_used;
  result.converged = own.converged;

  if (kernel.boundary == BoundaryPolicy::kKill) {
    result.bracket_upper = own.q;
    result.bracket_lower =
        q_local_one_policy(kernel.with_boundary(BoundaryPolicy::kSurviveOutside),
                           sites, k_max, tol)
            .q;
  } else {
    result.bracket_lower = own.q;
    result.bracket_upper =
        q_local_one_policy(kernel.with_boundary(BoundaryPolicy::kKill), sites,
                           k_max, tol)
            .q;
  }
  return result;
}

ProbVector q_local_space_time(const Kernel& kernel, const SiteSet& sites,
                              std::uint32_t k_max, double tol) {
  const std::size_t n = kernel.size();
  if (sites.empty()) fail("OutOfRange", "site set must be nonempty");
  const std::uint32_t horizon = k_max;

  // v_k(x) = P(no particle of the progeny of (x, layer 0) sits in A at any
  // generation in [k, horizon]); one exact backward sweep per k because a
  // layer's value depends only on the next layer.
  std::vector<char> in_a(n, 0);
  for (SiteIndex s : sites) {
    if (s >= n) fail("OutOfRange", "site set references invalid site");
    in_a[s] = 1;
  }

  ProbVector previous = ProbVector::zeros(n);
  bool have_previous = false;
  for (std::uint32_t k = 0; k <= horizon; ++k) {
    ProbVector layer(n, 1.0);  // layer `horizon` before masking
    for (std::size_t x = 0; x < n; ++x)
      if (horizon >= k && in_a[x]) layer[x] = 0.0;
    for (std::uint32_t gen = horizon; gen-- > 0;) {
      ProbVector next = eval_G(kernel, layer);
      if (gen >= k)
        for (std::size_t x = 0; x < n; ++x)
          if (in_a[x]) next[x] = 0.0;
      layer = next;
    }
    if (have_previous && layer.sup_dist(previous) < tol) return layer;
    previous = layer;
    have_previous = true;
  }
  return previous;
}

DeltaConditionResult check_delta_condition(const Kernel& kernel, double delta,
                                           std::size_t n_max) {
  if (!(delta >= 0.0 && delta < 1.0))
    fail("OutOfRange", "delta must lie in [0,1)");
  DeltaConditionResult result;
  ProbVector z = ProbVector::constant(kernel.size(), delta);
  for (std::size_t n = 1; n <= n_max; ++n) {
    z = eval_G(kernel, z);
    bool below = true;
    for (std::size_t i = 0; i < z.size(); ++i)
      if (z[i] > delta) below = false;
    if (below) {
      result.holds = true;
      result.n = n;
      result.sup_q_bound = delta;
      return result;
    }
  }
  return result;
}

double residual(const Kernel& kernel, const ProbVector& z) {
  return eval_G(kernel, z).sup_dist(z);
}

double residual_on(const Kernel& kernel, const ProbVector& z,
                   const std::vector<SiteIndex>& coords) {
  ProbVector g = eval_G(kernel, z);
  double r = 0.0;
  for (SiteIndex i : coords) {
    if (i >= z.size()) fail("OutOfRange", "coordinate out of range");
    r = std::max(r, std::abs(g[i] - z[i]));
  }
  return r;
}

SiteSet parse_site_set(const Kernel& kernel, const std::string& spec) {
  if (spec == "all" || spec == "*") return all_sites(kernel);
  SiteSet sites;
  std::stringstream ss(spec);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (token.empty()) continue;
    auto idx = kernel.space.index_of(token);
    if (!idx) fail("OutOfRange", "unknown site label '" + token + "'");
    sites.insert(*idx);
  }
  if (sites.empty()) fail("OutOfRange", "empty site set");
  return sites;
}

SiteSet all_sites(const Kernel& kernel) {
  SiteSet sites;
  for (std::size_t i = 0; i < kernel.size(); ++i)
    sites.insert(static_cast<SiteIndex>(i));
  return sites;
}

}  // namespace branchlab
