#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "branchlab/errors.hpp"

namespace branchlab {

using SiteIndex = std::uint32_t;

// Mass tolerance for probability sums (per-law and per-dispersal-row).
inline constexpr double kMassTol = 1e-12;

/// Truncated site space: N labelled sites, optionally with a metric used by
/// displacement statistics.
struct SiteSpace {
  std::vector<std::string> labels;
  std::optional<std::vector<std::vector<double>>> metric;  // N x N

  std::size_t size() const { return labels.size(); }
  std::optional<SiteIndex> index_of(std::string_view label) const;
};

/// One generation: sparse site -> count map (counts >= 1) plus the number of
/// children that fell outside the truncation. The outside component is what
/// the kernel's BoundaryPolicy resolves.
struct Config {
  std::vector<std::pair<SiteIndex, std::uint32_t>> entries;  // sorted by site
  std::uint32_t outside = 0;

  static Config from_pairs(std::vector<std::pair<SiteIndex, std::uint32_t>> raw,
                           std::uint32_t outside_count = 0);

  std::uint64_t total() const;  // |f|, outside included
  std::uint32_t count_at(SiteIndex site) const;
  bool empty() const { return entries.empty() && outside == 0; }
  /// Coordinatewise >=, outside component included.
  bool dominates(const Config& other) const;

  bool operator==(const Config&) const = default;
  bool operator<(const Config& other) const;

  std::string describe(const SiteSpace& space) const;
};

struct ExplicitLaw {
  std::vector<std::pair<Config, double>> support;
};

struct MultinomialLaw {
  std::vector<std::pair<std::uint32_t, double>> total_pmf;  // sorted by count
  std::vector<double> dispersal;  // length N
  double dispersal_outside = 0.0;
};

struct GeometricLaw {
  double mean = 0.0;              // rho-bar > 0
  std::vector<double> dispersal;  // length N
  double dispersal_outside = 0.0;
};

using OffspringLaw = std::variant<ExplicitLaw, MultinomialLaw, GeometricLaw>;

/// How children placed outside the truncation are read back into [0,1]
/// vectors: Kill treats them as never born (coordinate 1), SurviveOutside as
/// immortal non-returning survivors (coordinate 0). Running both brackets the
/// untruncated answer.
enum class BoundaryPolicy { kKill, kSurviveOutside };

struct Kernel {
  SiteSpace space;
  std::vector<OffspringLaw> laws;  // one per site
  BoundaryPolicy boundary = BoundaryPolicy::kKill;

  std::size_t size() const { return space.size(); }
  Kernel with_boundary(BoundaryPolicy policy) const {
    Kernel copy = *this;
    copy.boundary = policy;
    return copy;
  }
};

/// First moments: entries(x,y) = expected children sent from x to y (within
/// the truncation); row_sums are the in-range row totals and outside(x) the
/// expected mass lost past the boundary.
struct MomentMatrix {
  std::vector<std::vector<double>> entries;
  std::vector<double> row_sums;
  std::vector<double> outside;
};

struct Pmf {
  std::vector<double> mass;  // mass[n] = P(total offspring = n)
  double tail = 0.0;         // untabulated tail (parametric laws only)
};

enum class Severity { kError, kWarning, kInfo };

struct Issue {
  Severity severity;
  std::optional<SiteIndex> site;
  std::string message;
};

struct ValidationReport {
  bool ok = true;
  bool triviality_flag = false;
  std::vector<Issue> issues;

  void add(Severity severity, std::optional<SiteIndex> site, std::string msg);
};

/// Checks every stored invariant (masses, dispersal rows, indices, metric
/// shape) and flags kernels whose particles have exactly one offspring almost
/// surely. Problems are reported, never thrown. For N <= 64 the triviality
/// check runs exactly on communicating classes; beyond that a conservative
/// per-site form is used.
ValidationReport validate(const Kernel& kernel);

MomentMatrix mean_matrix(const Kernel& kernel);

/// Law of the total number of children of a particle at x. Parametric
/// (geometric) laws are tabulated up to the 1 - tail_eps quantile, with the
/// remaining mass reported in Pmf::tail.
Pmf total_offspring_pmf(const Kernel& kernel, SiteIndex x,
                        double tail_eps = 1e-12);

/// Space-time transform: sites (x,n) for n in 0..horizon, a particle at (x,n)
/// reproduces as mu_x with all children in layer n+1, and the last layer
/// produces no children. Converts "infinitely many visits" questions into
/// nested hitting problems.
Kernel space_time(const Kernel& kernel, std::uint32_t horizon);

struct ProjectionResult {
  bool isomorphic = false;
  double max_deviation = 0.0;
};

/// Tests whether kernel_X projects onto kernel_V along the site map g by
/// sampling z in [0,1]^V and comparing G_X(z o g | x) with G_V(z | g(x)).
ProjectionResult projection_check(const Kernel& kernel_x,
                                  const Kernel& kernel_v,
                                  const std::vector<SiteIndex>& g,
                                  std::size_t samples, std::uint64_t seed);

/// Sup-norm Lipschitz bound for G: max support size for tabulated laws,
/// mean*(1+mean) for geometric ones.
double lipschitz_bound(const Kernel& kernel);

/// Per-site expected total offspring (outside mass included).
std::vector<double> offspring_means(const Kernel& kernel);

namespace detail {
double explicit_mass(const ExplicitLaw& law);
double law_mean_total(const OffspringLaw& law);
}  // namespace detail

}  // namespace branchlab
