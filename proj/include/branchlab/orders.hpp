#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "branchlab/core.hpp"
#include "branchlab/genfun.hpp"

namespace branchlab {

enum class Relation { kStochastic, kPgf, kGerm };
enum class OrderStatus { kCertified, kFalsified, kInconclusive };

/// Where an order claim G_mu <= G_nu broke: a z-point and coordinate for the
/// pgf/germ checks, or a violated upper set for the coupling check.
struct OrderWitness {
  std::vector<double> z;  // evaluation point ({t} for scalar pgf checks)
  SiteIndex site = 0;     // violated coordinate
  double gap = 0.0;       // G_nu - G_mu there (negative)
  std::vector<Config> upper_set_generators;  // stochastic checks only
  double mu_mass = 0.0;   // mass the two laws give the violated upper set
  double nu_mass = 0.0;
};

struct OrderVerdict {
  Relation relation = Relation::kPgf;
  double delta = 0.0;
  OrderStatus status = OrderStatus::kInconclusive;
  std::optional<OrderWitness> witness;
  double margin = 0.0;  // minimal observed coordinate of G_nu - G_mu
};

struct CouplingCertificate {
  struct Pair {
    Config upper;  // mu-atom
    Config lower;  // nu-atom, dominated coordinatewise
    double mass;
  };
  std::vector<Pair> joint;
  double mu_marginal_residual = 0.0;
  double nu_marginal_residual = 0.0;
};

struct StochasticOrderResult {
  OrderVerdict verdict;
  std::optional<CouplingCertificate> certificate;
};

/// Germ check for multinomial families sharing the dispersal matrix, reduced
/// to the scalar pgfs phi_x on [delta,1]. Grid evaluation falsifies;
/// certification comes from the Lipschitz margin or, when values alone cannot
/// separate (the pgfs agree at t=1), from Bernstein coefficients of the
/// cross-multiplied difference.
OrderVerdict germ_check_multinomial(const Kernel& mu, const Kernel& nu,
                                    double delta, std::size_t grid = 65);

/// Full box check of G_mu <= G_nu on [delta,1]^N. delta = 0 decides the pgf
/// order. Grid evaluation with refinement falsifies or reports the margin;
/// certification uses the Lipschitz margin, Bernstein coefficients of the
/// polynomial difference, or the linear numerator bound for geometric pairs.
OrderVerdict order_check_grid(const Kernel& mu, const Kernel& nu, double delta,
                              double spacing = 1.0 / 64.0);

/// Strassen feasibility: mu dominates nu iff nu's mass can be transported to
/// mu-atoms along pairs f >= g. Infeasibility yields a violated upper set
/// from the min cut.
StochasticOrderResult stochastic_order_check(const ExplicitLaw& mu,
                                             const ExplicitLaw& nu);

/// Per-site coupling check of two explicit kernels.
struct KernelStochasticResult {
  OrderVerdict verdict;  // certified iff every site certifies
  std::vector<StochasticOrderResult> per_site;
};
KernelStochasticResult stochastic_order_check_kernels(const Kernel& mu,
                                                      const Kernel& nu);

/// Runs the stochastic / pgf / germ checks on one pair and reports any break
/// of the implication chain (stochastic => pgf => germ), plus seeded spot
/// checks of G_mu <= G_nu at random points when the coupling certifies.
struct ChainReport {
  OrderVerdict stochastic;
  OrderVerdict pgf;
  std::vector<OrderVerdict> germ;  // at the delta ladder
  std::vector<double> germ_deltas;
  std::vector<std::string> violations;
  bool consistent = true;
};
ChainReport order_chain_test(const Kernel& mu, const Kernel& nu,
                             std::uint64_t seed);

/// Checks q_mu(x,A) <= q_nu(x,A)(1-delta) + delta coordinatewise after
/// certifying the germ order at delta, and reports the strong-survival
/// transfer when sup_x q_nu(x,X) < 1.
struct TheoremReport {
  OrderVerdict order;
  ProbVector q_mu;
  ProbVector q_nu;
  double max_violation = 0.0;  // max over x of lhs - rhs
  bool holds = false;
  bool sup_q_nu_below_one = false;
  bool nu_strong_survival = false;
  bool mu_strong_survival = false;
  bool strong_survival_transfer_ok = true;
};
TheoremReport theorem_inequality_check(const Kernel& mu, const Kernel& nu,
                                       double delta, const SiteSet& sites,
                                       double tol = 1e-8);

/// For geometric kernels the first-moment order, the pgf order and the germ
/// order coincide; verifies the three agree on a concrete pair.
struct GeometricEquivalenceReport {
  bool mean_order = false;
  OrderVerdict pgf;
  OrderVerdict germ;
  bool consistent = false;
};
GeometricEquivalenceReport geometric_order_equivalence(const Kernel& mu,
                                                       const Kernel& nu);

const char* to_string(OrderStatus status);
const char* to_string(Relation relation);

}  // namespace branchlab
