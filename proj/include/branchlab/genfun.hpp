#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "branchlab/core.hpp"

namespace branchlab {

/// A vector in [0,1]^N: generating-function arguments, extinction probability
/// vectors, fixed points, avoidance vectors.
class ProbVector {
 public:
  ProbVector() = default;
  explicit ProbVector(std::size_t n, double fill = 0.0) : v_(n, fill) {}
  explicit ProbVector(std::vector<double> values) : v_(std::move(values)) {}

  static ProbVector zeros(std::size_t n) { return ProbVector(n, 0.0); }
  static ProbVector ones(std::size_t n) { return ProbVector(n, 1.0); }
  static ProbVector constant(std::size_t n, double t) { return ProbVector(n, t); }

  std::size_t size() const { return v_.size(); }
  double operator[](std::size_t i) const { return v_[i]; }
  double& operator[](std::size_t i) { return v_[i]; }
  const std::vector<double>& values() const { return v_; }

  bool leq(const ProbVector& other, double slack = 0.0) const;
  double sup_dist(const ProbVector& other) const;
  double min() const;
  double max() const;

  bool operator==(const ProbVector&) const = default;

 private:
  std::vector<double> v_;
};

enum class MonotoneDirection { kUp, kDown, kNone };

struct IterationResult {
  ProbVector vector;
  std::size_t iterations = 0;
  double residual = 0.0;  // sup-norm of G(z) - z at the returned vector
  MonotoneDirection direction = MonotoneDirection::kNone;
  bool converged = false;
};

struct LocalExtinctionResult {
  ProbVector q_local;       // computed under the kernel's own boundary policy
  std::size_t k_used = 0;   // G-iterations applied on top of the avoidance vector
  ProbVector h;             // avoidance vector under the kernel's policy
  ProbVector bracket_lower; // SurviveOutside run
  ProbVector bracket_upper; // Kill run
  bool converged = false;
};

using SiteSet = std::set<SiteIndex>;

/// G(z)(x) = sum_f mu_x(f) prod_y z(y)^f(y). Coordinates outside the
/// truncation read as 1 under Kill and 0 under SurviveOutside. Arranged so
/// that G(1) = 1 exactly for Kill kernels.
ProbVector eval_G(const Kernel& kernel, const ProbVector& z);

/// phi_x(t): the one-dimensional pgf of the total-offspring law at x
/// (outside children counted), i.e. eval_G at the constant vector t.
double eval_phi(const Kernel& kernel, SiteIndex x, double t);

/// Fixed-point iteration z <- G(z) until the sup-norm step drops below tol.
/// The monotone direction is read off from the first step; starting points in
/// L_G / U_G give nondecreasing / nonincreasing traces.
IterationResult iterate(const Kernel& kernel, const ProbVector& z0, double tol,
                        std::size_t max_iter);

/// Global extinction probability vector: the increasing limit of G from 0,
/// which is the smallest fixed point.
IterationResult q_global(const Kernel& kernel, double tol = 1e-12,
                         std::size_t max_iter = 100000);

/// h(x) = probability that the progeny tree of one particle at x (itself
/// included) never places a particle in A: the decreasing limit of
/// h_{m+1}(x) = 1(x not in A) * G(h_m | x) from the indicator of A's
/// complement.
ProbVector avoidance_vector(const Kernel& kernel, const SiteSet& sites,
                            double tol = 1e-12, std::size_t max_iter = 100000);

/// Extinction-in-A probability vector, computed as the increasing limit of
/// G-iterates started from the avoidance vector (h lies in L_G). Both
/// boundary-policy brackets are reported.
LocalExtinctionResult q_local(const Kernel& kernel, const SiteSet& sites,
                              std::size_t k_max = 100000, double tol = 1e-12);

/// Independent route to q(A): on the space-time picture, survival in A means
/// hitting A x [k, inf) for every k, so extinction in A is the increasing
/// limit over k of P(no visit to A at generations k..T). Each term is one
/// exact backward sweep over layers.
ProbVector q_local_space_time(const Kernel& kernel, const SiteSet& sites,
                              std::uint32_t k_max = 200, double tol = 1e-12);

struct DeltaConditionResult {
  bool holds = false;
  std::size_t n = 0;        // smallest n with G^(n)(delta 1) <= delta 1
  double sup_q_bound = 1.0; // delta when the condition holds
};

/// Tests G^(n)(delta 1) <= delta 1 for some n <= n_max; success certifies
/// sup_x q(x,X) <= delta.
DeltaConditionResult check_delta_condition(const Kernel& kernel, double delta,
                                           std::size_t n_max);

/// Sup-norm of G(z) - z; zero exactly on fixed points.
double residual(const Kernel& kernel, const ProbVector& z);

/// Same, restricted to coordinates whose law never reaches the boundary;
/// used for fixed-point families defined up to the truncation edge.
double residual_on(const Kernel& kernel, const ProbVector& z,
                   const std::vector<SiteIndex>& coords);

SiteSet parse_site_set(const Kernel& kernel, const std::string& spec);
SiteSet all_sites(const Kernel& kernel);

}  // namespace branchlab
