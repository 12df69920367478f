#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "branchlab/core.hpp"
#include "branchlab/genfun.hpp"

namespace branchlab {
namespace gallery {

/// Parametric family for the survival probabilities p_n of the right-drift
/// chain. The exp2 form p_n = exp(-c 2^{-n-1}) keeps every tail product in
/// closed form (prod_{i>=n} p_i = exp(-c 2^{-n})); const sequences are
/// rejected because sum (1-p_n) diverges.
struct PSpec {
  enum class Form { kExp2, kConst, kList };
  Form form = Form::kExp2;
  double c = 0.6931471805599453;  // ln 2
  double value = 0.0;             // kConst
  std::vector<double> values;     // kList

  double p(std::size_t n) const;
  /// prod_{i=n}^{infinity} p_i when closed-form (exp2); otherwise the product
  /// over the tabulated range.
  double tail_product(std::size_t n, std::size_t truncation) const;
  bool summable(std::size_t truncation) const;

  static PSpec exp2(double c);
  static PSpec constant(double value);
  static PSpec list(std::vector<double> values);
};

struct RSpec {
  enum class Form { kScaledGap, kConst, kList };
  Form form = Form::kScaledGap;
  double theta = 0.5;  // r_n = theta (1 - p_n)
  double value = 0.0;
  std::vector<double> values;

  double r(std::size_t n, const PSpec& p) const;

  static RSpec scaled_gap(double theta);
  static RSpec constant(double value);
  static RSpec list(std::vector<double> values);
};

struct Oracle {
  std::vector<double> values;
  std::string provenance;
};

struct ExampleBundle {
  std::string name;
  Kernel kernel;
  std::map<std::string, Oracle> oracles;
  std::string note;
};

/// Right-drift chain: a particle at n has one child at n+1 with probability
/// p_n and none otherwise. q(n,X) = 1 - prod_{i>=n} p_i; finite sets are
/// left behind, so q(A) = 1 for finite A.
ExampleBundle moyal1(const PSpec& p, std::size_t truncation,
                     BoundaryPolicy boundary = BoundaryPolicy::kSurviveOutside);

/// The one-parameter family of fixed points of the moyal1 chain:
/// z_{n+1} = 1 - (1 - z_n)/p_n, strictly decreasing from any
/// z0 in (q(0,X), 1).
ProbVector moyal1_fixed_point(const PSpec& p, double z0, std::size_t truncation);

/// Drift chain with a left step: one child at n+1 w.p. p_n, one at n-1 w.p.
/// r_n, none otherwise (r_0 = 0). Its generating function sits below
/// moyal1's, so q(n,X) <= 1 - prod_{i>=n} p_i (a bound, not an equality).
ExampleBundle moyal2(const PSpec& p, const RSpec& r, std::size_t truncation,
                     BoundaryPolicy boundary = BoundaryPolicy::kSurviveOutside);

/// Fixed points of the moyal2 chain from the two-term recursion.
ProbVector moyal2_fixed_point(const PSpec& p, const RSpec& r, double z0,
                              std::size_t truncation);

/// Geometric reproduction: G(z) = 1 / (1 + M(1-z)). Single-type oracle
/// q = min(1, 1/mean).
ExampleBundle geometric_kernel(const std::vector<double>& means,
                               const std::vector<std::vector<double>>& dispersal);

/// Two-site pair whose pgfs dominate along the diagonal but cross on the
/// z2 = 1 edge: incomparable in the pgf and germ orders both ways.
std::pair<Kernel, Kernel> incomparable_pair();

ExampleBundle bundle_by_name(const std::string& name);
std::vector<std::string> bundle_names();

}  // namespace gallery
}  // namespace branchlab
