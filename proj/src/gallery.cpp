#include "branchlab/gallery.hpp"

#include <algorithm>
#include <cmath>

namespace branchlab {
namespace gallery {

namespace {

std::vector<std::string> integer_labels(std::size_t n) {
  std::vector<std::string> labels;
  labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) labels.push_back(std::to_string(i));
  return labels;
}

std::vector<std::vector<double>> path_metric(std::size_t n) {
  std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      d[i][j] = std::abs(static_cast<double>(i) - static_cast<double>(j));
  return d;
}

}  // namespace

PSpec PSpec::exp2(double c) {
  PSpec spec;
  spec.form = Form::kExp2;
  spec.c = c;
  return spec;
}

PSpec PSpec::constant(double value) {
  PSpec spec;
  spec.form = Form::kConst;
  spec.value = value;
  return spec;
}

PSpec PSpec::list(std::vector<double> values) {
  PSpec spec;
  spec.form = Form::kList;
  spec.values = std::move(values);
  return spec;
}

double PSpec::p(std::size_t n) const {
  switch (form) {
    case Form::kExp2:
      return std::exp(-c * std::ldexp(1.0, -static_cast<int>(n) - 1));
    case Form::kConst:
      return value;
    default:
      if (n >= values.size())
        fail("OutOfRange", "p list shorter than the truncation");
      return values[n];
  }
}

double PSpec::tail_product(std::size_t n, std::size_t truncation) const {
  if (form == Form::kExp2)
    return std::exp(-c * std::ldexp(1.0, -static_cast<int>(n)));
  double prod = 1.0;
  for (std::size_t i = n; i < truncation; ++i) prod *= p(i);
  return prod;
}

bool PSpec::summable(std::size_t truncation) const {
  switch (form) {
    case Form::kExp2:
      return c > 0.0;
    case Form::kConst:
      return false;  // sum (1 - p) diverges for any constant p < 1
    default:
      return values.size() >= truncation;  // finite data, taken as given
  }
}

RSpec RSpec::scaled_gap(double theta) {
  RSpec spec;
  spec.form = Form::kScaledGap;
  spec.theta = theta;
  return spec;
}

RSpec RSpec::constant(double value) {
  RSpec spec;
  spec.form = Form::kConst;
  spec.value = value;
  return spec;
}

RSpec RSpec::list(std::vector<double> values) {
  RSpec spec;
  spec.form = Form::kList;
  spec.values = std::move(values);
  return spec;
}

double RSpec::r(std::size_t n, const PSpec& p) const {
  if (n == 0) return 0.0;
  switch (form) {
    case Form::kScaledGap:
      return theta * (1.0 - p.p(n));
    case Form::kConst:
      return value;
    default:
      if (n >= values.size())
        fail("OutOfRange", "r list shorter than the truncation");
      return values[n];
  }
}

ExampleBundle moyal1(const PSpec& p, std::size_t truncation,
                     BoundaryPolicy boundary) {
  if (truncation < 2) fail("OutOfRange", "need at least two sites");
  if (!p.summable(truncation))
    fail("DivergentTail",
         "sum (1 - p_n) diverges; the chain dies out everywhere and the tail "
         "products degenerate");
  for (std::size_t n = 0; n < truncation; ++n) {
    double pn = p.p(n);
    if (!(pn > 0.0 && pn < 1.0))
      fail("OutOfRange", "p_n must lie in (0,1)");
  }

  ExampleBundle bundle;
  bundle.name = "moyal1";
  bundle.note =
      "right-drift chain: one child one step right w.p. p_n, none otherwise; "
      "extinction probabilities are tail products of the p_n";
  bundle.kernel.boundary = boundary;
  bundle.kernel.space.labels = integer_labels(truncation);
  bundle.kernel.space.metric = path_metric(truncation);
  for (std::size_t n = 0; n < truncation; ++n) {
    double pn = p.p(n);
    ExplicitLaw law;
    Config child;
    if (n + 1 < truncation)
      child = Config::from_pairs({{static_cast<SiteIndex>(n + 1), 1}});
    else
      child = Config::from_pairs({}, 1);  // steps past the truncation
    law.support.emplace_back(std::move(child), pn);
    law.support.emplace_back(Config{}, 1.0 - pn);
    bundle.kernel.laws.push_back(std::move(law));
  }

  Oracle q_global;
  q_global.provenance =
      "q(n,X) = 1 - prod_{i>=n} p_i, closed form for the exp2 family";
  Oracle pv;
  pv.provenance = "the p_n sequence";
  for (std::size_t n = 0; n < truncation; ++n) {
    q_global.values.push_back(1.0 - p.tail_product(n, truncation));
    pv.values.push_back(p.p(n));
  }
  bundle.oracles["q_global"] = std::move(q_global);
  bundle.oracles["p"] = std::move(pv);
  Oracle q_finite;
  q_finite.provenance =
      "q(A) = 1 for finite A: the drift leaves every finite set behind";
  q_finite.values.assign(truncation, 1.0);
  bundle.oracles["q_local_finite"] = std::move(q_finite);
  return bundle;
}

ProbVector moyal1_fixed_point(const PSpec& p, double z0,
                              std::size_t truncation) {
  double q0 = 1.0 - p.tail_product(0, truncation);
  if (!(z0 > q0 && z0 <= 1.0))
    fail("OutOfBasin", "z0 = " + std::to_string(z0) +
                           " is not inside (q(0,X), 1] = (" +
                           std::to_string(q0) + ", 1]");
  ProbVector z(truncation);
  z[0] = z0;
  for (std::size_t n = 0; n + 1 < truncation; ++n) {
    z[n + 1] = 1.0 - (1.0 - z[n]) / p.p(n);
    if (!(z[n + 1] >= 0.0 && z[n + 1] <= 1.0))
      fail("OutOfBasin", "recursion left [0,1] at coordinate " +
                             std::to_string(n + 1));
  }
  return z;
}

ExampleBundle moyal2(const PSpec& p, const RSpec& r, std::size_t truncation,
                     BoundaryPolicy boundary) {
  if (truncation < 2) fail("OutOfRange", "need at least two sites");
  if (!p.summable(truncation))
    fail("DivergentTail", "sum (1 - p_n) diverges");
  for (std::size_t n = 0; n < truncation; ++n) {
    double pn = p.p(n);
    double rn = r.r(n, p);
    if (!(pn > 0.0 && pn < 1.0))
      fail("OutOfRange", "p_n must lie in (0,1)");
    if (rn < 0.0 || 1.0 - pn - rn <= 0.0)
      fail("ConstraintViolated",
           "need r_n >= 0 and 1 - p_n - r_n > 0 at n = " + std::to_string(n));
  }

  ExampleBundle bundle;
  bundle.name = "moyal2";
  bundle.note =
      "drift chain with a left step: the extra r_n mass lowers the "
      "generating function, so extinction probabilities sit below the "
      "moyal1 tail products";
  bundle.kernel.boundary = boundary;
  bundle.kernel.space.labels = integer_labels(truncation);
  bundle.kernel.space.metric = path_metric(truncation);
  for (std::size_t n = 0; n < truncation; ++n) {
    double pn = p.p(n);
    double rn = r.r(n, p);
    ExplicitLaw law;
    Config right;
    if (n + 1 < truncation)
      right = Config::from_pairs({{static_cast<SiteIndex>(n + 1), 1}});
    else
      right = Config::from_pairs({}, 1);
    law.support.emplace_back(std::move(right), pn);
    if (rn > 0.0)
      law.support.emplace_back(
          Config::from_pairs({{static_cast<SiteIndex>(n - 1), 1}}), rn);
    law.support.emplace_back(Config{}, 1.0 - pn - rn);
    bundle.kernel.laws.push_back(std::move(law));
  }

  Oracle bound;
  bound.provenance =
      "upper bound q(n,X) <= 1 - prod_{i>=n} p_i (the left step only helps "
      "survival); a bound, not an equality";
  for (std::size_t n = 0; n < truncation; ++n)
    bound.values.push_back(1.0 - p.tail_product(n, truncation));
  bundle.oracles["q_global_upper_bound"] = std::move(bound);
  return bundle;
}

ProbVector moyal2_fixed_point(const PSpec& p, const RSpec& r, double z0,
                              std::size_t truncation) {
  double q0 = 1.0 - p.tail_product(0, truncation);
  if (!(z0 > q0 && z0 <= 1.0))
    fail("OutOfBasin", "z0 must lie inside (1 - prod p_i, 1]");
  ProbVector z(truncation);
  z[0] = z0;
  z[1] = 1.0 - (1.0 - z0) / p.p(0);
  for (std::size_t n = 1; n + 1 < truncation; ++n) {
    double pn = p.p(n);
    double rn = r.r(n, p);
    z[n + 1] = 1.0 + (1.0 - z[n - 1]) * rn / pn - (1.0 - z[n]) / pn;
    if (!(z[n + 1] >= 0.0 && z[n + 1] <= 1.0))
      fail("OutOfBasin", "recursion left [0,1] at coordinate " +
                             std::to_string(n + 1));
  }
  return z;
}

ExampleBundle geometric_kernel(
    const std::vector<double>& means,
    const std::vector<std::vector<double>>& dispersal) {
  if (means.empty() || dispersal.size() != means.size())
    fail("DimensionMismatch", "need one dispersal row per mean");

  ExampleBundle bundle;
  bundle.name = "geometric";
  bundle.note =
      "geometric reproduction: G(z) = 1 / (1 + M(1-z)); in one type the "
      "extinction probability is the smaller root of m q^2 - (m+1) q + 1";
  bundle.kernel.space.labels = integer_labels(means.size());
  for (std::size_t x = 0; x < means.size(); ++x) {
    GeometricLaw law;
    law.mean = means[x];
    law.dispersal = dispersal[x];
    bundle.kernel.laws.push_back(std::move(law));
  }
  if (means.size() == 1) {
    Oracle q;
    q.provenance = "min(1, 1/mean), the smaller root of m q^2 - (m+1) q + 1";
    q.values.push_back(std::min(1.0, 1.0 / means[0]));
    bundle.oracles["q_global"] = std::move(q);
  }
  return bundle;
}

std::pair<Kernel, Kernel> incomparable_pair() {
  SiteSpace space;
  space.labels = {"1", "2"};

  Kernel mu;
  mu.space = space;
  {
    // (5/6) z1 z2 + 1/6: one child at each site, or none
    ExplicitLaw law;
    law.support.emplace_back(Config::from_pairs({{0, 1}, {1, 1}}), 5.0 / 6.0);
    law.support.emplace_back(Config{}, 1.0 / 6.0);
    mu.laws = {law, law};
  }

  Kernel nu;
  nu.space = space;
  {
    // (4/5) ((5 z1 + z2)/6)^2 + 1/5: two children placed independently
    MultinomialLaw law;
    law.total_pmf = {{0, 1.0 / 5.0}, {2, 4.0 / 5.0}};
    law.dispersal = {5.0 / 6.0, 1.0 / 6.0};
    nu.laws = {law, law};
  }
  return {mu, nu};
}

ExampleBundle bundle_by_name(const std::string& name) {
  if (name == "moyal1") return moyal1(PSpec{}, 40);
  if (name == "moyal2") return moyal2(PSpec{}, RSpec{}, 40);
  if (name == "geometric") return geometric_kernel({2.0}, {{1.0}});
  if (name == "incomparable-mu" || name == "incomparable-nu") {
    auto [mu, nu] = incomparable_pair();
    ExampleBundle bundle;
    bundle.name = name;
    bundle.kernel = name == "incomparable-mu" ? mu : nu;
    bundle.note =
        "half of the two-site pair whose pgfs cross on the z2 = 1 edge";
    return bundle;
  }
  fail("OutOfRange", "unknown example '" + name + "'");
}

std::vector<std::string> bundle_names() {
  return {"moyal1", "moyal2", "geometric", "incomparable-mu",
          "incomparable-nu"};
}

}  // namespace gallery
}  // namespace branchlab
