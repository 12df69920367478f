#include "branchlab/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include "branchlab/genfun.hpp"
#include "branchlab/rng.hpp"

namespace branchlab {

std::optional<SiteIndex> SiteSpace::index_of(std::string_view label) const {
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) return static_cast<SiteIndex>(i);
  return std::nullopt;
}

Config Config::from_pairs(std::vector<std::pair<SiteIndex, std::uint32_t>> raw,
                          std::uint32_t outside_count) {
  Config c;
  std::sort(raw.begin(), raw.end());
  for (auto& [site, count] : raw) {
    if (count == 0) continue;
    if (!c.entries.empty() && c.entries.back().first == site)
      c.entries.back().second += count;
    else
      c.entries.emplace_back(site, count);
  }
  c.outside = outside_count;
  return c;
}

std::uint64_t Config::total() const {
  std::uint64_t t = outside;
  for (const auto& [site, count] : entries) t += count;
  return t;
}

std::uint32_t Config::count_at(SiteIndex site) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), site,
                             [](const auto& e, SiteIndex s) { return e.first < s; });
  if (it != entries.end() && it->first == site) return it->second;
  return 0;
}

bool Config::dominates(const Config& other) const {
  if (outside < other.outside) return false;
  for (const auto& [site, count] : other.entries)
    if (count_at(site) < count) return false;
  return true;
}

bool Config::operator<(const Config& other) const {
  if (entries != other.entries) return entries < other.entries;
  return outside < other.outside;
}

std::string Config::describe(const SiteSpace& space) const {
  if (empty()) return "{}";
  std::string out = "{";
  bool first = true;
  for (const auto& [site, count] : entries) {
    if (!first) out += ", ";
    first = false;
    out += site < space.size() ? space.labels[site] : std::to_string(site);
    out += ":" + std::to_string(count);
  }
  if (outside > 0) {
    if (!first) out += ", ";
    out += "@out:" + std::to_string(outside);
  }
  return out + "}";
}

void ValidationReport::add(Severity severity, std::optional<SiteIndex> site,
                           std::string msg) {
  if (severity == Severity::kError) ok = false;
  issues.push_back(Issue{severity, site, std::move(msg)});
}

namespace detail {

double explicit_mass(const ExplicitLaw& law) {
  double mass = 0.0;
  for (const auto& [cfg, p] : law.support) mass += p;
  return mass;
}

double law_mean_total(const OffspringLaw& law) {
  if (const auto* ex = std::get_if<ExplicitLaw>(&law)) {
    double mean = 0.0;
    for (const auto& [cfg, p] : ex->support)
      mean += p * static_cast<double>(cfg.total());
    return mean;
  }
  if (const auto* mn = std::get_if<MultinomialLaw>(&law)) {
    double mean = 0.0;
    for (const auto& [n, p] : mn->total_pmf) mean += p * n;
    return mean;
  }
  return std::get<GeometricLaw>(law).mean;
}

namespace {

std::string format_mass(double mass) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", mass);
  return buf;
}

void validate_dispersal(const std::vector<double>& row, double outside,
                        std::size_t n_sites, SiteIndex site,
                        ValidationReport& report) {
  if (row.size() != n_sites) {
    report.add(Severity::kError, site, "dispersal row has wrong length");
    return;
  }
  double sum = outside;
  bool negative = outside < 0.0;
  for (double p : row) {
    if (p < 0.0) negative = true;
    sum += p;
  }
  if (negative)
    report.add(Severity::kError, site, "negative dispersal probability");
  if (std::abs(sum - 1.0) > kMassTol)
    report.add(Severity::kError, site,
               "dispersal mass " + format_mass(sum) + " != 1");
}

// P(exactly one child of the law lands inside `in_class`). Used by the exact
// triviality check.
double prob_one_child_in_class(const OffspringLaw& law,
                               const std::vector<bool>& in_class,
                               bool class_holds_outside) {
  if (const auto* ex = std::get_if<ExplicitLaw>(&law)) {
    double p_one = 0.0;
    for (const auto& [cfg, p] : ex->support) {
      std::uint64_t in_count = class_holds_outside ? cfg.outside : 0;
      for (const auto& [s, c] : cfg.entries)
        if (s < in_class.size() && in_class[s]) in_count += c;
      if (in_count == 1) p_one += p;
    }
    return p_one;
  }
  if (const auto* mn = std::get_if<MultinomialLaw>(&law)) {
    double pc = class_holds_outside ? mn->dispersal_outside : 0.0;
    for (std::size_t s = 0; s < mn->dispersal.size(); ++s)
      if (in_class[s]) pc += mn->dispersal[s];
    double p_one = 0.0;
    for (const auto& [n, p] : mn->total_pmf) {
      if (n == 0) continue;
      p_one += p * n * pc * std::pow(1.0 - pc, static_cast<double>(n - 1));
    }
    return p_one;
  }
  const auto& geo = std::get<GeometricLaw>(law);
  double pc = class_holds_outside ? geo.dispersal_outside : 0.0;
  for (std::size_t s = 0; s < geo.dispersal.size(); ++s)
    if (in_class[s]) pc += geo.dispersal[s];
  // pc * phi'(1-pc) with phi(t) = 1/(1+m(1-t))
  double denom = 1.0 + geo.mean * pc;
  return pc * geo.mean / (denom * denom);
}

// Reachability closure over the support graph m_xy > 0.
std::vector<std::vector<bool>> reachability(const MomentMatrix& moments) {
  std::size_t n = moments.entries.size();
  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  for (std::size_t x = 0; x < n; ++x) {
    std::vector<std::size_t> stack{x};
    reach[x][x] = true;
    while (!stack.empty()) {
      std::size_t y = stack.back();
      stack.pop_back();
      for (std::size_t w = 0; w < n; ++w)
        if (!reach[x][w] && moments.entries[y][w] > 0.0) {
          reach[x][w] = true;
          stack.push_back(w);
        }
    }
  }
  return reach;
}

bool law_has_one_child_surely(const OffspringLaw& law) {
  if (const auto* ex = std::get_if<ExplicitLaw>(&law)) {
    for (const auto& [cfg, p] : ex->support)
      if (p > kMassTol && cfg.total() != 1) return false;
    return true;
  }
  if (const auto* mn = std::get_if<MultinomialLaw>(&law)) {
    for (const auto& [n, p] : mn->total_pmf)
      if (p > kMassTol && n != 1) return false;
    return true;
  }
  return false;  // geometric laws always put mass on 0 children
}

}  // namespace
}  // namespace detail

ValidationReport validate(const Kernel& kernel) {
  using detail::format_mass;
  ValidationReport report;
  const std::size_t n = kernel.space.size();

  if (n == 0) report.add(Severity::kError, std::nullopt, "empty site space");
  {
    auto sorted = kernel.space.labels;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      report.add(Severity::kError, std::nullopt, "duplicate site labels");
  }
  if (kernel.space.metric) {
    const auto& d = *kernel.space.metric;
    bool shape_ok = d.size() == n;
    for (const auto& row : d) shape_ok = shape_ok && row.size() == n;
    if (!shape_ok) {
      report.add(Severity::kError, std::nullopt, "metric is not N x N");
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        if (d[i][i] != 0.0)
          report.add(Severity::kError, static_cast<SiteIndex>(i),
                     "metric diagonal entry is not 0");
        for (std::size_t j = 0; j < n; ++j) {
          if (d[i][j] < 0.0)
            report.add(Severity::kError, static_cast<SiteIndex>(i),
                       "negative metric entry");
          if (d[i][j] != d[j][i])
            report.add(Severity::kError, static_cast<SiteIndex>(i),
                       "metric is not symmetric");
        }
      }
    }
  }

  if (kernel.laws.size() != n) {
    report.add(Severity::kError, std::nullopt,
               "expected " + std::to_string(n) + " laws, got " +
                   std::to_string(kernel.laws.size()));
    return report;
  }

  for (std::size_t x = 0; x < n; ++x) {
    const SiteIndex site = static_cast<SiteIndex>(x);
    const OffspringLaw& law = kernel.laws[x];
    if (const auto* ex = std::get_if<ExplicitLaw>(&law)) {
      double mass = 0.0;
      std::map<Config, int> seen;
      for (const auto& [cfg, p] : ex->support) {
        if (p < 0.0) report.add(Severity::kError, site, "negative probability");
        mass += p;
        if (++seen[cfg] == 2)
          report.add(Severity::kError, site,
                     "duplicate support config " + cfg.describe(kernel.space));
        for (const auto& [s, c] : cfg.entries) {
          if (s >= n)
            report.add(Severity::kError, site,
                       "config references invalid site index " +
                           std::to_string(s));
          if (c == 0)
            report.add(Severity::kError, site, "config stores a zero count");
        }
        if (!std::is_sorted(cfg.entries.begin(), cfg.entries.end()))
          report.add(Severity::kError, site, "config entries not normalized");
      }
      if (std::abs(mass - 1.0) > kMassTol)
        report.add(Severity::kError, site,
                   "mass " + format_mass(mass) + " != 1");
    } else if (const auto* mn = std::get_if<MultinomialLaw>(&law)) {
      double mass = 0.0;
      bool negative = false;
      for (const auto& [count, p] : mn->total_pmf) {
        (void)count;
        if (p < 0.0) negative = true;
        mass += p;
      }
      if (negative) report.add(Severity::kError, site, "negative probability");
      if (std::abs(mass - 1.0) > kMassTol)
        report.add(Severity::kError, site,
                   "mass " + format_mass(mass) + " != 1");
      auto counts = mn->total_pmf;
      std::sort(counts.begin(), counts.end());
      for (std::size_t i = 0; i + 1 < counts.size(); ++i)
        if (counts[i].first == counts[i + 1].first)
          report.add(Severity::kError, site, "duplicate total_pmf count");
      detail::validate_dispersal(mn->dispersal, mn->dispersal_outside, n, site,
                                 report);
    } else {
      const auto& geo = std::get<GeometricLaw>(law);
      if (!(geo.mean > 0.0))
        report.add(Severity::kError, site, "geometric mean must be positive");
      detail::validate_dispersal(geo.dispersal, geo.dispersal_outside, n, site,
                                 report);
    }
  }

  if (!report.ok) return report;

  // Triviality (exactly one offspring a.s.). Conservative form: every law is
  // a point mass on one-child configurations. Exact form (N <= 64): some site
  // has all communicating partners y placing exactly one child inside y's
  // class almost surely.
  bool conservative = true;
  for (const auto& law : kernel.laws)
    conservative = conservative && detail::law_has_one_child_surely(law);

  if (n <= 64) {
    MomentMatrix moments = mean_matrix(kernel);
    auto reach = detail::reachability(moments);
    bool violated_somewhere = false;
    for (std::size_t x = 0; x < n && !violated_somewhere; ++x) {
      bool has_nontrivial_partner = false;
      for (std::size_t y = 0; y < n; ++y) {
        if (!(reach[x][y] && reach[y][x])) continue;
        std::vector<bool> in_class(n, false);
        for (std::size_t w = 0; w < n; ++w)
          in_class[w] = reach[y][w] && reach[w][y];
        double p_one =
            detail::prob_one_child_in_class(kernel.laws[y], in_class, false);
        if (p_one < 1.0 - kMassTol) {
          has_nontrivial_partner = true;
          break;
        }
      }
      if (!has_nontrivial_partner) violated_somewhere = true;
    }
    report.triviality_flag = violated_somewhere;
    report.add(Severity::kInfo, std::nullopt,
               "triviality checked exactly on communicating classes");
  } else {
    report.triviality_flag = conservative;
    report.add(Severity::kInfo, std::nullopt,
               "triviality checked in conservative per-site form (N > 64)");
  }
  if (report.triviality_flag)
    report.add(Severity::kWarning, std::nullopt,
               "every particle has exactly one offspring almost surely; "
               "extinction questions are degenerate");
  return report;
}

MomentMatrix mean_matrix(const Kernel& kernel) {
  const std::size_t n = kernel.size();
  if (n > 4096)
    fail("TooLarge", "mean_matrix is dense; refusing N = " + std::to_string(n));
  MomentMatrix m;
  m.entries.assign(n, std::vector<double>(n, 0.0));
  m.row_sums.assign(n, 0.0);
  m.outside.assign(n, 0.0);
  for (std::size_t x = 0; x < n; ++x) {
    const OffspringLaw& law = kernel.laws[x];
    if (const auto* ex = std::get_if<ExplicitLaw>(&law)) {
      for (const auto& [cfg, p] : ex->support) {
        for (const auto& [s, c] : cfg.entries) m.entries[x][s] += p * c;
        m.outside[x] += p * cfg.outside;
      }
    } else if (const auto* mn = std::get_if<MultinomialLaw>(&law)) {
      double mean = detail::law_mean_total(law);
      for (std::size_t y = 0; y < n; ++y)
        m.entries[x][y] = mean * mn->dispersal[y];
      m.outside[x] = mean * mn->dispersal_outside;
    } else {
      const auto& geo = std::get<GeometricLaw>(law);
      for (std::size_t y = 0; y < n; ++y)
        m.entries[x][y] = geo.mean * geo.dispersal[y];
      m.outside[x] = geo.mean * geo.dispersal_outside;
    }
    m.row_sums[x] =
        std::accumulate(m.entries[x].begin(), m.entries[x].end(), 0.0);
  }
  return m;
}

Pmf total_offspring_pmf(const Kernel& kernel, SiteIndex x, double tail_eps) {
  if (x >= kernel.size()) fail("OutOfRange", "site index out of range");
  const OffspringLaw& law = kernel.laws[x];
  Pmf pmf;
  if (const auto* ex = std::get_if<ExplicitLaw>(&law)) {
    for (const auto& [cfg, p] : ex->support) {
      std::uint64_t t = cfg.total();
      if (pmf.mass.size() <= t) pmf.mass.resize(t + 1, 0.0);
      pmf.mass[t] += p;
    }
  } else if (const auto* mn = std::get_if<MultinomialLaw>(&law)) {
    for (const auto& [count, p] : mn->total_pmf) {
      if (pmf.mass.size() <= count) pmf.mass.resize(count + 1, 0.0);
      pmf.mass[count] += p;
    }
  } else {
    const auto& geo = std::get<GeometricLaw>(law);
    double r = geo.mean / (1.0 + geo.mean);
    double term = 1.0 / (1.0 + geo.mean);
    double cum = 0.0;
    while (cum < 1.0 - tail_eps) {
      pmf.mass.push_back(term);
      cum += term;
      term *= r;
      if (term <= 0.0) break;
    }
    pmf.tail = std::max(0.0, 1.0 - cum);
  }
  return pmf;
}

Kernel space_time(const Kernel& kernel, std::uint32_t horizon) {
  if (horizon < 1) fail("OutOfRange", "space_time horizon must be >= 1");
  const std::size_t n = kernel.size();
  const std::size_t layers = static_cast<std::size_t>(horizon) + 1;
  if (layers * n > 200000)
    fail("TooLarge", "space-time kernel would have " +
                         std::to_string(layers * n) + " sites");

  Kernel st;
  st.boundary = kernel.boundary;
  st.space.labels.reserve(layers * n);
  for (std::size_t layer = 0; layer < layers; ++layer)
    for (std::size_t x = 0; x < n; ++x)
      st.space.labels.push_back(kernel.space.labels[x] + "@" +
                                std::to_string(layer));

  st.laws.reserve(layers * n);
  for (std::size_t layer = 0; layer < layers; ++layer) {
    const std::size_t shift = (layer + 1) * n;
    for (std::size_t x = 0; x < n; ++x) {
      if (layer == horizon) {  // time boundary: no children
        st.laws.push_back(ExplicitLaw{{{Config{}, 1.0}}});
        continue;
      }
      const OffspringLaw& law = kernel.laws[x];
      if (const auto* ex = std::get_if<ExplicitLaw>(&law)) {
        ExplicitLaw lifted;
        lifted.support.reserve(ex->support.size());
        for (const auto& [cfg, p] : ex->support) {
          Config moved = cfg;
          for (auto& [s, c] : moved.entries)
            s = static_cast<SiteIndex>(s + shift);
          lifted.support.emplace_back(std::move(moved), p);
        }
        st.laws.push_back(std::move(lifted));
      } else if (const auto* mn = std::get_if<MultinomialLaw>(&law)) {
        MultinomialLaw lifted;
        lifted.total_pmf = mn->total_pmf;
        lifted.dispersal.assign(layers * n, 0.0);
        for (std::size_t y = 0; y < n; ++y)
          lifted.dispersal[shift + y] = mn->dispersal[y];
        lifted.dispersal_outside = mn->dispersal_outside;
        st.laws.push_back(std::move(lifted));
      } else {
        const auto& geo = std::get<GeometricLaw>(law);
        GeometricLaw lifted;
        lifted.mean = geo.mean;
        lifted.dispersal.assign(layers * n, 0.0);
        for (std::size_t y = 0; y < n; ++y)
          lifted.dispersal[shift + y] = geo.dispersal[y];
        lifted.dispersal_outside = geo.dispersal_outside;
        st.laws.push_back(std::move(lifted));
      }
    }
  }
  return st;
}

ProjectionResult projection_check(const Kernel& kernel_x,
                                  const Kernel& kernel_v,
                                  const std::vector<SiteIndex>& g,
                                  std::size_t samples, std::uint64_t seed) {
  const std::size_t nx = kernel_x.size();
  const std::size_t nv = kernel_v.size();
  if (g.size() != nx)
    fail("DimensionMismatch", "site map must have one entry per source site");
  std::vector<bool> hit(nv, false);
  for (SiteIndex v : g) {
    if (v >= nv) fail("OutOfRange", "site map targets invalid site");
    hit[v] = true;
  }
  if (!std::all_of(hit.begin(), hit.end(), [](bool b) { return b; }))
    fail("NotSurjective", "site map does not cover the target space");

  Pcg32 rng = Pcg32::for_replica(seed, 0);
  double worst = 0.0;
  ProbVector zx(std::vector<double>(nx, 0.0));
  for (std::size_t s = 0; s < samples; ++s) {
    ProbVector zv(nv);
    for (std::size_t v = 0; v < nv; ++v) zv[v] = rng.next_double();
    for (std::size_t x = 0; x < nx; ++x) zx[x] = zv[g[x]];
    ProbVector gx = eval_G(kernel_x, zx);
    ProbVector gv = eval_G(kernel_v, zv);
    for (std::size_t x = 0; x < nx; ++x)
      worst = std::max(worst, std::abs(gx[x] - gv[g[x]]));
  }
  return ProjectionResult{worst <= 1e-10, worst};
}

double lipschitz_bound(const Kernel& kernel) {
  double bound = 0.0;
  for (const auto& law : kernel.laws) {
    if (const auto* ex = std::get_if<ExplicitLaw>(&law)) {
      for (const auto& [cfg, p] : ex->support)
        if (p > 0.0) bound = std::max(bound, static_cast<double>(cfg.total()));
    } else if (const auto* mn = std::get_if<MultinomialLaw>(&law)) {
      for (const auto& [count, p] : mn->total_pmf)
        if (p > 0.0) bound = std::max(bound, static_cast<double>(count));
    } else {
      double m = std::get<GeometricLaw>(law).mean;
      bound = std::max(bound, m * (1.0 + m));
    }
  }
  return bound;
}

std::vector<double> offspring_means(const Kernel& kernel) {
  std::vector<double> means;
  means.reserve(kernel.size());
  for (const auto& law : kernel.laws)
    means.push_back(detail::law_mean_total(law));
  return means;
}

}  // namespace branchlab
