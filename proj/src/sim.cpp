#include "branchlab/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "branchlab/parallel.hpp"

namespace branchlab {

const char* to_string(StopReason reason) {
  switch (reason) {
    case StopReason::kHorizon: return "horizon";
    case StopReason::kExtinct: return "extinct";
    default: return "population_cap";
  }
}

namespace {

// Draw one offspring configuration into the dense accumulator. Multinomial
// placement uses sequential binomial splitting in site order so the draw is
// reproducible regardless of anything but the stream position.
void place_by_row(const std::vector<double>& dispersal,
                  std::uint64_t n_children, std::vector<std::uint64_t>& acc,
                  std::uint64_t& outside, Pcg32& rng) {
  std::uint64_t remaining = n_children;
  double mass_left = 1.0;
  for (std::size_t y = 0; y < dispersal.size() && remaining > 0; ++y) {
    double p = dispersal[y];
    if (p <= 0.0) continue;
    double ratio = mass_left > 0.0 ? std::min(1.0, p / mass_left) : 1.0;
    std::uint32_t c = sample_binomial(static_cast<std::uint32_t>(remaining),
                                      ratio, rng);
    acc[y] += c;
    remaining -= c;
    mass_left -= p;
  }
  outside += remaining;  // whatever is left belongs past the truncation
}

void draw_offspring(const Kernel& kernel, SiteIndex site,
                    std::vector<std::uint64_t>& acc, std::uint64_t& outside,
                    Pcg32& rng) {
  const OffspringLaw& law = kernel.laws[site];
  if (const auto* ex = std::get_if<ExplicitLaw>(&law)) {
    double u = rng.next_double();
    double cum = 0.0;
    std::size_t pick = ex->support.empty() ? 0 : ex->support.size() - 1;
    for (std::size_t i = 0; i + 1 < ex->support.size(); ++i) {
      cum += ex->support[i].second;
      if (u < cum) {
        pick = i;
        break;
      }
    }
    if (!ex->support.empty()) {
      const Config& f = ex->support[pick].first;
      for (const auto& [s, c] : f.entries) acc[s] += c;
      outside += f.outside;
    }
    return;
  }
  if (const auto* mn = std::get_if<MultinomialLaw>(&law)) {
    double u = rng.next_double();
    double cum = 0.0;
    std::uint64_t n = mn->total_pmf.empty() ? 0 : mn->total_pmf.back().first;
    for (std::size_t i = 0; i + 1 < mn->total_pmf.size(); ++i) {
      cum += mn->total_pmf[i].second;
      if (u < cum) {
        n = mn->total_pmf[i].first;
        break;
      }
    }
    place_by_row(mn->dispersal, n, acc, outside, rng);
    return;
  }
  const auto& geo = std::get<GeometricLaw>(law);
  std::uint64_t n = sample_geometric_count(geo.mean, rng);
  place_by_row(geo.dispersal, n, acc, outside, rng);
}

Config config_from_dense(const std::vector<std::uint64_t>& acc,
                         std::uint64_t outside, BoundaryPolicy policy) {
  Config next;
  for (std::size_t y = 0; y < acc.size(); ++y)
    if (acc[y] > 0)
      next.entries.emplace_back(static_cast<SiteIndex>(y),
                                static_cast<std::uint32_t>(acc[y]));
  next.outside = policy == BoundaryPolicy::kSurviveOutside
                     ? static_cast<std::uint32_t>(
                           std::min<std::uint64_t>(outside, 0xffffffffu))
                     : 0u;  // Kill discards escapees
  return next;
}

}  // namespace

Config step(const Kernel& kernel, const Config& config, Pcg32& rng) {
  std::vector<std::uint64_t> acc(kernel.size(), 0);
  std::uint64_t outside = 0;
  for (const auto& [site, count] : config.entries)
    for (std::uint32_t i = 0; i < count; ++i)
      draw_offspring(kernel, site, acc, outside, rng);
  return config_from_dense(acc, outside, kernel.boundary);
}

Trajectory run(const Kernel& kernel, const Config& init, std::size_t horizon,
               std::uint64_t pop_cap, std::uint64_t seed) {
  if (horizon < 1) fail("OutOfRange", "horizon must be >= 1");
  Trajectory trajectory;
  trajectory.seed = RngSeedRecord{seed, 0};
  Pcg32 rng = Pcg32::for_replica(seed, 0);

  Config current = init;
  trajectory.outside_survivors += current.outside;
  current.outside = 0;
  trajectory.generations.push_back(current);

  for (std::size_t gen = 0; gen < horizon; ++gen) {
    if (current.empty()) {  // nothing left to evolve inside the truncation
      trajectory.stopped_reason = StopReason::kExtinct;
      return trajectory;
    }
    std::uint64_t pop = current.total();
    if (pop > pop_cap) {
      trajectory.stopped_reason = StopReason::kPopulationCap;
      return trajectory;
    }
    Config next = step(kernel, current, rng);
    trajectory.outside_survivors += next.outside;
    next.outside = 0;
    trajectory.generations.push_back(next);
    current = std::move(next);
  }
  trajectory.stopped_reason =
      current.empty() ? StopReason::kExtinct : StopReason::kHorizon;
  return trajectory;
}

namespace {

enum class ReplicaClass { kExtinct, kSurviving, kUndecided };

struct ReplicaOutcome {
  ReplicaClass cls = ReplicaClass::kUndecided;
  std::uint64_t max_pop = 0;
};

ReplicaOutcome classify_replica(const Kernel& kernel, SiteIndex start,
                                const std::vector<char>& in_a,
                                std::size_t horizon, std::uint64_t pop_cap,
                                std::size_t margin, Pcg32& rng) {
  Config current = Config::from_pairs({{start, 1}});
  std::uint64_t outside = 0;
  // last generation with a particle in A; -1 encoded as "none yet"
  std::size_t last_visit = in_a[start] ? 0 : std::numeric_limits<std::size_t>::max();
  ReplicaOutcome out;
  out.max_pop = 1;

  for (std::size_t gen = 0; gen < horizon; ++gen) {
    if (current.empty()) {
      out.cls = outside > 0 ? ReplicaClass::kSurviving : ReplicaClass::kExtinct;
      return out;
    }
    std::uint64_t pop = current.total();
    out.max_pop = std::max(out.max_pop, pop);
    if (pop > pop_cap) {
      bool recent =
          last_visit != std::numeric_limits<std::size_t>::max() &&
          gen <= last_visit + margin;
      if (outside > 0 || recent) out.cls = ReplicaClass::kSurviving;
      return out;
    }
    Config next = step(kernel, current, rng);
    outside += next.outside;
    next.outside = 0;
    for (const auto& [s, c] : next.entries)
      if (in_a[s]) {
        last_visit = gen + 1;
        break;
      }
    current = std::move(next);
  }
  out.max_pop = std::max(out.max_pop, current.total());
  if (outside > 0) {
    out.cls = ReplicaClass::kSurviving;
    return out;
  }
  if (current.empty()) {
    out.cls = ReplicaClass::kExtinct;
    return out;
  }
  bool recent = last_visit != std::numeric_limits<std::size_t>::max() &&
                horizon <= last_visit + margin;
  out.cls = recent ? ReplicaClass::kUndecided : ReplicaClass::kExtinct;
  return out;
}

}  // namespace

McEstimate mc_extinction(const Kernel& kernel, SiteIndex x, const SiteSet& sites,
                         std::size_t replicas, std::size_t horizon,
                         std::uint64_t pop_cap, std::size_t last_visit_margin,
                         std::uint64_t seed) {
  if (replicas < 1) fail("OutOfRange", "need at least one replica");
  if (x >= kernel.size()) fail("OutOfRange", "start site out of range");
  std::vector<char> in_a(kernel.size(), 0);
  for (SiteIndex s : sites) {
    if (s >= kernel.size()) fail("OutOfRange", "site set out of range");
    in_a[s] = 1;
  }

  std::vector<std::uint8_t> classes(replicas);
  parallel_for(replicas, [&](std::size_t r) {
    Pcg32 rng = Pcg32::for_replica(seed, r);
    classes[r] = static_cast<std::uint8_t>(classify_replica(
        kernel, x, in_a, horizon, pop_cap, last_visit_margin, rng).cls);
  });

  McEstimate estimate;
  estimate.replicas = replicas;
  for (std::uint8_t c : classes) {
    if (c == static_cast<std::uint8_t>(ReplicaClass::kExtinct))
      ++estimate.extinct_in_a;
    else if (c == static_cast<std::uint8_t>(ReplicaClass::kSurviving))
      ++estimate.surviving_in_a;
    else
      ++estimate.undecided;
  }
  std::size_t decided = estimate.extinct_in_a + estimate.surviving_in_a;
  if (decided > 0) {
    estimate.point =
        static_cast<double>(estimate.extinct_in_a) / static_cast<double>(decided);
    estimate.std_error = std::sqrt(
        std::max(0.0, estimate.point * (1.0 - estimate.point)) /
        static_cast<double>(decided));
  } else {
    estimate.point = std::numeric_limits<double>::quiet_NaN();
    estimate.std_error = std::numeric_limits<double>::infinity();
  }
  return estimate;
}

MartingaleReport martingale_test(const Kernel& kernel, const Config& init,
                                 const ProbVector& z, std::size_t k,
                                 std::size_t replicas, std::uint64_t seed) {
  if (k < 1) fail("OutOfRange", "k must be >= 1");
  if (z.size() != kernel.size())
    fail("DimensionMismatch", "z has the wrong length");

  MartingaleReport report;
  report.z = z;
  report.k = k;

  ProbVector gk = z;
  for (std::size_t i = 0; i < k; ++i) gk = eval_G(kernel, gk);
  double predicted = 1.0;
  for (const auto& [site, count] : init.entries)
    predicted *= std::pow(gk[site], static_cast<double>(count));
  if (init.outside > 0 && kernel.boundary == BoundaryPolicy::kSurviveOutside)
    predicted = 0.0;
  report.predicted = predicted;

  report.w_samples.assign(replicas, 0.0);
  parallel_for(replicas, [&](std::size_t r) {
    Pcg32 rng = Pcg32::for_replica(seed, r);
    Config current = init;
    std::uint64_t outside = current.outside;
    current.outside = 0;
    for (std::size_t gen = 0; gen < k; ++gen) {
      if (current.empty()) break;  // 0 is absorbing; z^0 = 1
      Config next = step(kernel, current, rng);
      outside += next.outside;
      next.outside = 0;
      current = std::move(next);
    }
    double w = 1.0;
    for (const auto& [site, count] : current.entries)
      w *= std::pow(z[site], static_cast<double>(count));
    if (outside > 0 && kernel.boundary == BoundaryPolicy::kSurviveOutside)
      w = 0.0;
    report.w_samples[r] = w;
  });

  double mean = 0.0;
  for (double w : report.w_samples) mean += w;
  mean /= static_cast<double>(replicas);
  double var = 0.0;
  for (double w : report.w_samples) var += (w - mean) * (w - mean);
  var = replicas > 1 ? var / static_cast<double>(replicas - 1) : 0.0;
  double se = std::sqrt(var / static_cast<double>(replicas));

  report.empirical_mean = mean;
  if (se > 1e-300)
    report.z_score = (mean - predicted) / se;
  else
    report.z_score = std::abs(mean - predicted) < 1e-12
                         ? 0.0
                         : std::copysign(1e9, mean - predicted);
  return report;
}

DisplacementSeries displacement_stats(const SiteSpace& space,
                                      const Trajectory& trajectory,
                                      SiteIndex origin) {
  if (!space.metric) fail("NoMetric", "site space carries no metric");
  if (origin >= space.size()) fail("OutOfRange", "origin site out of range");
  const auto& d = *space.metric;

  DisplacementSeries series;
  series.max_displacement.reserve(trajectory.generations.size());
  series.min_displacement.reserve(trajectory.generations.size());
  for (const Config& gen : trajectory.generations) {
    if (gen.entries.empty()) {  // the 1_{survival} convention: zero when dead
      series.max_displacement.push_back(0.0);
      series.min_displacement.push_back(0.0);
      continue;
    }
    double hi = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& [site, count] : gen.entries) {
      hi = std::max(hi, d[origin][site]);
      lo = std::min(lo, d[origin][site]);
    }
    series.max_displacement.push_back(hi);
    series.min_displacement.push_back(lo);
  }
  return series;
}

GrowthReport growth_test(const Kernel& kernel, SiteIndex x, const SiteSet& sites,
                         std::size_t replicas, std::size_t horizon,
                         std::uint64_t pop_cap, std::uint64_t seed,
                         double precondition_floor) {
  LocalExtinctionResult local = q_local(kernel, sites);
  GrowthReport report;
  report.min_q_local = local.q_local.min();
  if (!(report.min_q_local > precondition_floor))
    fail("PreconditionUnverified",
         "inf_x q_local(x,A) = " + std::to_string(report.min_q_local) +
             " is not bounded away from 0; population blow-up on survival is "
             "not guaranteed");

  std::vector<char> in_a(kernel.size(), 0);
  for (SiteIndex s : sites) in_a[s] = 1;
  const std::size_t margin = std::max<std::size_t>(1, horizon / 5);

  std::vector<std::uint8_t> classes(replicas);
  std::vector<std::uint64_t> peaks(replicas);
  parallel_for(replicas, [&](std::size_t r) {
    Pcg32 rng = Pcg32::for_replica(seed, r);
    ReplicaOutcome out =
        classify_replica(kernel, x, in_a, horizon, pop_cap, margin, rng);
    // At the horizon an alive replica with recent visits counts as surviving
    // for growth purposes (blow-up is what we are measuring).
    classes[r] = static_cast<std::uint8_t>(out.cls);
    peaks[r] = out.max_pop;
  });

  report.replicas = replicas;
  report.thresholds = {10, 100, 1000, 10000, 100000};
  while (!report.thresholds.empty() && report.thresholds.back() > pop_cap)
    report.thresholds.pop_back();
  std::vector<std::size_t> hits(report.thresholds.size(), 0);
  for (std::size_t r = 0; r < replicas; ++r) {
    bool surviving =
        classes[r] == static_cast<std::uint8_t>(ReplicaClass::kSurviving) ||
        classes[r] == static_cast<std::uint8_t>(ReplicaClass::kUndecided);
    if (!surviving) continue;
    ++report.surviving;
    for (std::size_t t = 0; t < report.thresholds.size(); ++t)
      if (peaks[r] >= report.thresholds[t]) ++hits[t];
  }
  report.fractions.assign(report.thresholds.size(), 0.0);
  if (report.surviving > 0)
    for (std::size_t t = 0; t < report.thresholds.size(); ++t)
      report.fractions[t] =
          static_cast<double>(hits[t]) / static_cast<double>(report.surviving);
  return report;
}

}  // namespace branchlab
