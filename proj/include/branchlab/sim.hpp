#pragma once

#include <cstdint>
#include <vector>

#include "branchlab/core.hpp"
#include "branchlab/genfun.hpp"
#include "branchlab/rng.hpp"

namespace branchlab {

struct RngSeedRecord {
  std::uint64_t master = 0;
  std::uint64_t replica = 0;
};

enum class StopReason { kHorizon, kExtinct, kPopulationCap };

struct Trajectory {
  std::vector<Config> generations;  // generation 0 is the initial condition
  StopReason stopped_reason = StopReason::kHorizon;
  RngSeedRecord seed;
  // Children sent past the truncation under SurviveOutside accumulate here
  // as immortal non-returning survivors; Kill kernels always keep this 0.
  std::uint64_t outside_survivors = 0;
};

/// One synchronous generation: every particle draws a configuration from its
/// site's law independently. Under SurviveOutside the returned config's
/// `outside` field carries the newly escaped children.
Config step(const Kernel& kernel, const Config& config, Pcg32& rng);

/// Repeats step until extinction, the horizon, or total population > pop_cap.
/// Deterministic given (kernel, init, seed).
Trajectory run(const Kernel& kernel, const Config& init, std::size_t horizon,
               std::uint64_t pop_cap, std::uint64_t seed);

struct McEstimate {
  double point = 0.0;      // extinct-in-A fraction among decided replicas
  double std_error = 0.0;  // binomial standard error
  std::size_t replicas = 0;
  std::size_t extinct_in_a = 0;
  std::size_t surviving_in_a = 0;
  std::size_t undecided = 0;  // reported, never folded into the estimate
};

/// Monte Carlo estimate of q(x,A) on the truncated model. A replica counts as
/// extinct in A when the process dies, or when it reaches the horizon with no
/// visit to A in the final `last_visit_margin` generations while the
/// population stayed below pop_cap; as surviving when it blows past pop_cap
/// with a recent visit (or, under SurviveOutside, escapes the truncation);
/// anything else is undecided.
McEstimate mc_extinction(const Kernel& kernel, SiteIndex x, const SiteSet& sites,
                         std::size_t replicas, std::size_t horizon,
                         std::uint64_t pop_cap, std::size_t last_visit_margin,
                         std::uint64_t seed);

struct MartingaleReport {
  ProbVector z;
  std::size_t k = 0;
  double empirical_mean = 0.0;
  double predicted = 0.0;  // (G^(k)(z))^{eta_0}
  double z_score = 0.0;
  std::vector<double> w_samples;  // terminal z^{eta_k} per replica
};

/// Tests E[z^{eta_k}] = (G^(k)(z))^{eta_0} empirically.
MartingaleReport martingale_test(const Kernel& kernel, const Config& init,
                                 const ProbVector& z, std::size_t k,
                                 std::size_t replicas, std::uint64_t seed);

struct DisplacementSeries {
  std::vector<double> max_displacement;  // M_n, 0 when no particles remain
  std::vector<double> min_displacement;  // m_n
};

DisplacementSeries displacement_stats(const SiteSpace& space,
                                      const Trajectory& trajectory,
                                      SiteIndex origin);

struct GrowthReport {
  double min_q_local = 0.0;  // genfun verification of the precondition
  std::size_t replicas = 0;
  std::size_t surviving = 0;
  std::vector<std::uint64_t> thresholds;
  std::vector<double> fractions;  // of surviving replicas with max pop >= t
};

/// Desk check of population blow-up on survival: requires
/// inf_x q_local(x,A) > floor (verified through the fixed-point engine
/// first), then reports how many surviving replicas exceed each population
/// threshold by the horizon.
GrowthReport growth_test(const Kernel& kernel, SiteIndex x, const SiteSet& sites,
                         std::size_t replicas, std::size_t horizon,
                         std::uint64_t pop_cap, std::uint64_t seed,
                         double precondition_floor = 1e-6);

const char* to_string(StopReason reason);

}  // namespace branchlab
