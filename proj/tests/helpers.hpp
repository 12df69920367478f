#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "branchlab/core.hpp"
#include "branchlab/genfun.hpp"

namespace branchlab::testing {

inline Kernel single_type_geometric(double mean) {
  Kernel k;
  k.space.labels = {"a"};
  GeometricLaw law;
  law.mean = mean;
  law.dispersal = {1.0};
  k.laws = {law};
  return k;
}

inline Kernel explicit_kernel(
    std::vector<std::string> labels,
    std::vector<std::vector<std::pair<Config, double>>> supports,
    BoundaryPolicy boundary = BoundaryPolicy::kKill) {
  Kernel k;
  k.space.labels = std::move(labels);
  k.boundary = boundary;
  for (auto& support : supports) {
    ExplicitLaw law;
    law.support = std::move(support);
    k.laws.push_back(std::move(law));
  }
  return k;
}

inline Config cfg(std::vector<std::pair<SiteIndex, std::uint32_t>> pairs,
                  std::uint32_t outside = 0) {
  return Config::from_pairs(std::move(pairs), outside);
}

// Enumerates every placement of n indistinguishable children over n_sites
// boxes (compositions of n), invoking fn with the counts vector.
inline void for_each_composition(
    std::uint32_t n, std::size_t n_sites,
    const std::function<void(const std::vector<std::uint32_t>&)>& fn) {
  std::vector<std::uint32_t> counts(n_sites, 0);
  std::function<void(std::uint32_t, std::size_t)> rec =
      [&](std::uint32_t left, std::size_t box) {
        if (box + 1 == n_sites) {
          counts[box] = left;
          fn(counts);
          return;
        }
        for (std::uint32_t c = 0; c <= left; ++c) {
          counts[box] = c;
          rec(left - c, box + 1);
        }
      };
  if (n_sites > 0) rec(n, 0);
}

inline double factorial(std::uint32_t n) {
  double f = 1.0;
  for (std::uint32_t i = 2; i <= n; ++i) f *= i;
  return f;
}

// Independent evaluation of a multinomial law's pgf at z: enumerate every
// composition of every tabulated count with its multinomial weight. This is
// the oracle the closed form phi_x(P z) is checked against.
inline double multinomial_pgf_brute_force(const MultinomialLaw& law,
                                          const std::vector<double>& z) {
  double total = 0.0;
  for (const auto& [n, p] : law.total_pmf) {
    double sum_over_configs = 0.0;
    for_each_composition(n, law.dispersal.size(),
                         [&](const std::vector<std::uint32_t>& counts) {
                           double weight = factorial(n);
                           double prob = 1.0;
                           for (std::size_t y = 0; y < counts.size(); ++y) {
                             weight /= factorial(counts[y]);
                             for (std::uint32_t i = 0; i < counts[y]; ++i)
                               prob *= law.dispersal[y] * z[y];
                           }
                           sum_over_configs += weight * prob;
                         });
    total += p * sum_over_configs;
  }
  return total;
}

// Same enumeration, for the expected number of children sent to `target`.
inline double multinomial_mean_brute_force(const MultinomialLaw& law,
                                           std::size_t target) {
  double mean = 0.0;
  for (const auto& [n, p] : law.total_pmf) {
    for_each_composition(n, law.dispersal.size(),
                         [&](const std::vector<std::uint32_t>& counts) {
                           double weight = factorial(n);
                           double prob = 1.0;
                           for (std::size_t y = 0; y < counts.size(); ++y) {
                             weight /= factorial(counts[y]);
                             for (std::uint32_t i = 0; i < counts[y]; ++i)
                               prob *= law.dispersal[y];
                           }
                           mean += p * weight * prob * counts[target];
                         });
  }
  return mean;
}

}  // namespace branchlab::testing
