#pragma once

#include <cstdint>
#include <utility>

#include "branchlab/core.hpp"

namespace branchlab {

struct PairGenOptions {
  std::size_t n_sites = 3;
  std::uint32_t max_count = 3;   // per-config total offspring cap
  std::size_t max_atoms = 4;     // support atoms per site before merging
};

/// Random explicit kernel pair with mu >= nu in the classical stochastic
/// order by construction: nu is obtained from mu by shrinking each atom's
/// counts coordinatewise, which is itself an ordered coupling.
std::pair<Kernel, Kernel> random_dominated_explicit_pair(
    std::uint64_t seed, const PairGenOptions& options = {});

/// Random multinomial kernel pair sharing the dispersal matrix with
/// phi_mu <= phi_nu on [0,1] sitewise: mu's total-offspring law is built by
/// inflating nu's counts.
std::pair<Kernel, Kernel> random_certified_multinomial_pair(
    std::uint64_t seed, std::size_t n_sites = 5, std::uint32_t max_count = 3);

/// One random explicit law (for order-check unit tests).
ExplicitLaw random_explicit_law(std::uint64_t seed, std::size_t n_sites,
                                std::uint32_t max_count, std::size_t atoms);

}  // namespace branchlab
