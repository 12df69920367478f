#include "branchlab/pairgen.hpp"

#include <algorithm>
#include <map>

#include "branchlab/rng.hpp"

namespace branchlab {

namespace {

std::vector<std::string> integer_labels(std::size_t n) {
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < n; ++i) labels.push_back(std::to_string(i));
  return labels;
}

// Random masses that sum to exactly the float 1.0 (last entry is the
// complement), keeping validation's 1e-12 mass check honest.
std::vector<double> random_masses(std::size_t k, Pcg32& rng) {
  std::vector<double> w(k);
  double sum = 0.0;
  for (double& x : w) {
    x = 0.05 + rng.next_double();
    sum += x;
  }
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < k; ++i) {
    w[i] = w[i] / sum * 0.999;  // leave headroom so the complement stays positive
    acc += w[i];
  }
  w[k - 1] = 1.0 - acc;
  return w;
}

Config random_config(std::size_t n_sites, std::uint32_t max_count, Pcg32& rng) {
  std::uint32_t total = rng.bounded(max_count + 1);
  std::vector<std::pair<SiteIndex, std::uint32_t>> pairs;
  for (std::uint32_t i = 0; i < total; ++i) {
    SiteIndex site = static_cast<SiteIndex>(rng.bounded(
        static_cast<std::uint32_t>(n_sites)));
    pairs.emplace_back(site, 1);
  }
  return Config::from_pairs(std::move(pairs));
}

Config shrink_config(const Config& f, Pcg32& rng) {
  std::vector<std::pair<SiteIndex, std::uint32_t>> pairs;
  for (const auto& [site, count] : f.entries) {
    std::uint32_t kept = rng.bounded(count + 1);
    if (kept > 0) pairs.emplace_back(site, kept);
  }
  return Config::from_pairs(std::move(pairs));
}

ExplicitLaw law_from_atoms(const std::map<Config, double>& atoms) {
  ExplicitLaw law;
  for (const auto& [cfg, p] : atoms) law.support.emplace_back(cfg, p);
  return law;
}

}  // namespace

ExplicitLaw random_explicit_law(std::uint64_t seed, std::size_t n_sites,
                                std::uint32_t max_count, std::size_t atoms) {
  Pcg32 rng = Pcg32::for_replica(seed, 0);
  std::vector<double> masses = random_masses(atoms, rng);
  std::map<Config, double> merged;
  for (std::size_t a = 0; a < atoms; ++a)
    merged[random_config(n_sites, max_count, rng)] += masses[a];
  return law_from_atoms(merged);
}

std::pair<Kernel, Kernel> random_dominated_explicit_pair(
    std::uint64_t seed, const PairGenOptions& options) {
  Pcg32 rng = Pcg32::for_replica(seed, 1);
  Kernel mu, nu;
  mu.space.labels = integer_labels(options.n_sites);
  nu.space = mu.space;

  for (std::size_t x = 0; x < options.n_sites; ++x) {
    std::size_t atoms = 1 + rng.bounded(static_cast<std::uint32_t>(
                                options.max_atoms));
    std::vector<double> masses = random_masses(atoms, rng);
    std::map<Config, double> mu_atoms, nu_atoms;
    for (std::size_t a = 0; a < atoms; ++a) {
      Config f = random_config(options.n_sites, options.max_count, rng);
      mu_atoms[f] += masses[a];
      // half the mass keeps the same configuration, half shrinks
      if (rng.next_double() < 0.5)
        nu_atoms[f] += masses[a];
      else
        nu_atoms[shrink_config(f, rng)] += masses[a];
    }
    mu.laws.push_back(law_from_atoms(mu_atoms));
    nu.laws.push_back(law_from_atoms(nu_atoms));
  }
  return {mu, nu};
}

std::pair<Kernel, Kernel> random_certified_multinomial_pair(
    std::uint64_t seed, std::size_t n_sites, std::uint32_t max_count) {
  Pcg32 rng = Pcg32::for_replica(seed, 2);
  Kernel mu, nu;
  mu.space.labels = integer_labels(n_sites);
  nu.space = mu.space;

  for (std::size_t x = 0; x < n_sites; ++x) {
    std::vector<double> row = random_masses(n_sites, rng);

    // nu's total-offspring pmf, then mu's by pushing mass to larger counts
    std::vector<double> nu_pmf_mass = random_masses(max_count + 1, rng);
    std::map<std::uint32_t, double> nu_pmf, mu_pmf;
    for (std::uint32_t c = 0; c <= max_count; ++c) {
      nu_pmf[c] += nu_pmf_mass[c];
      std::uint32_t inflated =
          c + rng.bounded(max_count + 1 - c);  // uniform in [c, max_count]
      mu_pmf[inflated] += nu_pmf_mass[c];
    }
    auto to_law = [&row](const std::map<std::uint32_t, double>& pmf) {
      MultinomialLaw law;
      for (const auto& [c, p] : pmf) law.total_pmf.emplace_back(c, p);
      law.dispersal = row;
      return law;
    };
    mu.laws.push_back(to_law(mu_pmf));
    nu.laws.push_back(to_law(nu_pmf));
  }
  return {mu, nu};
}

}  // namespace branchlab
