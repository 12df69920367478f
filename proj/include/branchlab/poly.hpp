#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "branchlab/core.hpp"

namespace branchlab {

/// Dense tensor-product polynomial in n variables, coefficients in the
/// monomial basis. Small by construction (per-variable degrees come from
/// offspring counts); a size guard refuses blow-ups.
struct TensorPoly {
  std::vector<std::size_t> degree;  // per-variable degree
  std::vector<double> coeff;        // size prod(degree[i]+1), var 0 slowest

  std::size_t n_vars() const { return degree.size(); }
  std::size_t table_size() const;
  static TensorPoly zero(std::vector<std::size_t> degree);

  double eval(const std::vector<double>& z) const;
};

inline constexpr std::size_t kPolyTableLimit = 200000;

/// G(.|x) as a polynomial, when the law has a finite expansion (explicit or
/// multinomial; geometric pgfs are rational). Children past the truncation
/// are folded in per the kernel's boundary policy.
std::optional<TensorPoly> site_pgf_polynomial(const Kernel& kernel,
                                              SiteIndex x);

TensorPoly poly_sub(const TensorPoly& a, const TensorPoly& b);

/// Minimal Bernstein coefficient of p over the box [delta,1]^n. All
/// coefficients >= 0 certifies p >= 0 on the whole box, including faces where
/// p vanishes (which a value-plus-Lipschitz margin can never cover).
double min_bernstein_coeff(const TensorPoly& p, double delta);

/// One-variable helpers for the scalar pgf checks.
TensorPoly poly1d_from_pmf(const std::vector<std::pair<std::uint32_t, double>>& pmf);
TensorPoly poly1d_mul(const TensorPoly& a, const TensorPoly& b);
TensorPoly poly1d_linear(double c0, double c1);  // c0 + c1 t
TensorPoly poly1d_const(double c);

}  // namespace branchlab
