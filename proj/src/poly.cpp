#include "branchlab/poly.hpp"

#include <algorithm>
#include <cmath>

namespace branchlab {

std::size_t TensorPoly::table_size() const {
  std::size_t size = 1;
  for (std::size_t d : degree) size *= d + 1;
  return size;
}

TensorPoly TensorPoly::zero(std::vector<std::size_t> degree) {
  TensorPoly p;
  p.degree = std::move(degree);
  p.coeff.assign(p.table_size(), 0.0);
  return p;
}

double TensorPoly::eval(const std::vector<double>& z) const {
  // Horner along the slowest axis, recursively via strides.
  std::vector<double> table = coeff;
  std::size_t block = table.size();
  for (std::size_t v = 0; v < n_vars(); ++v) {
    std::size_t d = degree[v];
    block /= d + 1;
    for (std::size_t out = 0; out < block; ++out) {
      double acc = 0.0;
      for (std::size_t k = d + 1; k-- > 0;)
        acc = acc * z[v] + table[k * block + out];
      table[out] = acc;
    }
    // Compact: after processing axis v, the active table is the first
    // `block` entries, laid out for the remaining axes.
    table.resize(block);
  }
  return table[0];
}

namespace {

struct TensorBuilder {
  std::vector<std::size_t> degree;
  std::vector<std::size_t> stride;
  std::vector<double> coeff;

  explicit TensorBuilder(std::vector<std::size_t> deg) : degree(std::move(deg)) {
    stride.assign(degree.size(), 1);
    std::size_t size = 1;
    for (std::size_t v = degree.size(); v-- > 0;) {
      stride[v] = size;
      size *= degree[v] + 1;
    }
    std::size_t total = 1;
    for (std::size_t d : degree) total *= d + 1;
    coeff.assign(total, 0.0);
  }

  std::size_t index_of(const std::vector<std::size_t>& expo) const {
    std::size_t idx = 0;
    for (std::size_t v = 0; v < expo.size(); ++v) idx += expo[v] * stride[v];
    return idx;
  }
};

// In-place transform of one axis: new[i] = sum_k M[i][k] old[k].
void apply_axis(TensorPoly& p, std::size_t axis,
                const std::vector<std::vector<double>>& matrix) {
  std::size_t d = p.degree[axis];
  std::size_t inner = 1;
  for (std::size_t v = axis + 1; v < p.n_vars(); ++v)
    inner *= p.degree[v] + 1;
  std::size_t outer = p.coeff.size() / (inner * (d + 1));
  std::vector<double> slice(d + 1);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in) {
      std::size_t base = o * (d + 1) * inner + in;
      for (std::size_t k = 0; k <= d; ++k) slice[k] = p.coeff[base + k * inner];
      for (std::size_t i = 0; i <= d; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k <= d; ++k) acc += matrix[i][k] * slice[k];
        p.coeff[base + i * inner] = acc;
      }
    }
}

// Bernstein-basis coefficients from monomial coefficients on [0,1]:
// b_i = sum_{k<=i} [C(i,k)/C(d,k)] c_k, with the ratio accumulated as a
// product of factors <= 1 to stay finite at high degree.
std::vector<std::vector<double>> bernstein_matrix(std::size_t d) {
  std::vector<std::vector<double>> m(d + 1, std::vector<double>(d + 1, 0.0));
  for (std::size_t i = 0; i <= d; ++i)
    for (std::size_t k = 0; k <= i; ++k) {
      double ratio = 1.0;
      for (std::size_t j = 0; j < k; ++j)
        ratio *= static_cast<double>(i - j) / static_cast<double>(d - j);
      m[i][k] = ratio;
    }
  return m;
}

// Substitution z = delta + (1-delta) w: column k holds the coefficients of
// (delta + (1-delta) w)^k.
std::vector<std::vector<double>> affine_matrix(std::size_t d, double delta) {
  std::vector<std::vector<double>> m(d + 1, std::vector<double>(d + 1, 0.0));
  for (std::size_t k = 0; k <= d; ++k) {
    // binomial expansion by recurrence
    double term = std::pow(delta, static_cast<double>(k));  // j = 0
    if (k == 0) term = 1.0;
    for (std::size_t j = 0; j <= k; ++j) {
      m[j][k] = term;
      if (j < k)
        term = delta > 0.0
                   ? term * static_cast<double>(k - j) / (j + 1) *
                         ((1.0 - delta) / delta)
                   : 0.0;
    }
    if (delta == 0.0) {
      for (std::size_t j = 0; j <= k; ++j) m[j][k] = (j == k) ? 1.0 : 0.0;
    }
  }
  return m;
}

std::vector<std::vector<double>> mat_mul(
    const std::vector<std::vector<double>>& a,
    const std::vector<std::vector<double>>& b) {
  std::size_t n = a.size();
  std::vector<std::vector<double>> c(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      double aik = a[i][k];
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) c[i][j] += aik * b[k][j];
    }
  return c;
}

// Multiply the tensor by the linear form (c0 + sum_y c[y] z_y); degrees must
// already leave headroom on every axis.
void mul_linear_form(TensorBuilder& acc, const TensorBuilder& src,
                     double c0, const std::vector<double>& c) {
  std::vector<std::size_t> expo(src.degree.size(), 0);
  for (std::size_t idx = 0; idx < src.coeff.size(); ++idx) {
    double v = src.coeff[idx];
    if (v != 0.0) {
      if (c0 != 0.0) acc.coeff[acc.index_of(expo)] += c0 * v;
      for (std::size_t y = 0; y < c.size(); ++y) {
        if (c[y] == 0.0) continue;
        ++expo[y];
        acc.coeff[acc.index_of(expo)] += c[y] * v;
        --expo[y];
      }
    }
    // odometer over exponents
    for (std::size_t v2 = expo.size(); v2-- > 0;) {
      if (++expo[v2] <= src.degree[v2]) break;
      expo[v2] = 0;
    }
  }
}

}  // namespace

std::optional<TensorPoly> site_pgf_polynomial(const Kernel& kernel,
                                              SiteIndex x) {
  const std::size_t n = kernel.size();
  const bool kill = kernel.boundary == BoundaryPolicy::kKill;
  const OffspringLaw& law = kernel.laws[x];

  if (const auto* ex = std::get_if<ExplicitLaw>(&law)) {
    std::vector<std::size_t> degree(n, 0);
    for (const auto& [cfg, p] : ex->support)
      for (const auto& [s, c] : cfg.entries)
        degree[s] = std::max<std::size_t>(degree[s], c);
    TensorPoly p = TensorPoly::zero(degree);
    if (p.table_size() > kPolyTableLimit) return std::nullopt;
    TensorBuilder b(degree);
    for (const auto& [cfg, mass] : ex->support) {
      if (!kill && cfg.outside > 0) continue;  // factor 0 kills the atom
      std::vector<std::size_t> expo(n, 0);
      for (const auto& [s, c] : cfg.entries) expo[s] = c;
      b.coeff[b.index_of(expo)] += mass;
    }
    p.coeff = std::move(b.coeff);
    return p;
  }

  if (const auto* mn = std::get_if<MultinomialLaw>(&law)) {
    std::size_t max_n = 0;
    for (const auto& [count, prob] : mn->total_pmf)
      if (prob != 0.0) max_n = std::max<std::size_t>(max_n, count);
    std::vector<std::size_t> degree(n, max_n);
    TensorPoly p = TensorPoly::zero(degree);
    if (p.table_size() > kPolyTableLimit) return std::nullopt;

    double c0 = mn->dispersal_outside * (kill ? 1.0 : 0.0);
    TensorBuilder power(degree);  // (c0 + sum p_y z_y)^j, built incrementally
    power.coeff[0] = 1.0;
    TensorBuilder acc(degree);
    std::vector<double> pmf_by_count(max_n + 1, 0.0);
    for (const auto& [count, prob] : mn->total_pmf)
      if (count <= max_n) pmf_by_count[count] += prob;

    for (std::size_t j = 0; j <= max_n; ++j) {
      if (pmf_by_count[j] != 0.0)
        for (std::size_t i = 0; i < acc.coeff.size(); ++i)
          acc.coeff[i] += pmf_by_count[j] * power.coeff[i];
      if (j < max_n) {
        TensorBuilder next(degree);
        mul_linear_form(next, power, c0, mn->dispersal);
        power = std::move(next);
      }
    }
    p.coeff = std::move(acc.coeff);
    return p;
  }

  return std::nullopt;  // geometric: rational, handled separately
}

TensorPoly poly_sub(const TensorPoly& a, const TensorPoly& b) {
  std::vector<std::size_t> degree(std::max(a.n_vars(), b.n_vars()), 0);
  for (std::size_t v = 0; v < a.n_vars(); ++v) degree[v] = a.degree[v];
  for (std::size_t v = 0; v < b.n_vars(); ++v)
    degree[v] = std::max(degree[v], b.degree[v]);
  TensorPoly out = TensorPoly::zero(degree);
  TensorBuilder dst(degree);

  auto accumulate = [&](const TensorPoly& src, double sign) {
    std::vector<std::size_t> expo(src.n_vars(), 0);
    std::vector<std::size_t> full(degree.size(), 0);
    for (std::size_t idx = 0; idx < src.coeff.size(); ++idx) {
      if (src.coeff[idx] != 0.0) {
        std::fill(full.begin(), full.end(), 0);
        std::copy(expo.begin(), expo.end(), full.begin());
        dst.coeff[dst.index_of(full)] += sign * src.coeff[idx];
      }
      for (std::size_t v = expo.size(); v-- > 0;) {
        if (++expo[v] <= src.degree[v]) break;
        expo[v] = 0;
      }
    }
  };
  accumulate(a, 1.0);
  accumulate(b, -1.0);
  out.coeff = std::move(dst.coeff);
  return out;
}

double min_bernstein_coeff(const TensorPoly& p, double delta) {
  TensorPoly q = p;
  for (std::size_t v = 0; v < q.n_vars(); ++v) {
    std::size_t d = q.degree[v];
    auto transform = mat_mul(bernstein_matrix(d), affine_matrix(d, delta));
    apply_axis(q, v, transform);
  }
  double lo = q.coeff.empty() ? 0.0 : q.coeff[0];
  for (double c : q.coeff) lo = std::min(lo, c);
  return lo;
}

TensorPoly poly1d_from_pmf(
    const std::vector<std::pair<std::uint32_t, double>>& pmf) {
  std::size_t d = 0;
  for (const auto& [n, prob] : pmf)
    if (prob != 0.0) d = std::max<std::size_t>(d, n);
  TensorPoly p = TensorPoly::zero({d});
  for (const auto& [n, prob] : pmf) p.coeff[n] += prob;
  return p;
}

TensorPoly poly1d_mul(const TensorPoly& a, const TensorPoly& b) {
  TensorPoly p = TensorPoly::zero({a.degree[0] + b.degree[0]});
  for (std::size_t i = 0; i <= a.degree[0]; ++i)
    for (std::size_t j = 0; j <= b.degree[0]; ++j)
      p.coeff[i + j] += a.coeff[i] * b.coeff[j];
  return p;
}

TensorPoly poly1d_linear(double c0, double c1) {
  TensorPoly p = TensorPoly::zero({1});
  p.coeff[0] = c0;
  p.coeff[1] = c1;
  return p;
}

TensorPoly poly1d_const(double c) {
  TensorPoly p = TensorPoly::zero({0});
  p.coeff[0] = c;
  return p;
}

}  // namespace branchlab
