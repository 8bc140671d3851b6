#pragma once

// Riemann-Liouville derivatives, the generalized Lebesgue-Stieltjes integral and
// the Hoelder/Besov-type functionals, all on uniform grids. Every singular
// integral uses product integration: data are interpolated linearly between
// grid nodes and integrated exactly against the power kernel.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "mildheat/errors.hpp"
#include "mildheat/spectral_domain.hpp"

namespace mildheat {

/// Samples of a real function on the uniform grid t0 + i (t1 - t0)/K, i = 0..K.
struct GridFunction {
  double t0 = 0.0;
  double t1 = 1.0;
  std::vector<double> values;

  GridFunction() = default;
  GridFunction(double a, double b, std::vector<double> v) : t0(a), t1(b), values(std::move(v)) {
    if (values.size() < 3) throw DomainError("GridFunction: need K >= 2 intervals");
    if (!(t1 > t0)) throw DomainError("GridFunction: need t1 > t0");
  }

  static GridFunction sample(const std::function<double(double)>& fn, double a, double b,
                             std::size_t steps) {
    std::vector<double> v(steps + 1);
    for (std::size_t i = 0; i <= steps; ++i)
      v[i] = fn(a + (b - a) * static_cast<double>(i) / static_cast<double>(steps));
    return GridFunction(a, b, std::move(v));
  }

  std::size_t steps() const noexcept { return values.size() - 1; }
  double spacing() const noexcept { return (t1 - t0) / static_cast<double>(steps()); }
  double time(std::size_t i) const noexcept {
    return t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(steps());
  }
  /// Piecewise-linear interpolant at t in [t0, t1].
  double at(double t) const {
    const double pos = std::clamp((t - t0) / spacing(), 0.0, static_cast<double>(steps()));
    const auto i = std::min(static_cast<std::size_t>(pos), steps() - 1);
    const double w = pos - static_cast<double>(i);
    return (1.0 - w) * values[i] + w * values[i + 1];
  }

  bool same_grid(const GridFunction& o) const {
    return t0 == o.t0 && t1 == o.t1 && values.size() == o.values.size();
  }
};

/// Regularity pair (alpha, H) for d = 1.
struct HolderExponent {
  double alpha = 0.3;
  double hurst = 0.75;

  /// alpha in (1 - H, 1/(d+2)) with d = 1; empty unless H > 2/3.
  static bool admissible(double alpha, double hurst) {
    return hurst > 0.5 && hurst < 1.0 && alpha > 1.0 - hurst && alpha < 1.0 / 3.0;
  }
  bool admissible() const { return admissible(alpha, hurst); }
  bool operator==(const HolderExponent&) const = default;
};

inline void require_order(double alpha, const char* who) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw DomainError(std::string(who) + ": fractional order must lie in (0,1)");
}

/// Product-integration weights for the kernel w^(-gamma), gamma < 2, with the
/// singular point at offset 0 and nodes at integer offsets m (units of the grid
/// spacing). A node's hat function is split into the half towards the
/// singularity (inner) and the half away from it (outer).
class SingularKernelWeights {
 public:
  SingularKernelWeights(double gamma, std::size_t max_offset)
      : gamma_(gamma), inner_(max_offset + 1, 0.0), outer_(max_offset + 1, 0.0) {
    if (!(gamma < 2.0) || gamma == 1.0) throw DomainError("SingularKernelWeights: need gamma < 2, gamma != 1");
    const double e1 = 1.0 - gamma;
    const double e2 = 2.0 - gamma;
    std::vector<double> p1(max_offset + 2), p2(max_offset + 2);
    for (std::size_t m = 0; m < p1.size(); ++m) {
      const double x = static_cast<double>(m);
      p1[m] = m == 0 ? (e1 > 0.0 ? 0.0 : INFINITY) : std::pow(x, e1);
      p2[m] = m == 0 ? 0.0 : std::pow(x, e2);
    }
    // P0(a,b) = int_a^b w^-gamma, P1(a,b) = int_a^b w^(1-gamma)
    auto mom0 = [&](std::size_t a) { return (p1[a + 1] - p1[a]) / e1; };
    auto mom1 = [&](std::size_t a) { return (p2[a + 1] - p2[a]) / e2; };
    for (std::size_t m = 1; m <= max_offset; ++m) {
      const double mm = static_cast<double>(m);
      inner_[m] = m == 1 ? mom1(0) : mom1(m - 1) - (mm - 1.0) * mom0(m - 1);
      outer_[m] = (mm + 1.0) * mom0(m) - mom1(m);
    }
    outer_[0] = gamma < 1.0 ? mom0(0) - mom1(0) : INFINITY;
  }

  double gamma() const noexcept { return gamma_; }
  /// Weight of a node with both hat halves inside the integration range.
  double interior(std::size_t m) const { return inner_[m] + outer_[m]; }
  /// Weight of the node at the far end of the range (only the inner half).
  double far_end(std::size_t m) const { return inner_[m]; }
  /// Weight of the node sitting on the singularity (finite only for gamma < 1).
  double origin() const { return outer_[0]; }

 private:
  double gamma_;
  std::vector<double> inner_;
  std::vector<double> outer_;
};

/// Grid values of a fractional derivative. The value at the singular endpoint
/// is NaN when the defining formula diverges there.
struct FractionalDerivative {
  GridFunction values;
  bool endpoint_singular = false;
};

/// Left-sided Riemann-Liouville derivative D^alpha_{a+} f at every grid node.
inline FractionalDerivative rl_left_derivative(const GridFunction& f, double alpha) {
  require_order(alpha, "rl_left_derivative");
  const std::size_t K = f.steps();
  const double h = f.spacing();
  const SingularKernelWeights w(alpha + 1.0, K);
  const double pre = 1.0 / std::tgamma(1.0 - alpha);
  const double scale = alpha * std::pow(h, -alpha);
  const auto& v = f.values;

  FractionalDerivative out{GridFunction(f.t0, f.t1, std::vector<double>(K + 1)), false};
  auto& d = out.values.values;
  if (v[0] == 0.0) {
    d[0] = 0.0;
  } else {
    d[0] = std::numeric_limits<double>::quiet_NaN();
    out.endpoint_singular = true;
  }
  for (std::size_t i = 1; i <= K; ++i) {
    double acc = (v[i] - v[0]) * w.far_end(i);
    for (std::size_t k = 1; k < i; ++k) acc += (v[i] - v[k]) * w.interior(i - k);
    d[i] = pre * (v[i] * std::pow(h * static_cast<double>(i), -alpha) + scale * acc);
  }
  return out;
}

/// Right-sided derivative D^{1-alpha}_{b-} of g_{b-}(x) = g(b) - g(x).
inline FractionalDerivative rl_right_derivative_gb(const GridFunction& g, double alpha) {
  require_order(alpha, "rl_right_derivative_gb");
  const std::size_t K = g.steps();
  const double h = g.spacing();
  const SingularKernelWeights w(2.0 - alpha, K);
  const double pre = 1.0 / std::tgamma(alpha);
  const double scale = (1.0 - alpha) * std::pow(h, alpha - 1.0);
  const auto& v = g.values;
  const double gb = v[K];

  FractionalDerivative out{GridFunction(g.t0, g.t1, std::vector<double>(K + 1)), false};
  auto& d = out.values.values;
  d[K] = 0.0;  // g_{b-}(b) = 0, so the limit exists
  for (std::size_t i = 0; i < K; ++i) {
    // g_{b-}(x) - g_{b-}(y) = g(y) - g(x)
    double acc = (v[K] - v[i]) * w.far_end(K - i);
    for (std::size_t k = i + 1; k < K; ++k) acc += (v[k] - v[i]) * w.interior(k - i);
    d[i] = pre * ((gb - v[i]) * std::pow(h * static_cast<double>(K - i), alpha - 1.0) + scale * acc);
  }
  return out;
}

/// Product-integration quadrature of int_a^b psi(x) (x-a)^(-alpha) dx for grid data psi.
inline double weighted_left_integral(std::span<const double> psi, double h, double alpha) {
  const std::size_t K = psi.size() - 1;
  const SingularKernelWeights w(alpha, K);
  double acc = psi[0] * w.origin() + psi[K] * w.far_end(K);
  for (std::size_t k = 1; k < K; ++k) acc += psi[k] * w.interior(k);
  return acc * std::pow(h, 1.0 - alpha);
}

inline double trapezoid(std::span<const double> v, double h) {
  if (v.size() < 2) return 0.0;
  double acc = 0.5 * (v.front() + v.back());
  for (std::size_t i = 1; i + 1 < v.size(); ++i) acc += v[i];
  return acc * h;
}

namespace detail {

inline void require_finite_interior(const GridFunction& g, const char* who) {
  for (std::size_t i = 1; i + 1 < g.values.size(); ++i)
    if (!std::isfinite(g.values[i]))
      throw NumericFailure(std::string(who) + ": non-finite fractional derivative at node " +
                           std::to_string(i));
}

}  // namespace detail

/// int_a^b f dg = int_a^b D^alpha_{a+} f(x) D^{1-alpha}_{b-} g_{b-}(x) dx.
///
/// The left derivative splits as f(a)(x-a)^(-alpha)/Gamma(1-alpha) plus the
/// derivative of f - f(a); the first part is integrated with exact weights
/// against the singular endpoint, so the singular endpoint value never enters.
/// Takes D^{1-alpha}_{b-} g_{b-} precomputed, for many f against one g.
inline double gls_integral(const GridFunction& f, const FractionalDerivative& dg, double alpha) {
  require_order(alpha, "gls_integral");
  if (!f.same_grid(dg.values)) throw DomainError("gls_integral: f and g must share a grid");
  const auto df = rl_left_derivative(f, alpha);
  detail::require_finite_interior(df.values, "gls_integral");
  detail::require_finite_interior(dg.values, "gls_integral");

  const std::size_t K = f.steps();
  const double h = f.spacing();
  const double fa = f.values[0];
  const double pre = 1.0 / std::tgamma(1.0 - alpha);
  const auto& dgv = dg.values.values;

  std::vector<double> regular(K + 1);
  regular[0] = 0.0;
  for (std::size_t i = 1; i <= K; ++i) {
    const double sing = fa * pre * std::pow(h * static_cast<double>(i), -alpha);
    regular[i] = (df.values.values[i] - sing) * dgv[i];
  }
  double total = trapezoid(regular, h);
  if (fa != 0.0) total += fa * pre * weighted_left_integral(dgv, h, alpha);
  return total;
}

inline double gls_integral(const GridFunction& f, const GridFunction& g, double alpha) {
  require_order(alpha, "gls_integral");
  if (!f.same_grid(g)) throw DomainError("gls_integral: f and g must share a grid");
  return gls_integral(f, rl_right_derivative_gb(g, alpha), alpha);
}

/// For every grid node i, the product-integration value of
/// int_{t0}^{t_i} D(i, s) (t_i - s)^(-alpha-1) ds, where dist(i, k) >= 0 gives
/// the nodal data D(i, t_k) and D(i, t_i) = 0.
template <class Dist>
std::vector<double> singular_increment_integrals(std::size_t steps, double h, double alpha, Dist&& dist) {
  const SingularKernelWeights w(alpha + 1.0, steps);
  const double scale = std::pow(h, -alpha);
  std::vector<double> out(steps + 1, 0.0);
  for (std::size_t i = 1; i <= steps; ++i) {
    double acc = dist(i, 0) * w.far_end(i);
    for (std::size_t k = 1; k < i; ++k) acc += dist(i, k) * w.interior(i - k);
    out[i] = acc * scale;
  }
  return out;
}

/// Running Hoelder-type seminorm ||g||_{alpha,0;t_k} for every grid node t_k,
/// taken over grid pairs u < v <= t_k. With stride > 1 only left points u on
/// the coarse lattice are scanned (a lower bound on the full scan).
inline std::vector<double> holder_seminorm_profile(const GridFunction& g, double alpha,
                                                   std::size_t stride = 1) {
  require_order(alpha, "holder_seminorm");
  if (stride == 0) stride = 1;
  const std::size_t K = g.steps();
  const double h = g.spacing();
  const SingularKernelWeights w(2.0 - alpha, K);
  const double scale = std::pow(h, alpha - 1.0);
  std::vector<double> lead(K + 1, 0.0), inter(K + 1, 0.0), far(K + 1, 0.0);
  for (std::size_t m = 1; m <= K; ++m) {
    lead[m] = std::pow(h * static_cast<double>(m), alpha - 1.0);
    inter[m] = scale * w.interior(m);
    far[m] = scale * w.far_end(m);
  }
  const auto& v = g.values;
  std::vector<double> best(K + 1, 0.0);
  for (std::size_t a = 0; a < K; a += stride) {
    const double ga = v[a];
    double running = 0.0;
    for (std::size_t b = a + 1; b <= K; ++b) {
      const std::size_t m = b - a;
      const double diff = std::abs(v[b] - ga);
      const double value = diff * (lead[m] + far[m]) + running;
      running += diff * inter[m];
      best[b] = std::max(best[b], value);
    }
  }
  for (std::size_t b = 1; b <= K; ++b) best[b] = std::max(best[b], best[b - 1]);
  return best;
}

inline std::size_t grid_index_at_or_below(const GridFunction& g, double t) {
  const double pos = (t - g.t0) / g.spacing();
  const auto idx = static_cast<std::size_t>(std::floor(pos + 1e-9));
  return std::min(idx, g.steps());
}

/// ||g||_{alpha,0;t}: sup over grid pairs t0 <= u < v <= t.
inline double holder_seminorm(const GridFunction& g, double alpha, double t) {
  if (!(t > g.t0)) throw DomainError("holder_seminorm: need t > t0");
  if (t > g.t1 + 1e-12 * (g.t1 - g.t0)) throw DomainError("holder_seminorm: t beyond grid");
  return holder_seminorm_profile(g, alpha)[grid_index_at_or_below(g, t)];
}

struct SeminormEstimate {
  double value = 0.0;
  double error_estimate = 0.0;  // |value(stride) - value(2 stride)|
  std::size_t stride = 1;
};

/// Stride-coarsened seminorm for long grids; the reported error estimate is the
/// change when the stride is doubled.
inline SeminormEstimate holder_seminorm_coarse(const GridFunction& g, double alpha, double t,
                                               std::size_t stride) {
  if (!(t > g.t0)) throw DomainError("holder_seminorm: need t > t0");
  const std::size_t idx = grid_index_at_or_below(g, t);
  const double fine = holder_seminorm_profile(g, alpha, stride)[idx];
  const double coarse = holder_seminorm_profile(g, alpha, 2 * stride)[idx];
  return {fine, std::abs(fine - coarse), stride};
}

/// ||u||_{alpha,2,T}^2 = sup_part + j_part.
struct BesovNorm {
  double norm = 0.0;
  double sup_part = 0.0;  // (sup_t ||u(t)||)^2
  double j_part = 0.0;    // int_0^T (int_0^t ||u(t)-u(s)|| (t-s)^(-alpha-1) ds)^2 dt
};

namespace detail {

inline void require_path(std::size_t points, double alpha, double horizon, const char* who) {
  require_order(alpha, who);
  if (points < 3) throw DomainError(std::string(who) + ": need at least 3 time points");
  if (!(horizon > 0.0)) throw DomainError(std::string(who) + ": need T > 0");
}

template <class Dist, class Mag>
BesovNorm besov_from(std::size_t points, double alpha, double horizon, Dist&& dist, Mag&& mag) {
  const std::size_t K = points - 1;
  const double h = horizon / static_cast<double>(K);
  double sup = 0.0;
  for (std::size_t i = 0; i <= K; ++i) sup = std::max(sup, mag(i));
  auto inner = singular_increment_integrals(K, h, alpha, dist);
  for (double& x : inner) x *= x;
  BesovNorm out;
  out.sup_part = sup * sup;
  out.j_part = trapezoid(inner, h);
  out.norm = std::sqrt(out.sup_part + out.j_part);
  return out;
}

template <class Dist, class Mag>
double alpha1_from(std::size_t points, double alpha, double horizon, Dist&& dist, Mag&& mag) {
  const std::size_t K = points - 1;
  const double h = horizon / static_cast<double>(K);
  std::vector<double> norms(K + 1);
  for (std::size_t i = 0; i <= K; ++i) norms[i] = mag(i);
  const auto inner = singular_increment_integrals(K, h, alpha, dist);
  return weighted_left_integral(norms, h, alpha) + trapezoid(inner, h);
}

}  // namespace detail

/// Besov-type norm of a path on a uniform grid over [0, T]; stride > 1
/// evaluates it on every stride-th time point.
inline BesovNorm besov_norm_path(std::span<const FieldVector> path, double alpha, double horizon,
                                 std::size_t stride = 1) {
  if (stride == 0) stride = 1;
  if (path.empty() || (path.size() - 1) % stride != 0)
    throw DomainError("besov_norm_path: stride must divide the number of intervals");
  const std::size_t points = (path.size() - 1) / stride + 1;
  detail::require_path(points, alpha, horizon, "besov_norm_path");
  return detail::besov_from(
      points, alpha, horizon,
      [&](std::size_t i, std::size_t k) { return distance(path[i * stride], path[k * stride]); },
      [&](std::size_t i) { return path[i * stride].norm(); });
}

/// Same norm for a scalar path.
inline BesovNorm besov_norm_path(const GridFunction& u, double alpha) {
  detail::require_path(u.values.size(), alpha, u.t1 - u.t0, "besov_norm_path");
  const auto& v = u.values;
  return detail::besov_from(
      v.size(), alpha, u.t1 - u.t0, [&](std::size_t i, std::size_t k) { return std::abs(v[i] - v[k]); },
      [&](std::size_t i) { return std::abs(v[i]); });
}

/// ||u||_{alpha,1,T} = int_0^T (||u(t)|| t^-alpha + int_0^t ||u(t)-u(s)|| (t-s)^(-alpha-1) ds) dt.
inline double alpha1_norm(std::span<const FieldVector> path, double alpha, double horizon) {
  detail::require_path(path.size(), alpha, horizon, "alpha1_norm");
  return detail::alpha1_from(
      path.size(), alpha, horizon,
      [&](std::size_t i, std::size_t k) { return distance(path[i], path[k]); },
      [&](std::size_t i) { return path[i].norm(); });
}

inline double alpha1_norm(const GridFunction& u, double alpha) {
  detail::require_path(u.values.size(), alpha, u.t1 - u.t0, "alpha1_norm");
  const auto& v = u.values;
  return detail::alpha1_from(
      v.size(), alpha, u.t1 - u.t0, [&](std::size_t i, std::size_t k) { return std::abs(v[i] - v[k]); },
      [&](std::size_t i) { return std::abs(v[i]); });
}

/// C_alpha = 1 / (Gamma(alpha) Gamma(1 - alpha)) = sin(pi alpha) / pi.
inline double young_constant(double alpha) { return std::sin(std::numbers::pi * alpha) / std::numbers::pi; }

/// Right-hand side of the Young-type bound |int f dg| <= C_alpha ||g||_{alpha,0;b} ||f||_{alpha,1}.
inline double young_bound(const GridFunction& f, const GridFunction& g, double alpha) {
  if (!f.same_grid(g)) throw DomainError("young_bound: f and g must share a grid");
  return young_constant(alpha) * holder_seminorm(g, alpha, g.t1) * alpha1_norm(f, alpha);
}

}  // namespace mildheat
