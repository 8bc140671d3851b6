#pragma once

// Spatial discretization on D = (0,1) with Neumann boundary: the cosine
// eigenbasis, the diagonal evolution family and the spectral Green's function.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mildheat/errors.hpp"

namespace mildheat {

/// Coordinates of an element of L^2(0,1) in the cosine basis.
struct FieldVector {
  std::vector<double> coeffs;

  FieldVector() = default;
  explicit FieldVector(std::size_t modes) : coeffs(modes, 0.0) {}
  explicit FieldVector(std::vector<double> c) : coeffs(std::move(c)) {}

  static FieldVector unit(std::size_t modes, std::size_t j, double value = 1.0) {
    FieldVector v(modes);
    v.coeffs.at(j) = value;
    return v;
  }

  std::size_t size() const noexcept { return coeffs.size(); }
  double& operator[](std::size_t j) { return coeffs[j]; }
  double operator[](std::size_t j) const { return coeffs[j]; }

  /// L^2(D) norm; equals the Euclidean norm of the coefficients (Parseval).
  double norm() const {
    double s = 0.0;
    for (double c : coeffs) s += c * c;
    return std::sqrt(s);
  }

  bool operator==(const FieldVector&) const = default;
};

inline double distance(const FieldVector& a, const FieldVector& b) {
  if (a.size() != b.size()) throw DomainError("distance: dimension mismatch");
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return std::sqrt(s);
}

/// Orthonormal Neumann eigenbasis phi_0 = 1, phi_j = sqrt(2) cos(pi j x).
class CosineBasis {
 public:
  explicit CosineBasis(std::size_t modes) : rates_(modes) {
    if (modes == 0) throw DomainError("CosineBasis: mode count M must be >= 1");
    for (std::size_t j = 0; j < modes; ++j) {
      const double pj = std::numbers::pi * static_cast<double>(j);
      rates_[j] = pj * pj;
    }
  }

  std::size_t size() const noexcept { return rates_.size(); }

  /// Eigen-rate nu_j = pi^2 j^2 (per unit diffusivity).
  double rate(std::size_t j) const { return rates_.at(j); }
  std::span<const double> rates() const noexcept { return rates_; }

  double eval(std::size_t j, double x) const {
    if (j == 0) return 1.0;
    return std::numbers::sqrt2 * std::cos(std::numbers::pi * static_cast<double>(j) * x);
  }

  double sup_norm(std::size_t j) const { return j == 0 ? 1.0 : std::numbers::sqrt2; }

  /// Reconstructs sum_j v_j phi_j(x).
  double evaluate(const FieldVector& v, double x) const {
    if (v.size() > size()) throw DomainError("CosineBasis::evaluate: vector larger than basis");
    double s = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) s += v[j] * eval(j, x);
    return s;
  }

 private:
  std::vector<double> rates_;
};

inline CosineBasis build_basis(std::size_t modes) { return CosineBasis(modes); }

/// Scalar time-dependent diffusivity kappa(t) > 0.
class Diffusivity {
 public:
  static Diffusivity constant(double k0) {
    return Diffusivity("constant", {k0}, [k0](double) { return k0; });
  }
  /// k0 + k1 t
  static Diffusivity affine(double k0, double k1) {
    return Diffusivity("affine", {k0, k1}, [k0, k1](double t) { return k0 + k1 * t; });
  }
  /// k0 (1 + amp sin(2 pi freq t))
  static Diffusivity oscillating(double k0, double amp, double freq) {
    return Diffusivity("oscillating", {k0, amp, freq}, [k0, amp, freq](double t) {
      return k0 * (1.0 + amp * std::sin(2.0 * std::numbers::pi * freq * t));
    });
  }
  static Diffusivity custom(std::function<double(double)> fn, std::string label = "custom") {
    return Diffusivity(std::move(label), {}, std::move(fn));
  }

  static Diffusivity from_kind(const std::string& kind, const std::vector<double>& p) {
    auto need = [&](std::size_t n) {
      if (p.size() != n)
        throw DomainError("diffusivity '" + kind + "' expects " + std::to_string(n) + " parameters");
    };
    if (kind == "constant") { need(1); return constant(p[0]); }
    if (kind == "affine") { need(2); return affine(p[0], p[1]); }
    if (kind == "oscillating") { need(3); return oscillating(p[0], p[1], p[2]); }
    throw DomainError("unknown diffusivity kind '" + kind + "'");
  }

  double operator()(double t) const { return fn_(t); }
  const std::string& kind() const noexcept { return kind_; }
  const std::vector<double>& params() const noexcept { return params_; }

  /// int_s^t kappa(u) du by composite Simpson with an even number of panels,
  /// at least `panels` and at least `density` per unit time.
  double integral(double s, double t, std::size_t panels = 64, double density = 4096.0) const {
    if (s > t) throw DomainError("Diffusivity::integral: s > t");
    if (s == t) return 0.0;
    panels = std::max<std::size_t>({panels, 2, static_cast<std::size_t>(std::ceil((t - s) * density))});
    if (panels % 2 != 0) ++panels;
    const double h = (t - s) / static_cast<double>(panels);
    double acc = 0.0;
    for (std::size_t i = 0; i <= panels; ++i) {
      const double k = checked(s + h * static_cast<double>(i));
      const double w = (i == 0 || i == panels) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
      acc += w * k;
    }
    return acc * h / 3.0;
  }

 private:
  Diffusivity(std::string kind, std::vector<double> params, std::function<double(double)> fn)
      : kind_(std::move(kind)), params_(std::move(params)), fn_(std::move(fn)) {}

  double checked(double u) const {
    const double k = fn_(u);
    if (!(k > 0.0) || !std::isfinite(k))
      throw DomainError("diffusivity must be positive (parabolicity); kappa(" + std::to_string(u) +
                        ") = " + std::to_string(k));
    return k;
  }

  std::string kind_;
  std::vector<double> params_;
  std::function<double(double)> fn_;
};

/// Cumulative diffusion time K(0, t_k) on a uniform grid, one Simpson panel pair per step.
class DiffusionClock {
 public:
  DiffusionClock(const Diffusivity& kappa, double horizon, std::size_t steps)
      : horizon_(horizon), cumulative_(steps + 1, 0.0) {
    if (steps == 0 || !(horizon > 0.0)) throw DomainError("DiffusionClock: need steps >= 1 and T > 0");
    const double dt = horizon / static_cast<double>(steps);
    for (std::size_t k = 0; k < steps; ++k) {
      const double a = dt * static_cast<double>(k);
      cumulative_[k + 1] = cumulative_[k] + kappa.integral(a, a + dt, 2, 0.0);
    }
  }

  std::size_t steps() const noexcept { return cumulative_.size() - 1; }
  double horizon() const noexcept { return horizon_; }
  double time(std::size_t k) const {
    return horizon_ * static_cast<double>(k) / static_cast<double>(steps());
  }
  /// K(t_a, t_b) for a <= b.
  double between(std::size_t a, std::size_t b) const { return cumulative_.at(b) - cumulative_.at(a); }

 private:
  double horizon_;
  std::vector<double> cumulative_;
};

/// Diagonal representation of U(t,s): factors_j = exp(-nu_j K(s,t)).
struct Propagator {
  double s = 0.0;
  double t = 0.0;
  std::vector<double> factors;
};

inline Propagator propagator_from_diffusion(double s, double t, double diffusion,
                                            const CosineBasis& basis) {
  if (s > t) throw DomainError("make_propagator: s > t");
  if (diffusion < 0.0) throw DomainError("make_propagator: negative diffusion time");
  Propagator p{s, t, std::vector<double>(basis.size())};
  for (std::size_t j = 0; j < basis.size(); ++j)
    p.factors[j] = j == 0 ? 1.0 : std::exp(-basis.rate(j) * diffusion);
  return p;
}

inline Propagator make_propagator(double s, double t, const Diffusivity& kappa,
                                  const CosineBasis& basis, std::size_t panels = 64) {
  if (s < 0.0 || s > t) throw DomainError("make_propagator: need 0 <= s <= t");
  return propagator_from_diffusion(s, t, kappa.integral(s, t, panels), basis);
}

inline FieldVector apply_propagator(const Propagator& p, const FieldVector& v) {
  if (v.size() != p.factors.size()) throw DomainError("apply_propagator: dimension mismatch");
  FieldVector out(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) out[j] = p.factors[j] * v[j];
  return out;
}

/// Upper bound for sum_{j >= M} 2 exp(-pi^2 j^2 K), the mode-truncation error of G.
inline double green_tail_bound(std::size_t modes, double diffusion) {
  const double m = static_cast<double>(modes);
  const double lead = 2.0 * std::exp(-std::numbers::pi * std::numbers::pi * m * m * diffusion);
  const double ratio = std::exp(-std::numbers::pi * std::numbers::pi * (2.0 * m + 1.0) * diffusion);
  return ratio < 1.0 ? lead / (1.0 - ratio) : INFINITY;
}

/// sum_j exp(-nu_j K) phi_j(x) phi_j(y) for a given diffusion time K = K(s,t) > 0.
inline double green_from_diffusion(double x, double y, double diffusion, const CosineBasis& basis,
                                   double tail_tolerance = 1e-10) {
  if (!(diffusion > 0.0)) throw DomainError("green_eval: kernel is singular at coincident times");
  if (x < 0.0 || x > 1.0 || y < 0.0 || y > 1.0) throw DomainError("green_eval: x, y must lie in [0,1]");
  if (green_tail_bound(basis.size(), diffusion) > tail_tolerance)
    throw DomainError("green_eval: truncation M too small for this time lag");
  double s = 1.0;
  for (std::size_t j = 1; j < basis.size(); ++j) {
    const double decay = std::exp(-basis.rate(j) * diffusion);
    // Product of the two basis functions, kept symmetric in (x, y).
    s += decay * (basis.eval(j, x) * basis.eval(j, y));
  }
  return s;
}

inline double green_eval(double x, double y, double s, double t, const Diffusivity& kappa,
                         const CosineBasis& basis, std::size_t panels = 64,
                         double tail_tolerance = 1e-10) {
  if (!(s < t)) throw DomainError("green_eval: need s < t");
  return green_from_diffusion(x, y, kappa.integral(s, t, panels), basis, tail_tolerance);
}

}  // namespace mildheat
