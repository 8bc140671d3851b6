#pragma once

// Exponential Euler discretization of the mild equation on the cosine basis,
// the smoothed-noise variant (mollified fBm as a random drift), and a direct
// recomputation of the four convolution terms of the mild identity.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mildheat/errors.hpp"
#include "mildheat/fractional_calculus.hpp"
#include "mildheat/noise_fields.hpp"
#include "mildheat/spectral_domain.hpp"

namespace mildheat {

enum class ScalarFamily { zero, constant, linear, sine, tanh, clipped_poly };

/// Lipschitz scalar coefficient from a registered family, with a certified
/// Lipschitz constant.
class ScalarCoefficient {
 public:
  ScalarCoefficient() = default;

  static ScalarCoefficient zero() { return {ScalarFamily::zero, {}}; }
  static ScalarCoefficient constant(double c) { return {ScalarFamily::constant, {c}}; }
  /// a u + b
  static ScalarCoefficient linear(double a, double b = 0.0) { return {ScalarFamily::linear, {a, b}}; }
  /// amp sin(freq u + phase)
  static ScalarCoefficient sine(double amp, double freq = 1.0, double phase = 0.0) {
    return {ScalarFamily::sine, {amp, freq, phase}};
  }
  /// amp tanh(scale u)
  static ScalarCoefficient tanh(double amp, double scale = 1.0) { return {ScalarFamily::tanh, {amp, scale}}; }
  /// sum_k c_k clip(u)^k with clip(u) = max(-r, min(r, u)); params = {r, c_0, c_1, ...}
  static ScalarCoefficient clipped_polynomial(double radius, const std::vector<double>& coeffs) {
    if (!(radius > 0.0)) throw DomainError("clipped polynomial: clip radius must be positive");
    std::vector<double> p{radius};
    p.insert(p.end(), coeffs.begin(), coeffs.end());
    return {ScalarFamily::clipped_poly, std::move(p)};
  }

  static ScalarCoefficient from_kind(const std::string& kind, const std::vector<double>& p) {
    auto need = [&](std::size_t lo, std::size_t hi) {
      if (p.size() < lo || p.size() > hi)
        throw DomainError("coefficient '" + kind + "' has wrong parameter count");
    };
    if (kind == "zero") { need(0, 0); return zero(); }
    if (kind == "constant") { need(1, 1); return constant(p[0]); }
    if (kind == "linear") { need(1, 2); return linear(p[0], p.size() > 1 ? p[1] : 0.0); }
    if (kind == "sine") { need(1, 3); return sine(p[0], p.size() > 1 ? p[1] : 1.0, p.size() > 2 ? p[2] : 0.0); }
    if (kind == "tanh") { need(1, 2); return tanh(p[0], p.size() > 1 ? p[1] : 1.0); }
    if (kind == "clipped_poly") {
      need(2, 64);
      return clipped_polynomial(p[0], std::vector<double>(p.begin() + 1, p.end()));
    }
    throw DomainError("unknown coefficient family '" + kind + "'");
  }

  ScalarFamily family() const noexcept { return family_; }
  const std::vector<double>& params() const noexcept { return params_; }
  bool is_zero() const noexcept {
    if (family_ == ScalarFamily::zero) return true;
    if (family_ == ScalarFamily::constant) return params_[0] == 0.0;
    if (family_ == ScalarFamily::linear) return params_[0] == 0.0 && params_[1] == 0.0;
    if (family_ == ScalarFamily::sine || family_ == ScalarFamily::tanh) return params_[0] == 0.0;
    return std::all_of(params_.begin() + 1, params_.end(), [](double c) { return c == 0.0; });
  }

  std::string name() const {
    switch (family_) {
      case ScalarFamily::zero: return "zero";
      case ScalarFamily::constant: return "constant";
      case ScalarFamily::linear: return "linear";
      case ScalarFamily::sine: return "sine";
      case ScalarFamily::tanh: return "tanh";
      case ScalarFamily::clipped_poly: return "clipped_poly";
    }
    return "zero";
  }

  double operator()(double u) const {
    switch (family_) {
      case ScalarFamily::zero: return 0.0;
      case ScalarFamily::constant: return params_[0];
      case ScalarFamily::linear: return params_[0] * u + params_[1];
      case ScalarFamily::sine: return params_[0] * std::sin(params_[1] * u + params_[2]);
      case ScalarFamily::tanh: return params_[0] * std::tanh(params_[1] * u);
      case ScalarFamily::clipped_poly: {
        const double r = params_[0];
        const double x = std::clamp(u, -r, r);
        double acc = 0.0;
        for (std::size_t k = params_.size() - 1; k >= 1; --k) acc = acc * x + params_[k];
        return acc;
      }
    }
    return 0.0;
  }

  double lipschitz() const {
    switch (family_) {
      case ScalarFamily::zero:
      case ScalarFamily::constant: return 0.0;
      case ScalarFamily::linear: return std::abs(params_[0]);
      case ScalarFamily::sine:
      case ScalarFamily::tanh: return std::abs(params_[0] * params_[1]);
      case ScalarFamily::clipped_poly: {
        // sup_{|x| <= r} |p'(x)| <= sum_k k |c_k| r^(k-1)
        const double r = params_[0];
        double acc = 0.0;
        for (std::size_t k = 2; k < params_.size(); ++k)
          acc += static_cast<double>(k - 1) * std::abs(params_[k]) * std::pow(r, static_cast<double>(k - 2));
        return acc;
      }
    }
    return 0.0;
  }

  bool operator==(const ScalarCoefficient&) const = default;

 private:
  ScalarCoefficient(ScalarFamily f, std::vector<double> p) : family_(f), params_(std::move(p)) {}

  ScalarFamily family_ = ScalarFamily::zero;
  std::vector<double> params_;
};

/// h(u) = slope u + offset.
struct AffineCoefficient {
  double slope = 0.0;
  double offset = 0.0;

  double operator()(double u) const { return slope * u + offset; }
  bool is_zero() const { return slope == 0.0 && offset == 0.0; }
  bool operator==(const AffineCoefficient&) const = default;
};

struct ProblemSpec {
  ScalarCoefficient f;
  ScalarCoefficient g;
  AffineCoefficient h;
  FieldVector initial;  // phi; its size fixes the basis size M
  Diffusivity diffusivity = Diffusivity::constant(1.0);
  HolderExponent exponent;
  double horizon = 1.0;
  QSpec qspec;

  std::size_t modes() const noexcept { return initial.size(); }

  /// Rejects parameters outside the existence range; diagnostic mode only
  /// requires alpha in (0,1) and H in (1/2,1).
  void validate(bool diagnostic = false) const {
    if (initial.size() == 0) throw DomainError("ProblemSpec: initial condition must have M >= 1 modes");
    for (double c : initial.coeffs)
      if (!std::isfinite(c)) throw DomainError("ProblemSpec: initial condition must be finite");
    if (!(horizon > 0.0)) throw DomainError("ProblemSpec: horizon T must be positive");
    qspec.validate();
    if (qspec.modes() > modes()) throw DomainError("ProblemSpec: noise modes J exceed basis size M");
    const double H = exponent.hurst, a = exponent.alpha;
    if (diagnostic) {
      if (!(H > 0.5 && H < 1.0)) throw DomainError("ProblemSpec: H must lie in (1/2, 1)");
      require_order(a, "ProblemSpec");
      return;
    }
    if (!(H > 2.0 / 3.0 && H < 1.0))
      throw DomainError("ProblemSpec: H must lie in ((d+1)/(d+2), 1) = (2/3, 1); no admissible alpha otherwise");
    if (!HolderExponent::admissible(a, H)) throw DomainError("ProblemSpec: alpha must lie in (1 - H, 1/3)");
  }
};

/// Midpoint collocation with Q = 2M nodes. The midpoint rule integrates
/// cos(pi k x) exactly for k < 2Q, so products of two M-mode fields are
/// projected back without aliasing.
class Collocation {
 public:
  explicit Collocation(const CosineBasis& basis)
      : modes_(basis.size()), points_(2 * basis.size()), eval_(points_ * modes_), proj_(modes_ * points_) {
    for (std::size_t i = 0; i < points_; ++i) {
      const double x = (static_cast<double>(i) + 0.5) / static_cast<double>(points_);
      for (std::size_t j = 0; j < modes_; ++j) {
        const double e = basis.eval(j, x);
        eval_[i * modes_ + j] = e;
        proj_[j * points_ + i] = e / static_cast<double>(points_);
      }
    }
  }

  std::size_t modes() const noexcept { return modes_; }
  std::size_t points() const noexcept { return points_; }
  double basis_at(std::size_t i, std::size_t j) const { return eval_[i * modes_ + j]; }

  /// Values at the nodes of the field whose first c.size() coefficients are c.
  void to_points(std::span<const double> c, std::span<double> out) const {
    const std::size_t J = std::min(c.size(), modes_);
    for (std::size_t i = 0; i < points_; ++i) {
      const double* row = &eval_[i * modes_];
      double s = 0.0;
      for (std::size_t j = 0; j < J; ++j) s += row[j] * c[j];
      out[i] = s;
    }
  }

  void to_coeffs(std::span<const double> pts, std::span<double> out) const {
    for (std::size_t j = 0; j < modes_; ++j) {
      const double* row = &proj_[j * points_];
      double s = 0.0;
      for (std::size_t i = 0; i < points_; ++i) s += row[i] * pts[i];
      out[j] = s;
    }
  }

 private:
  std::size_t modes_;
  std::size_t points_;
  std::vector<double> eval_;
  std::vector<double> proj_;
};

/// Pointwise composition c(v(x)) projected onto the basis.
inline FieldVector nonlinear_apply(const ScalarCoefficient& c, const FieldVector& v, const Collocation& col) {
  if (v.size() != col.modes()) throw DomainError("nonlinear_apply: dimension mismatch");
  FieldVector out(v.size());
  if (c.is_zero()) return out;
  std::vector<double> pts(col.points());
  col.to_points(v.coeffs, pts);
  for (double& p : pts) p = c(p);
  col.to_coeffs(pts, out.coeffs);
  return out;
}

/// Affine coefficients act exactly in coefficient space: h1 v + h0 e_0.
inline FieldVector nonlinear_apply(const AffineCoefficient& h, const FieldVector& v) {
  FieldVector out(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) out[j] = h.slope * v[j];
  if (!out.coeffs.empty()) out[0] += h.offset;
  return out;
}

/// Galerkin projection of the pointwise product a(x) b(x).
inline FieldVector multiply(const FieldVector& a, const FieldVector& b, const Collocation& col) {
  std::vector<double> pa(col.points()), pb(col.points());
  col.to_points(a.coeffs, pa);
  col.to_points(b.coeffs, pb);
  for (std::size_t i = 0; i < pa.size(); ++i) pa[i] *= pb[i];
  FieldVector out(col.modes());
  col.to_coeffs(pa, out.coeffs);
  return out;
}

enum class WienerWeighting {
  /// Wiener input of mode m scaled by sqrt((1 - e^{-2x})/(2x)), x = nu_m K(t_k, t_{k+1}):
  /// the exact one-step variance of the stochastic convolution.
  variance_matched,
  /// Wiener input multiplied by the end-of-step propagator like every other term.
  left_point,
};

inline std::string to_string(WienerWeighting w) {
  return w == WienerWeighting::variance_matched ? "variance_matched" : "left_point";
}

struct SolverOptions {
  WienerWeighting wiener_weighting = WienerWeighting::variance_matched;
  std::size_t besov_stride = 1;
  double blowup_threshold = 1e8;
};

/// Noise input of one step. Each span holds weighted mode coefficients; empty
/// spans are skipped.
struct StepNoise {
  std::span<const double> wiener;    // Delta W
  std::span<const double> fbm;       // Delta W^H (raw increments)
  std::span<const double> fbm_rate;  // d/ds W^{H,N,n}(t_k) (mollified, used as a drift)
};

/// u_{k+1} = U(t_{k+1}, t_k)[u_k + f(u_k) dt + h(u_k) dW^H] + S (g(u_k) dW),
/// with S = U(t_{k+1}, t_k) for left-point weighting.
class ExponentialEuler {
 public:
  ExponentialEuler(const ProblemSpec& spec, std::size_t steps, SolverOptions options = {})
      : spec_(spec),
        basis_(spec.modes()),
        col_(basis_),
        clock_(spec.diffusivity, spec.horizon, steps),
        options_(options),
        up_(col_.points()),
        acc_(col_.points()),
        tmp_(col_.points()),
        noise_pts_(col_.points()),
        drift_(col_.modes()),
        shock_(col_.modes()) {}

  std::size_t steps() const noexcept { return clock_.steps(); }
  double dt() const noexcept { return spec_.horizon / static_cast<double>(steps()); }
  const CosineBasis& basis() const noexcept { return basis_; }
  const Collocation& collocation() const noexcept { return col_; }
  const DiffusionClock& clock() const noexcept { return clock_; }

  FieldVector step(const FieldVector& u, std::size_t k, const StepNoise& noise) {
    const std::size_t M = basis_.size();
    if (u.size() != M) throw DomainError("step_exponential_euler: state dimension mismatch");
    if (k >= steps()) throw DomainError("step_exponential_euler: step index beyond the grid");
    const double dt = this->dt();
    col_.to_points(u.coeffs, up_);
    std::fill(acc_.begin(), acc_.end(), 0.0);
    bool have_drift = false;
    if (!spec_.f.is_zero()) {
      for (std::size_t i = 0; i < up_.size(); ++i) acc_[i] += spec_.f(up_[i]) * dt;
      have_drift = true;
    }
    if (!spec_.h.is_zero()) {
      if (!noise.fbm.empty()) {
        col_.to_points(noise.fbm, tmp_);
        for (std::size_t i = 0; i < up_.size(); ++i) acc_[i] += spec_.h(up_[i]) * tmp_[i];
        have_drift = true;
      }
      if (!noise.fbm_rate.empty()) {
        col_.to_points(noise.fbm_rate, tmp_);
        for (std::size_t i = 0; i < up_.size(); ++i) acc_[i] += spec_.h(up_[i]) * tmp_[i] * dt;
        have_drift = true;
      }
    }
    if (have_drift) col_.to_coeffs(acc_, drift_);
    else std::fill(drift_.begin(), drift_.end(), 0.0);

    const bool have_shock = !spec_.g.is_zero() && !noise.wiener.empty();
    if (have_shock) {
      col_.to_points(noise.wiener, noise_pts_);
      for (std::size_t i = 0; i < up_.size(); ++i) noise_pts_[i] *= spec_.g(up_[i]);
      col_.to_coeffs(noise_pts_, shock_);
    }

    const double dk = clock_.between(k, k + 1);
    FieldVector out(M);
    double norm2 = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
      const double x = basis_.rate(m) * dk;
      const double decay = m == 0 ? 1.0 : std::exp(-x);
      double v = decay * (u[m] + drift_[m]);
      if (have_shock) {
        double weight = decay;
        if (options_.wiener_weighting == WienerWeighting::variance_matched)
          weight = x > 0.0 ? std::sqrt(-std::expm1(-2.0 * x) / (2.0 * x)) : 1.0;
        v += weight * shock_[m];
      }
      out[m] = v;
      norm2 += v * v;
    }
    if (!std::isfinite(norm2) || std::sqrt(norm2) > options_.blowup_threshold)
      throw NumericFailure("solver blow-up guard tripped at step " + std::to_string(k + 1), k + 1);
    return out;
  }

 private:
  ProblemSpec spec_;
  CosineBasis basis_;
  Collocation col_;
  DiffusionClock clock_;
  SolverOptions options_;
  std::vector<double> up_, acc_, tmp_, noise_pts_, drift_, shock_;
};

inline FieldVector step_exponential_euler(ExponentialEuler& scheme, const FieldVector& state, std::size_t k,
                                          const StepNoise& noise) {
  return scheme.step(state, k, noise);
}

struct SolutionMetadata {
  std::string scheme = "exponential_euler";
  std::string wiener_weighting = "variance_matched";
  double dt = 0.0;
  std::size_t modes = 0;
  std::size_t noise_modes = 0;
  std::uint64_t seed = 0;
  std::optional<std::size_t> rate;   // n, smoothed runs only
  std::optional<double> level;       // N
  std::optional<double> stop_time;   // tau_N

  bool operator==(const SolutionMetadata&) const = default;
};

struct SolutionPath {
  std::vector<double> times;
  std::vector<FieldVector> states;
  BesovNorm ledger;
  SolutionMetadata meta;

  const FieldVector& final_state() const { return states.back(); }
};

namespace detail {

inline std::size_t checked_steps(const ProblemSpec& spec, const NoiseRealization& noise, double dt) {
  if (!(dt > 0.0)) throw DomainError("solver: time step must be positive");
  const double ratio = spec.horizon / dt;
  const auto K = static_cast<std::size_t>(std::llround(ratio));
  if (K < 2 || std::abs(ratio - static_cast<double>(K)) > 1e-9 * ratio)
    throw DomainError("solver: T / dt must be an integer >= 2");
  auto check = [&](const FieldPath& f, const char* name) {
    if (f.size() == 0) return;
    if (f.steps() != K || std::abs(f.horizon() - spec.horizon) > 1e-12 * spec.horizon)
      throw DomainError(std::string("solver: ") + name + " field grid incompatible with T/dt");
    if (f.size() > spec.modes()) throw DomainError("solver: noise modes J exceed basis size M");
  };
  check(noise.wiener, "Wiener");
  check(noise.fbm, "fBm");
  return K;
}

inline void finish(SolutionPath& sol, const ProblemSpec& spec, const SolverOptions& opt) {
  sol.ledger = besov_norm_path(sol.states, spec.exponent.alpha, spec.horizon, opt.besov_stride);
  if (!std::isfinite(sol.ledger.norm)) throw NumericFailure("solver: Besov ledger is not finite");
}

template <class RateFn>
SolutionPath integrate(const ProblemSpec& spec, const NoiseRealization& noise, std::size_t K,
                       const SolverOptions& opt, bool raw_fbm, RateFn&& rate) {
  ExponentialEuler scheme(spec, K, opt);
  SolutionPath sol;
  sol.times.resize(K + 1);
  for (std::size_t k = 0; k <= K; ++k) sol.times[k] = scheme.clock().time(k);
  sol.states.reserve(K + 1);
  sol.states.push_back(spec.initial);
  std::vector<double> dw(noise.wiener.size()), dwh(noise.fbm.size());
  for (std::size_t k = 0; k < K; ++k) {
    noise.wiener.increment(k, dw);
    StepNoise sn{dw, {}, {}};
    if (raw_fbm) {
      noise.fbm.increment(k, dwh);
      sn.fbm = dwh;
    } else {
      sn.fbm_rate = rate(k);
    }
    sol.states.push_back(scheme.step(sol.states.back(), k, sn));
  }
  sol.meta.dt = scheme.dt();
  sol.meta.modes = spec.modes();
  sol.meta.noise_modes = std::max(noise.wiener.size(), noise.fbm.size());
  sol.meta.seed = noise.seed;
  sol.meta.wiener_weighting = to_string(opt.wiener_weighting);
  return sol;
}

}  // namespace detail

/// Exponential Euler for the mild equation with raw fBm increments.
inline SolutionPath solve_mild(const ProblemSpec& spec, const NoiseRealization& noise, double dt,
                               SolverOptions opt = {}, bool diagnostic = false) {
  spec.validate(diagnostic);
  const std::size_t K = detail::checked_steps(spec, noise, dt);
  auto sol = detail::integrate(spec, noise, K, opt, true, [](std::size_t) { return std::span<const double>{}; });
  detail::finish(sol, spec, opt);
  return sol;
}

/// Smoothed equation: the fBm field, stopped at tau_N, is mollified at rate n
/// and the h-term enters as the drift h(u) sum_j mu_j^(1/2) e_j d/ds B^{H,N,n}_j.
inline SolutionPath solve_smoothed(const ProblemSpec& spec, const NoiseRealization& noise,
                                   const StoppedField& stopped, std::size_t rate, double dt,
                                   SolverOptions opt = {}, bool diagnostic = false) {
  spec.validate(diagnostic);
  const std::size_t K = detail::checked_steps(spec, noise, dt);
  if (!(stopped.level >= 1.0)) throw DomainError("solve_smoothed: stopping level N must be >= 1");
  const auto& field = stopped.field;
  if (field.size() != noise.fbm.size() || (field.size() > 0 && field.steps() != K))
    throw DomainError("solve_smoothed: stopped field does not match the noise grid");
  const std::size_t J = field.size();
  std::vector<double> rates((K + 1) * J, 0.0);
  for (std::size_t j = 0; j < J; ++j) {
    if (field.weights[j] == 0.0) continue;
    const auto moll = mollify(field.modes[j], rate);
    for (std::size_t k = 0; k <= K; ++k) rates[k * J + j] = field.weights[j] * moll.derivative.values[k];
  }
  auto sol = detail::integrate(spec, noise, K, opt, false, [&](std::size_t k) {
    return std::span<const double>(rates.data() + k * J, J);
  });
  sol.meta.scheme = "exponential_euler_smoothed";
  sol.meta.rate = rate;
  sol.meta.level = stopped.level;
  sol.meta.stop_time = stopped.tau.time;
  detail::finish(sol, spec, opt);
  return sol;
}

inline SolutionPath solve_smoothed(const ProblemSpec& spec, const NoiseRealization& noise, std::size_t rate,
                                   double level, double dt, SolverOptions opt = {}, bool diagnostic = false) {
  if (!(level >= 1.0)) throw DomainError("solve_smoothed: stopping level N must be >= 1");
  spec.validate(diagnostic);
  const auto stopped = stop_at_level(noise.fbm, spec.exponent.alpha, level, diagnostic);
  return solve_smoothed(spec, noise, stopped, rate, dt, opt, diagnostic);
}

/// Convolution terms of the mild identity at the final time.
struct MildTerms {
  FieldVector initial;   // I_0 = U(T,0) phi
  FieldVector drift;     // I_f
  FieldVector wiener;    // I_g (Ito sums with left-point increments)
  FieldVector fbm;       // I_h (mode-wise generalized Lebesgue-Stieltjes integrals)
  double residual = 0.0; // || u(T) - I_0 - I_f - I_g - I_h ||
};

inline MildTerms mild_terms(const SolutionPath& sol, const ProblemSpec& spec, const NoiseRealization& noise) {
  const std::size_t K = sol.states.size() - 1;
  if (K < 2) throw DomainError("mild_terms: solution too short");
  if ((noise.wiener.size() > 0 && noise.wiener.steps() != K) || (noise.fbm.size() > 0 && noise.fbm.steps() != K))
    throw DomainError("mild_terms: solution and noise grids differ");
  const std::size_t M = spec.modes();
  const CosineBasis basis(M);
  const Collocation col(basis);
  const DiffusionClock clock(spec.diffusivity, spec.horizon, K);
  const double dt = spec.horizon / static_cast<double>(K);
  auto to_final = [&](std::size_t k, std::size_t m) {
    return m == 0 ? 1.0 : std::exp(-basis.rate(m) * clock.between(k, K));
  };

  MildTerms out{FieldVector(M), FieldVector(M), FieldVector(M), FieldVector(M), 0.0};
  for (std::size_t m = 0; m < M; ++m) out.initial[m] = to_final(0, m) * spec.initial[m];

  std::vector<double> up(col.points()), pts(col.points()), c(M), dw(noise.wiener.size());
  for (std::size_t k = 0; k < K; ++k) {
    const auto& u = sol.states[k];
    col.to_points(u.coeffs, up);
    if (!spec.f.is_zero()) {
      for (std::size_t i = 0; i < up.size(); ++i) pts[i] = spec.f(up[i]);
      col.to_coeffs(pts, c);
      for (std::size_t m = 0; m < M; ++m) out.drift[m] += to_final(k, m) * c[m] * dt;
    }
    if (!spec.g.is_zero() && noise.wiener.size() > 0) {
      noise.wiener.increment(k, dw);
      col.to_points(dw, pts);
      for (std::size_t i = 0; i < up.size(); ++i) pts[i] *= spec.g(up[i]);
      col.to_coeffs(pts, c);
      for (std::size_t m = 0; m < M; ++m) out.wiener[m] += to_final(k, m) * c[m];
    }
  }

  if (!spec.h.is_zero()) {
    const double alpha = spec.exponent.alpha;
    // coefficient m of U(T,s) (h(u(s)) e_j), for every grid time s
    std::vector<double> integrand((K + 1) * M);
    for (std::size_t j = 0; j < noise.fbm.size(); ++j) {
      if (noise.fbm.weights[j] == 0.0) continue;
      for (std::size_t k = 0; k <= K; ++k) {
        col.to_points(nonlinear_apply(spec.h, sol.states[k]).coeffs, up);
        for (std::size_t i = 0; i < up.size(); ++i) pts[i] = up[i] * col.basis_at(i, j);
        col.to_coeffs(pts, c);
        for (std::size_t m = 0; m < M; ++m) integrand[k * M + m] = to_final(k, m) * c[m];
      }
      const auto dg = rl_right_derivative_gb(noise.fbm.modes[j], alpha);
      for (std::size_t m = 0; m < M; ++m) {
        std::vector<double> v(K + 1);
        for (std::size_t k = 0; k <= K; ++k) v[k] = integrand[k * M + m];
        out.fbm[m] += noise.fbm.weights[j] * gls_integral(GridFunction(0.0, spec.horizon, std::move(v)), dg, alpha);
      }
    }
  }

  const auto& uT = sol.final_state();
  double r2 = 0.0;
  for (std::size_t m = 0; m < M; ++m) {
    const double d = uT[m] - out.initial[m] - out.drift[m] - out.wiener[m] - out.fbm[m];
    r2 += d * d;
  }
  out.residual = std::sqrt(r2);
  return out;
}

}  // namespace mildheat
