#pragma once

// Exact Gaussian paths (Brownian and fractional Brownian), L^2(D)-valued noise
// fields as truncated eigen-series, moving-average mollification, the random
// Hoelder functional xi and the stopping time tau_N.

#include <fftw3.h>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "mildheat/errors.hpp"
#include "mildheat/fractional_calculus.hpp"
#include "mildheat/numfmt.hpp"
#include "mildheat/random.hpp"
#include "mildheat/spectral_domain.hpp"

namespace mildheat {

/// Eigenvalue sequences of the Wiener (lambda) and fBm (mu) covariance operators.
struct QSpec {
  struct DecayLaw {
    double lambda0 = 1.0;
    double p = 2.0;  // lambda_j = lambda0 (j+1)^-p
    double mu0 = 1.0;
    double q = 3.0;  // mu_j = mu0 (j+1)^-q
    bool operator==(const DecayLaw&) const = default;
  };

  std::vector<double> lambda;
  std::vector<double> mu;
  std::optional<DecayLaw> law;

  static QSpec from_decay(std::size_t modes, const DecayLaw& law) {
    if (!(law.p > 1.0)) throw DomainError("QSpec: lambda decay p must exceed 1 (sum of lambda_j diverges)");
    if (!(law.q > 2.0)) throw DomainError("QSpec: mu decay q must exceed 2 (sum of mu_j^(1/2) diverges)");
    QSpec s;
    s.lambda.resize(modes);
    s.mu.resize(modes);
    for (std::size_t j = 0; j < modes; ++j) {
      const double n = static_cast<double>(j + 1);
      s.lambda[j] = law.lambda0 * std::pow(n, -law.p);
      s.mu[j] = law.mu0 * std::pow(n, -law.q);
    }
    s.law = law;
    s.validate();
    return s;
  }

  std::size_t modes() const noexcept { return mu.size(); }

  void validate() const {
    if (lambda.size() != mu.size()) throw DomainError("QSpec: lambda and mu must have J entries each");
    auto check = [](const std::vector<double>& v, const char* name) {
      for (std::size_t j = 0; j < v.size(); ++j) {
        if (!(v[j] >= 0.0)) throw DomainError(std::string("QSpec: ") + name + " entries must be nonnegative");
        if (j > 0 && v[j] > v[j - 1]) throw DomainError(std::string("QSpec: ") + name + " must be nonincreasing");
      }
    };
    check(lambda, "lambda");
    check(mu, "mu");
  }

  /// sum_{j >= J} mu_j^(1/2) under the decay law (0 when no law is attached).
  double mu_sqrt_tail() const {
    if (!law || law->mu0 == 0.0) return 0.0;
    const double e = law->q / 2.0;
    const std::size_t cut = modes() + 100000;
    double s = 0.0;
    for (std::size_t j = modes(); j < cut; ++j) s += std::pow(static_cast<double>(j + 1), -e);
    s += std::pow(static_cast<double>(cut) + 0.5, 1.0 - e) / (e - 1.0);
    return std::sqrt(law->mu0) * s;
  }

  bool operator==(const QSpec&) const = default;
};

struct FbmPath {
  double hurst = 0.5;
  GridFunction path;  // path.values[0] == 0
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(fftw_complex* p) const noexcept { fftw_free(p); }
};
struct FftwPlanFree {
  void operator()(fftw_plan p) const noexcept {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(p);
  }
};
using FftwBuffer = std::unique_ptr<fftw_complex[], FftwFree>;
using FftwPlan = std::unique_ptr<std::remove_pointer_t<fftw_plan>, FftwPlanFree>;

inline FftwBuffer fftw_buffer(std::size_t n) {
  return FftwBuffer(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n)));
}

/// Autocovariance of fBm increments with spacing h at lag k.
inline double fgn_autocovariance(double hurst, double h, std::size_t k) {
  const double H2 = 2.0 * hurst;
  const double kk = static_cast<double>(k);
  const double up = std::pow(kk + 1.0, H2);
  const double mid = k == 0 ? 0.0 : std::pow(kk, H2);
  const double down = k == 0 ? 1.0 : std::pow(kk - 1.0, H2);
  return 0.5 * std::pow(h, H2) * (up - 2.0 * mid + down);
}

}  // namespace detail

/// Exact fBm sampler on a uniform grid: circulant embedding of the increment
/// covariance (Davies-Harte), with a Cholesky fallback if the embedding is not
/// nonnegative definite. Immutable after construction; sample() may be called
/// concurrently.
class FbmSampler {
 public:
  FbmSampler(double hurst, std::size_t steps, double horizon, bool force_cholesky = false,
             double cholesky_jitter = 0.0)
      : hurst_(hurst), steps_(steps), horizon_(horizon) {
    if (!(hurst > 0.0 && hurst < 1.0)) throw DomainError("sample_fbm: Hurst index must lie in (0,1)");
    if (steps < 2) throw DomainError("sample_fbm: need K >= 2 steps");
    if (!(horizon > 0.0)) throw DomainError("sample_fbm: need T > 0");
    const double h = horizon / static_cast<double>(steps);
    if (!force_cholesky && try_circulant(h)) return;
    build_cholesky(h, cholesky_jitter);
  }

  double hurst() const noexcept { return hurst_; }
  std::size_t steps() const noexcept { return steps_; }
  double horizon() const noexcept { return horizon_; }
  bool uses_cholesky() const noexcept { return !plan_; }

  std::vector<double> increments(Engine& rng) const {
    std::normal_distribution<double> normal;
    std::vector<double> inc(steps_);
    if (plan_) {
      const std::size_t m = 2 * steps_;
      auto buf = detail::fftw_buffer(m);
      for (std::size_t k = 0; k < m; ++k) {
        const double re = normal(rng);
        const double im = normal(rng);
        buf[k][0] = scale_[k] * re;
        buf[k][1] = scale_[k] * im;
      }
      fftw_execute_dft(plan_.get(), buf.get(), buf.get());
      for (std::size_t k = 0; k < steps_; ++k) inc[k] = buf[k][0];
    } else {
      Eigen::VectorXd z(static_cast<Eigen::Index>(steps_));
      for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = normal(rng);
      const Eigen::VectorXd x = chol_ * z;
      for (std::size_t k = 0; k < steps_; ++k) inc[k] = x[static_cast<Eigen::Index>(k)];
    }
    return inc;
  }

  FbmPath sample(std::uint64_t seed) const {
    Engine rng(seed);
    const auto inc = increments(rng);
    std::vector<double> v(steps_ + 1, 0.0);
    for (std::size_t k = 0; k < steps_; ++k) v[k + 1] = v[k] + inc[k];
    return {hurst_, GridFunction(0.0, horizon_, std::move(v))};
  }

 private:
  bool try_circulant(double h) {
    const std::size_t m = 2 * steps_;
    auto buf = detail::fftw_buffer(m);
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t lag = k <= steps_ ? k : m - k;
      buf[k][0] = detail::fgn_autocovariance(hurst_, h, lag);
      buf[k][1] = 0.0;
    }
    detail::FftwPlan plan;
    {
      std::lock_guard lock(detail::fftw_planner_mutex());
      plan.reset(fftw_plan_dft_1d(static_cast<int>(m), buf.get(), buf.get(), FFTW_FORWARD, FFTW_ESTIMATE));
    }
    fftw_execute(plan.get());
    double peak = 0.0;
    for (std::size_t k = 0; k < m; ++k) peak = std::max(peak, std::abs(buf[k][0]));
    scale_.assign(m, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
      const double ev = buf[k][0];
      if (ev < -1e-10 * peak) return false;
      scale_[k] = std::sqrt(std::max(ev, 0.0) / static_cast<double>(m));
    }
    plan_ = std::move(plan);
    return true;
  }

  void build_cholesky(double h, double jitter) {
    const auto n = static_cast<Eigen::Index>(steps_);
    Eigen::MatrixXd cov(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        cov(i, j) = detail::fgn_autocovariance(hurst_, h, static_cast<std::size_t>(std::abs(i - j)));
    cov.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
      throw NumericFailure("sample_fbm: Cholesky of the increment covariance failed; raise cholesky_jitter");
    chol_ = llt.matrixL();
  }

  double hurst_;
  std::size_t steps_;
  double horizon_;
  std::vector<double> scale_;
  detail::FftwPlan plan_;
  Eigen::MatrixXd chol_;
};

inline FbmPath sample_fbm(double hurst, std::size_t steps, double horizon, std::uint64_t seed) {
  return FbmSampler(hurst, steps, horizon).sample(seed);
}

inline GridFunction sample_brownian(std::size_t steps, double horizon, std::uint64_t seed) {
  if (steps < 2) throw DomainError("sample_brownian: need K >= 2 steps");
  Engine rng(seed);
  std::normal_distribution<double> normal;
  const double sd = std::sqrt(horizon / static_cast<double>(steps));
  std::vector<double> v(steps + 1, 0.0);
  for (std::size_t k = 0; k < steps; ++k) v[k + 1] = v[k] + sd * normal(rng);
  return GridFunction(0.0, horizon, std::move(v));
}

enum class NoiseKind { wiener, fbm };

/// Truncated eigen-series sum_j weight_j e_j path_j(t) with e_j the cosine basis.
struct FieldPath {
  NoiseKind kind = NoiseKind::fbm;
  double hurst = 0.5;
  std::vector<GridFunction> modes;  // path_j on the shared grid
  std::vector<double> weights;      // mu_j^(1/2) or lambda_j^(1/2)

  std::size_t size() const noexcept { return modes.size(); }
  std::size_t steps() const { return modes.empty() ? 0 : modes.front().steps(); }
  double horizon() const { return modes.empty() ? 0.0 : modes.front().t1; }

  FieldVector value_at(std::size_t k, std::size_t basis_size) const {
    if (size() > basis_size) throw DomainError("FieldPath: noise modes J exceed basis size M");
    FieldVector v(basis_size);
    for (std::size_t j = 0; j < size(); ++j) v[j] = weights[j] * modes[j].values[k];
    return v;
  }

  /// Weighted coefficient increments between t_k and t_{k+1}.
  void increment(std::size_t k, std::span<double> out) const {
    for (std::size_t j = 0; j < size(); ++j)
      out[j] = weights[j] * (modes[j].values[k + 1] - modes[j].values[k]);
  }
};

namespace detail {

inline FieldPath field_shell(const QSpec& spec, NoiseKind kind, std::size_t basis_size) {
  spec.validate();
  if (spec.modes() > basis_size) throw DomainError("build_field: noise modes J exceed basis size M");
  FieldPath field;
  field.kind = kind;
  const auto& eig = kind == NoiseKind::wiener ? spec.lambda : spec.mu;
  field.weights.resize(spec.modes());
  for (std::size_t j = 0; j < spec.modes(); ++j) field.weights[j] = std::sqrt(eig[j]);
  field.modes.reserve(spec.modes());
  return field;
}

}  // namespace detail

/// fBm field drawn with a prebuilt sampler; same values as build_field for the same seed.
inline FieldPath build_fbm_field(const QSpec& spec, const FbmSampler& sampler, std::uint64_t seed,
                                 std::size_t basis_size) {
  if (!(sampler.hurst() > 0.5 && sampler.hurst() < 1.0))
    throw DomainError("build_field: fBm field needs H in (1/2, 1)");
  auto field = detail::field_shell(spec, NoiseKind::fbm, basis_size);
  field.hurst = sampler.hurst();
  for (std::size_t j = 0; j < spec.modes(); ++j)
    field.modes.push_back(sampler.sample(derive_seed(seed, {stream::fbm, j})).path);
  return field;
}

inline FieldPath build_field(const QSpec& spec, NoiseKind kind, double hurst, std::size_t steps,
                             double horizon, std::uint64_t seed, std::size_t basis_size) {
  if (kind == NoiseKind::fbm) {
    if (!(hurst > 0.5 && hurst < 1.0)) throw DomainError("build_field: fBm field needs H in (1/2, 1)");
    return build_fbm_field(spec, FbmSampler(hurst, steps, horizon), seed, basis_size);
  }
  auto field = detail::field_shell(spec, NoiseKind::wiener, basis_size);
  field.hurst = 0.5;
  for (std::size_t j = 0; j < spec.modes(); ++j)
    field.modes.push_back(sample_brownian(steps, horizon, derive_seed(seed, {stream::wiener, j})));
  return field;
}

/// The two driving fields of one realization, on a common time grid.
struct NoiseRealization {
  FieldPath wiener;
  FieldPath fbm;
  std::uint64_t seed = 0;
};

inline NoiseRealization make_noise(const QSpec& spec, double hurst, std::size_t steps, double horizon,
                                   std::uint64_t seed, std::size_t basis_size) {
  return {build_field(spec, NoiseKind::wiener, hurst, steps, horizon, seed, basis_size),
          build_field(spec, NoiseKind::fbm, hurst, steps, horizon, seed, basis_size), seed};
}

inline NoiseRealization make_noise(const QSpec& spec, const FbmSampler& sampler, std::uint64_t seed,
                                   std::size_t basis_size) {
  return {build_field(spec, NoiseKind::wiener, 0.5, sampler.steps(), sampler.horizon(), seed, basis_size),
          build_fbm_field(spec, sampler, seed, basis_size), seed};
}

/// n int_{(t-1/n) v t0}^t B(s) ds and its exact derivative n (B(t) - B((t-1/n) v t0)).
struct MollifiedPath {
  std::size_t rate = 1;
  GridFunction values;
  GridFunction derivative;
};

inline MollifiedPath mollify(const GridFunction& base, std::size_t rate) {
  if (rate == 0) throw DomainError("mollify: rate n must be positive");
  const double h = base.spacing();
  const double window = 1.0 / static_cast<double>(rate);
  if (h > window / 4.0 * (1.0 + 1e-12))
    throw DomainError("mollify: window 1/n unresolved; need grid spacing <= 1/(4n), i.e. K >= " +
                      std::to_string(static_cast<long long>(std::ceil(4.0 * rate * (base.t1 - base.t0)))));
  const std::size_t K = base.steps();
  const auto& v = base.values;
  std::vector<double> cum(K + 1, 0.0);
  for (std::size_t k = 0; k < K; ++k) cum[k + 1] = cum[k] + 0.5 * h * (v[k] + v[k + 1]);

  MollifiedPath out{rate, GridFunction(base.t0, base.t1, std::vector<double>(K + 1)),
                    GridFunction(base.t0, base.t1, std::vector<double>(K + 1))};
  const double n = static_cast<double>(rate);
  for (std::size_t k = 0; k <= K; ++k) {
    const double lo = std::max(base.time(k) - window, base.t0);
    const double pos = (lo - base.t0) / h;
    const auto i = std::min(static_cast<std::size_t>(pos), K - 1);
    const double th = std::clamp(pos - static_cast<double>(i), 0.0, 1.0);
    const double lo_value = v[i] + th * (v[i + 1] - v[i]);
    const double lo_cum = cum[i] + h * th * (v[i] + 0.5 * th * (v[i + 1] - v[i]));
    out.values.values[k] = n * (cum[k] - lo_cum);
    out.derivative.values[k] = n * (v[k] - lo_value);
  }
  return out;
}

namespace detail {

/// Diagnostic mode only requires alpha in (1 - H, 1), where the seminorm is still finite.
inline void require_xi_order(const FieldPath& fbm, double alpha, bool diagnostic = false) {
  const double upper = diagnostic ? 1.0 : 1.0 / 3.0;
  if (!(alpha > 1.0 - fbm.hurst && alpha < upper))
    throw DomainError(diagnostic ? "xi: need alpha in (1 - H, 1)" : "xi: need alpha in (1 - H, 1/3)");
}

}  // namespace detail

/// xi(t_k) = sum_j mu_j^(1/2) ||B_j||_{alpha,0;t_k} on the field's grid.
inline GridFunction xi_profile(const FieldPath& fbm, double alpha, bool diagnostic = false) {
  detail::require_xi_order(fbm, alpha, diagnostic);
  if (fbm.modes.empty()) throw DomainError("xi_profile: empty field");
  std::vector<double> xi(fbm.steps() + 1, 0.0);
  for (std::size_t j = 0; j < fbm.size(); ++j) {
    if (fbm.weights[j] == 0.0) continue;
    const auto prof = holder_seminorm_profile(fbm.modes[j], alpha);
    for (std::size_t k = 0; k < xi.size(); ++k) xi[k] += fbm.weights[j] * prof[k];
  }
  return GridFunction(0.0, fbm.horizon(), std::move(xi));
}

struct XiEstimate {
  double value = 0.0;
  double tail_bound = 0.0;  // (sum_{j >= J} mu_j^(1/2)) * max_j ||B_j||
};

inline XiEstimate xi_estimate(const FieldPath& fbm, double alpha, double t, double mu_sqrt_tail = 0.0) {
  detail::require_xi_order(fbm, alpha);
  XiEstimate out;
  double largest = 0.0;
  for (std::size_t j = 0; j < fbm.size(); ++j) {
    const double s = holder_seminorm(fbm.modes[j], alpha, t);
    out.value += fbm.weights[j] * s;
    largest = std::max(largest, s);
  }
  out.tail_bound = mu_sqrt_tail * largest;
  return out;
}

struct StoppingTime {
  std::size_t index = 0;
  double time = 0.0;
  bool early = false;  // tau_N < T
};

/// tau_N = inf{t : xi_t >= N} ^ T, resolved to the first grid time.
inline StoppingTime stopping_time(const GridFunction& xi, double level, double horizon) {
  const auto& v = xi.values;
  for (std::size_t k = 1; k < v.size(); ++k)
    if (v[k] < v[k - 1] - 1e-12 * std::abs(v[k - 1]))
      throw DomainError("stopping_time: xi must be nondecreasing");
  for (std::size_t k = 0; k < v.size(); ++k)
    if (v[k] >= level) return {k, xi.time(k), k + 1 < v.size()};
  return {v.size() - 1, horizon, false};
}

/// B^{H,N}(t) = B^H(t ^ tau_N) for every mode.
inline FieldPath stop_field(const FieldPath& field, std::size_t index) {
  FieldPath out = field;
  for (auto& m : out.modes) {
    auto& v = m.values;
    for (std::size_t k = index + 1; k < v.size(); ++k) v[k] = v[index];
  }
  return out;
}

struct StoppedField {
  FieldPath field;
  GridFunction xi;
  StoppingTime tau;
  double level = 0.0;
};

inline StoppedField stop_at_level(const FieldPath& fbm, double alpha, double level, bool diagnostic = false) {
  StoppedField s;
  s.xi = xi_profile(fbm, alpha, diagnostic);
  s.tau = stopping_time(s.xi, level, fbm.horizon());
  s.field = stop_field(fbm, s.tau.index);
  s.level = level;
  return s;
}

/// CSV with columns t, mode, value (value = unweighted path of the mode).
inline void write_field_csv(std::ostream& os, const FieldPath& field) {
  os << "t,mode,value\n";
  for (std::size_t j = 0; j < field.size(); ++j) {
    const auto& m = field.modes[j];
    for (std::size_t k = 0; k <= m.steps(); ++k)
      os << format_double(m.time(k)) << ',' << j << ',' << format_double(m.values[k])
         << '\n';
  }
}

}  // namespace mildheat
