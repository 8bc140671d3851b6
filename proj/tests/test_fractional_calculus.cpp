#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "mildheat/fractional_calculus.hpp"
#include "mildheat/noise_fields.hpp"

using namespace mildheat;

namespace {

constexpr double pi = std::numbers::pi;

GridFunction sample(double (*fn)(double), std::size_t K, double a = 0.0, double b = 1.0) {
  return GridFunction::sample(fn, a, b, K);
}

// Brute-force left derivative at x for f on [0, x]: the singular integral in
// w = x - y with w = x u^(1/(1-alpha)), which removes the w^(-alpha) behaviour.
template <class F>
double brute_left(F&& f, double x, double alpha, std::size_t n) {
  const double p = 1.0 / (1.0 - alpha);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    const double w = x * std::pow(u, p);
    const double dw = x * p * std::pow(u, p - 1.0) / static_cast<double>(n);
    acc += (f(x) - f(x - w)) * std::pow(w, -alpha - 1.0) * dw;
  }
  return (f(x) * std::pow(x, -alpha) + alpha * acc) / std::tgamma(1.0 - alpha);
}

double midpoint(const std::function<double(double)>& fn, double a, double b, std::size_t n) {
  double s = 0.0;
  const double h = (b - a) / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) s += fn(a + (static_cast<double>(i) + 0.5) * h);
  return s * h;
}

}  // namespace

TEST(LeftDerivative, ConstantFunction) {
  const double c = 1.7, alpha = 0.35;
  const auto f = GridFunction::sample([c](double) { return c; }, 0.0, 1.0, 256);
  const auto d = rl_left_derivative(f, alpha);
  EXPECT_TRUE(d.endpoint_singular);
  EXPECT_TRUE(std::isnan(d.values.values[0]));
  for (std::size_t i = 1; i <= 256; ++i)
    EXPECT_NEAR(d.values.values[i], c * std::pow(f.time(i), -alpha) / std::tgamma(1.0 - alpha), 1e-12);
}

TEST(LeftDerivative, LinearFunctionClosedForm) {
  const double alpha = 0.3;
  const auto f = sample([](double x) { return x; }, 1u << 12);
  const auto d = rl_left_derivative(f, alpha);
  EXPECT_FALSE(d.endpoint_singular);
  EXPECT_EQ(d.values.values[0], 0.0);
  for (std::size_t i = 1; i <= f.steps(); i += 37)
    EXPECT_NEAR(d.values.values[i], std::pow(f.time(i), 0.7) / std::tgamma(1.7), 1e-4);
}

TEST(LeftDerivative, PowerFunctionAgainstBruteForce) {
  const double alpha = 0.3;
  auto fn = [alpha](double x) { return std::pow(x, alpha); };
  const auto f = GridFunction::sample(fn, 0.0, 1.0, 1u << 12);
  const auto d = rl_left_derivative(f, alpha);
  for (double x : {0.25, 0.5, 0.75, 1.0}) {
    const auto i = static_cast<std::size_t>(std::llround(x * f.steps()));
    const double oracle = brute_left(fn, x, alpha, 1u << 15);
    EXPECT_NEAR(oracle, std::tgamma(1.0 + alpha), 1e-3);
    EXPECT_NEAR(d.values.values[i] / oracle, 1.0, 1e-3) << x;
  }
}

TEST(LeftDerivative, RejectsOrderOutsideUnitInterval) {
  const auto f = sample([](double x) { return x; }, 16);
  EXPECT_THROW(rl_left_derivative(f, 0.0), DomainError);
  EXPECT_THROW(rl_left_derivative(f, 1.0), DomainError);
  EXPECT_THROW(rl_right_derivative_gb(f, -0.1), DomainError);
}

TEST(RightDerivative, ConstantGivesZero) {
  const auto g = GridFunction::sample([](double) { return 3.0; }, 0.0, 1.0, 128);
  for (double v : rl_right_derivative_gb(g, 0.4).values.values) EXPECT_EQ(v, 0.0);
}

TEST(RightDerivative, LinearClosedForm) {
  const double alpha = 0.4;
  const auto g = sample([](double x) { return x; }, 1u << 12);
  const auto d = rl_right_derivative_gb(g, alpha);
  for (std::size_t i = 0; i <= g.steps(); i += 41)
    EXPECT_NEAR(d.values.values[i], std::pow(1.0 - g.time(i), alpha) / std::tgamma(1.0 + alpha), 1e-4);
}

TEST(RightDerivative, SelfConvergence) {
  const double alpha = 0.3;
  auto fn = [](double x) { return std::sin(3.0 * x) + x * x; };
  const auto coarse = rl_right_derivative_gb(GridFunction::sample(fn, 0.0, 1.0, 1u << 10), alpha);
  const auto fine = rl_right_derivative_gb(GridFunction::sample(fn, 0.0, 1.0, 1u << 13), alpha);
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i <= (1u << 10); ++i) {
    diff = std::max(diff, std::abs(coarse.values.values[i] - fine.values.values[8 * i]));
    scale = std::max(scale, std::abs(fine.values.values[8 * i]));
  }
  EXPECT_LT(diff / scale, 1e-3);
}

TEST(GlsIntegral, UnitIntegrandGivesIncrement) {
  auto fn = [](double x) { return std::exp(x) * std::cos(2.0 * x); };
  const auto g = GridFunction::sample(fn, 0.0, 1.0, 1u << 12);
  const auto f = GridFunction::sample([](double) { return 1.0; }, 0.0, 1.0, 1u << 12);
  const double exact = fn(1.0) - fn(0.0);
  for (double alpha : {0.1, 0.25, 0.3, 0.6})
    EXPECT_NEAR(gls_integral(f, g, alpha) / exact, 1.0, 1e-3) << alpha;
}

TEST(GlsIntegral, ConstantIntegratorGivesZero) {
  const auto f = sample([](double x) { return std::sin(x) + 2.0; }, 512);
  const auto g = GridFunction::sample([](double) { return -4.0; }, 0.0, 1.0, 512);
  EXPECT_EQ(gls_integral(f, g, 0.3), 0.0);
}

TEST(GlsIntegral, MatchesRiemannStieltjes) {
  const std::size_t K = 1u << 12;
  const auto f = sample([](double x) { return std::sin(2.0 * pi * x); }, K);
  const auto g = sample([](double x) { return x * x; }, K);
  const double oracle = midpoint([](double x) { return std::sin(2.0 * pi * x) * 2.0 * x; }, 0.0, 1.0, 1u << 15);
  EXPECT_NEAR(oracle, -1.0 / pi, 1e-9);
  EXPECT_NEAR(gls_integral(f, g, 0.25) / oracle, 1.0, 1e-3);
}

TEST(GlsIntegral, ClassicalConsistencyAcrossOrders) {
  const std::size_t K = 1u << 12;
  auto ff = [](double x) { return 1.0 + x * std::cos(4.0 * x); };
  auto gg = [](double x) { return std::exp(-x) + 0.5 * x; };
  auto dg = [](double x) { return -std::exp(-x) + 0.5; };
  const auto f = GridFunction::sample(ff, 0.0, 1.0, K);
  const auto g = GridFunction::sample(gg, 0.0, 1.0, K);
  const double oracle = midpoint([&](double x) { return ff(x) * dg(x); }, 0.0, 1.0, 1u << 15);
  for (double alpha : {0.1, 0.25, 0.3}) EXPECT_NEAR(gls_integral(f, g, alpha) / oracle, 1.0, 1e-3) << alpha;
}

TEST(GlsIntegral, Bilinear) {
  const std::size_t K = 512;
  const auto f1 = sample([](double x) { return std::cos(x); }, K);
  const auto f2 = sample([](double x) { return x * x * x - 1.0; }, K);
  const auto g1 = sample([](double x) { return std::sin(5.0 * x); }, K);
  const auto g2 = sample([](double x) { return std::sqrt(x + 0.1); }, K);
  auto combo = [&](const GridFunction& a, const GridFunction& b, double s, double t) {
    std::vector<double> v(K + 1);
    for (std::size_t i = 0; i <= K; ++i) v[i] = s * a.values[i] + t * b.values[i];
    return GridFunction(0.0, 1.0, v);
  };
  const double a = 0.3;
  const double lhs_f = gls_integral(combo(f1, f2, 2.0, -3.0), g1, a);
  EXPECT_NEAR(lhs_f, 2.0 * gls_integral(f1, g1, a) - 3.0 * gls_integral(f2, g1, a), 1e-10);
  const double lhs_g = gls_integral(f1, combo(g1, g2, 0.5, 4.0), a);
  EXPECT_NEAR(lhs_g, 0.5 * gls_integral(f1, g1, a) + 4.0 * gls_integral(f1, g2, a), 1e-10);
}

TEST(GlsIntegral, RejectsMismatchedGrids) {
  const auto f = sample([](double x) { return x; }, 64);
  const auto g = sample([](double x) { return x; }, 128);
  EXPECT_THROW(gls_integral(f, g, 0.3), DomainError);
  const auto shifted = GridFunction::sample([](double x) { return x; }, 0.0, 2.0, 64);
  EXPECT_THROW(gls_integral(f, shifted, 0.3), DomainError);
}

TEST(GlsIntegral, NonFiniteDataFails) {
  auto g = sample([](double x) { return x; }, 64);
  g.values[10] = std::numeric_limits<double>::infinity();
  const auto f = sample([](double x) { return x; }, 64);
  EXPECT_THROW(gls_integral(f, g, 0.3), NumericFailure);
}

TEST(YoungBound, HoldsOnRandomSmoothPairs) {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> n;
  const std::size_t K = 512;
  for (int trial = 0; trial < 100; ++trial) {
    double cf[4], cg[4];
    for (int i = 0; i < 4; ++i) cf[i] = n(rng), cg[i] = n(rng);
    auto fn_f = [&](double x) { return cf[0] + cf[1] * x + cf[2] * std::sin(3.0 * x) + cf[3] * std::cos(7.0 * x); };
    auto fn_g = [&](double x) { return cg[0] * x * x + cg[1] * std::sin(5.0 * x) + cg[2] * std::exp(x) + cg[3] * x; };
    const auto f = GridFunction::sample(fn_f, 0.0, 1.0, K);
    const auto g = GridFunction::sample(fn_g, 0.0, 1.0, K);
    for (double alpha : {0.2, 0.3}) EXPECT_LE(std::abs(gls_integral(f, g, alpha)), young_bound(f, g, alpha));
  }
}

TEST(YoungConstant, EqualsGammaProduct) {
  for (double a : {0.1, 0.25, 0.5, 0.9})
    EXPECT_NEAR(young_constant(a), 1.0 / (std::tgamma(a) * std::tgamma(1.0 - a)), 1e-14);
}

TEST(HolderSeminorm, ConstantIsZero) {
  const auto g = GridFunction::sample([](double) { return 2.5; }, 0.0, 1.0, 256);
  EXPECT_EQ(holder_seminorm(g, 0.3, 1.0), 0.0);
}

TEST(HolderSeminorm, LinearClosedForm) {
  const double c = 1.5, alpha = 0.3;
  const auto g = GridFunction::sample([c](double s) { return c * s; }, 0.0, 1.0, 1u << 12);
  for (double t : {0.5, 1.0}) {
    const double exact = c * std::pow(t, alpha) * (1.0 + 1.0 / alpha);
    EXPECT_NEAR(holder_seminorm(g, alpha, t) / exact, 1.0, 0.02) << t;
  }
}

TEST(HolderSeminorm, MonotoneAndHomogeneous) {
  const auto path = sample_fbm(0.75, 1024, 1.0, 5).path;
  const auto prof = holder_seminorm_profile(path, 0.3);
  for (std::size_t k = 1; k < prof.size(); ++k) EXPECT_GE(prof[k], prof[k - 1]);
  auto scaled = path;
  for (double& v : scaled.values) v *= -3.0;
  EXPECT_NEAR(holder_seminorm(scaled, 0.3, 1.0), 3.0 * holder_seminorm(path, 0.3, 1.0), 1e-12);
}

TEST(HolderSeminorm, RejectsNonPositiveWindow) {
  const auto g = sample([](double x) { return x; }, 32);
  EXPECT_THROW(holder_seminorm(g, 0.3, 0.0), DomainError);
  EXPECT_THROW(holder_seminorm(g, 0.3, -1.0), DomainError);
}

TEST(HolderSeminorm, FbmStabilizesWhenOrderIsAdmissible) {
  // Nested grids: the coarse path is the fine path subsampled.
  const std::size_t fine = 1u << 13;
  const auto path = sample_fbm(0.75, fine, 1.0, 99).path;
  std::vector<double> sub(fine / 2 + 1);
  for (std::size_t i = 0; i < sub.size(); ++i) sub[i] = path.values[2 * i];
  const GridFunction coarse(0.0, 1.0, sub);
  const double ratio = holder_seminorm(path, 0.3, 1.0) / holder_seminorm(coarse, 0.3, 1.0);
  EXPECT_GE(ratio, 0.9);
  EXPECT_LE(ratio, 1.1);
}

TEST(HolderSeminorm, FbmGrowsWhenPathIsTooRough) {
  // The seminorm needs (1 - alpha)-Hoelder paths; 1 - alpha = 0.8 > H = 0.75.
  // It diverges under refinement like Delta^(H - 1 + alpha).
  const auto path = sample_fbm(0.75, 1u << 14, 1.0, 99).path;
  std::vector<double> prev;
  double last = 0.0;
  for (std::size_t K : {1u << 8, 1u << 10, 1u << 12, 1u << 14}) {
    std::vector<double> sub(K + 1);
    const std::size_t s = (1u << 14) / K;
    for (std::size_t i = 0; i <= K; ++i) sub[i] = path.values[s * i];
    const double v = holder_seminorm(GridFunction(0.0, 1.0, sub), 0.1, 1.0);
    if (last > 0.0) { EXPECT_GT(v, 1.05 * last) << K; }
    last = v;
  }
}

TEST(HolderSeminorm, CoarseModeReportsErrorEstimate) {
  const auto path = sample_fbm(0.8, 2048, 1.0, 3).path;
  const double exact = holder_seminorm(path, 0.3, 1.0);
  const auto est = holder_seminorm_coarse(path, 0.3, 1.0, 4);
  EXPECT_LE(est.value, exact + 1e-12);
  EXPECT_GE(est.error_estimate, 0.0);
  EXPECT_EQ(est.stride, 4u);
  EXPECT_NEAR(holder_seminorm_coarse(path, 0.3, 1.0, 1).value, exact, 1e-12);
}

TEST(BesovNorm, ConstantPath) {
  std::vector<FieldVector> path(65, FieldVector(std::vector<double>{1.0, -2.0, 0.5}));
  const auto n = besov_norm_path(path, 0.3, 1.0);
  EXPECT_EQ(n.j_part, 0.0);
  EXPECT_NEAR(n.norm * n.norm, 1.0 + 4.0 + 0.25, 1e-12);
}

TEST(BesovNorm, ZeroPath) {
  std::vector<FieldVector> path(33, FieldVector(4));
  EXPECT_EQ(besov_norm_path(path, 0.3, 1.0).norm, 0.0);
  EXPECT_EQ(alpha1_norm(path, 0.3, 1.0), 0.0);
}

TEST(BesovNorm, LinearScalarPath) {
  const double alpha = 0.25;
  const std::size_t K = 1u << 12;
  std::vector<FieldVector> path;
  for (std::size_t i = 0; i <= K; ++i) path.push_back(FieldVector::unit(2, 0, static_cast<double>(i) / K));
  const auto n = besov_norm_path(path, alpha, 1.0);
  const double exact = 1.0 / ((1.0 - alpha) * (1.0 - alpha) * (3.0 - 2.0 * alpha));
  EXPECT_NEAR(exact, 0.7111, 1e-4);
  EXPECT_NEAR(n.j_part / exact, 1.0, 0.02);
  EXPECT_NEAR(n.sup_part, 1.0, 1e-12);
  // brute-force double quadrature of the same functional
  const double brute = midpoint(
      [&](double t) {
        const double inner = midpoint([&](double s) { return (t - s) * std::pow(t - s, -alpha - 1.0); }, 0.0, t, 4096);
        return inner * inner;
      },
      0.0, 1.0, 512);
  EXPECT_NEAR(brute / exact, 1.0, 0.02);
}

TEST(BesovNorm, PartsMonotoneInHorizon) {
  const auto path = sample_fbm(0.75, 1024, 1.0, 17).path;
  std::vector<FieldVector> states;
  for (double v : path.values) states.push_back(FieldVector(std::vector<double>{v, 0.5 * v}));
  double sup = 0.0, j = 0.0;
  for (std::size_t K : {64u, 256u, 512u, 1024u}) {
    // the first K steps of the 1024-step path span [0, K/1024]
    const auto n = besov_norm_path(std::span(states.data(), K + 1), 0.3, static_cast<double>(K) / 1024.0);
    EXPECT_GE(n.sup_part, sup);
    EXPECT_GE(n.j_part, j);
    sup = n.sup_part, j = n.j_part;
  }
}

TEST(BesovNorm, StrideSubsamples) {
  std::vector<FieldVector> path;
  for (int i = 0; i <= 64; ++i) path.push_back(FieldVector::unit(1, 0, std::sin(i * 0.1)));
  std::vector<FieldVector> sub;
  for (int i = 0; i <= 64; i += 4) sub.push_back(path[i]);
  const auto a = besov_norm_path(path, 0.3, 1.0, 4), b = besov_norm_path(sub, 0.3, 1.0);
  EXPECT_EQ(a.norm, b.norm);
  EXPECT_THROW(besov_norm_path(path, 0.3, 1.0, 5), DomainError);
}

TEST(BesovNorm, RejectsShortPaths) {
  std::vector<FieldVector> path(2, FieldVector(3));
  EXPECT_THROW(besov_norm_path(path, 0.3, 1.0), DomainError);
  EXPECT_THROW(alpha1_norm(path, 0.3, 1.0), DomainError);
}

TEST(Alpha1Norm, ConstantPath) {
  const double alpha = 0.25;
  std::vector<FieldVector> path(1025, FieldVector(std::vector<double>{3.0, 4.0}));
  EXPECT_NEAR(alpha1_norm(path, alpha, 1.0), 5.0 / (1.0 - alpha), 1e-12);
}

TEST(Alpha1Norm, LinearPathAgainstBruteForce) {
  const double alpha = 0.25;
  const auto u = sample([](double t) { return t; }, 1u << 12);
  const double brute = midpoint(
      [&](double t) {
        const double inner = midpoint([&](double s) { return std::pow(t - s, -alpha); }, 0.0, t, 4096);
        return t * std::pow(t, -alpha) + inner;
      },
      0.0, 1.0, 1024);
  // closed form: 1/(2-alpha) + 1/((1-alpha)(2-alpha))
  EXPECT_NEAR(brute, 1.0 / (2.0 - alpha) + 1.0 / ((1.0 - alpha) * (2.0 - alpha)), 0.01);
  EXPECT_NEAR(alpha1_norm(u, alpha) / brute, 1.0, 0.01);
}
