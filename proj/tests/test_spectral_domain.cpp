#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "mildheat/spectral_domain.hpp"

using namespace mildheat;

namespace {

// Composite midpoint rule on [0,1] with n cells.
template <class F>
double midpoint(F&& f, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += f((static_cast<double>(i) + 0.5) / static_cast<double>(n));
  return s / static_cast<double>(n);
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= x.size(), my /= y.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) sxy += (x[i] - mx) * (y[i] - my), sxx += (x[i] - mx) * (x[i] - mx);
  return sxy / sxx;
}

}  // namespace

TEST(CosineBasis, RejectsZeroModes) { EXPECT_THROW(build_basis(0), DomainError); }

TEST(CosineBasis, SingleModeIsConstant) {
  const auto b = build_basis(1);
  EXPECT_EQ(b.size(), 1u);
  EXPECT_EQ(b.rate(0), 0.0);
  EXPECT_EQ(b.eval(0, 0.37), 1.0);
}

TEST(CosineBasis, SecondModeAtMidpoint) {
  const auto b = build_basis(3);
  EXPECT_NEAR(b.eval(2, 0.5), -1.414214, 1e-6);
}

TEST(CosineBasis, RatesStartAtZeroAndIncrease) {
  const auto b = build_basis(10);
  EXPECT_EQ(b.rate(0), 0.0);
  for (std::size_t j = 1; j < 10; ++j) {
    EXPECT_GT(b.rate(j), b.rate(j - 1));
    EXPECT_DOUBLE_EQ(b.rate(j), std::numbers::pi * std::numbers::pi * j * j);
  }
}

TEST(CosineBasis, GramMatrixIsIdentity) {
  const auto b = build_basis(8);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j) {
      const double g = midpoint([&](double x) { return b.eval(i, x) * b.eval(j, x); }, 1u << 14);
      EXPECT_NEAR(g, i == j ? 1.0 : 0.0, 1e-10) << i << "," << j;
    }
}

TEST(CosineBasis, SupNorms) {
  const auto b = build_basis(5);
  EXPECT_EQ(b.sup_norm(0), 1.0);
  for (std::size_t j = 1; j < 5; ++j) {
    EXPECT_EQ(b.sup_norm(j), std::sqrt(2.0));
    EXPECT_NEAR(std::abs(b.eval(j, 0.0)), std::sqrt(2.0), 1e-15);
  }
}

TEST(FieldVector, ParsevalAndEvaluation) {
  const auto b = build_basis(4);
  const FieldVector v(std::vector<double>{0.5, -1.0, 0.25, 2.0});
  const double l2 = std::sqrt(midpoint([&](double x) { double u = b.evaluate(v, x); return u * u; }, 1u << 14));
  EXPECT_NEAR(l2, v.norm(), 1e-10);
  EXPECT_NEAR(b.evaluate(v, 0.0), 0.5 + std::sqrt(2.0) * (-1.0 + 0.25 + 2.0), 1e-14);
}

TEST(Propagator, EqualTimesGiveIdentity) {
  const auto b = build_basis(6);
  const auto p = make_propagator(0.4, 0.4, Diffusivity::constant(1.0), b);
  for (double f : p.factors) EXPECT_EQ(f, 1.0);
}

TEST(Propagator, ClosedFormFirstMode) {
  const auto b = build_basis(3);
  const double pi2 = std::numbers::pi * std::numbers::pi;
  const auto p = make_propagator(0.0, 1.0 / pi2, Diffusivity::constant(1.0), b);
  EXPECT_NEAR(p.factors[1], 0.3678794, 1e-7);
}

TEST(Propagator, AffineDiffusivityMatchesFineQuadrature) {
  const auto b = build_basis(3);
  const auto kappa = Diffusivity::affine(0.0, 1.0);
  // kappa(0) = 0 is not parabolic; the oracle uses the integral on (0,1] directly.
  const double K = midpoint([](double u) { return u; }, 1u << 12);
  EXPECT_NEAR(K, 0.5, 1e-12);
  const auto p = propagator_from_diffusion(0.0, 1.0, K, b);
  EXPECT_NEAR(p.factors[1], std::exp(-std::numbers::pi * std::numbers::pi / 2.0), 1e-10);
  EXPECT_THROW(make_propagator(0.0, 1.0, kappa, b), DomainError);
  const auto shifted = Diffusivity::affine(1e-3, 1.0);
  const auto q = make_propagator(0.0, 1.0, shifted, b);
  EXPECT_NEAR(q.factors[1], std::exp(-std::numbers::pi * std::numbers::pi * (0.5 + 1e-3)), 1e-10);
}

TEST(Propagator, FactorsInUnitIntervalAndNonincreasing) {
  const auto b = build_basis(16);
  const auto p = make_propagator(0.1, 0.15, Diffusivity::oscillating(1.0, 0.5, 3.0), b);
  EXPECT_EQ(p.factors[0], 1.0);
  for (std::size_t j = 1; j < 16; ++j) {
    EXPECT_GT(p.factors[j], 0.0);
    EXPECT_LE(p.factors[j], p.factors[j - 1]);
  }
}

TEST(Propagator, RejectsReversedTimesAndBadDiffusivity) {
  const auto b = build_basis(4);
  EXPECT_THROW(make_propagator(0.5, 0.2, Diffusivity::constant(1.0), b), DomainError);
  EXPECT_THROW(make_propagator(0.0, 0.2, Diffusivity::constant(-1.0), b), DomainError);
  EXPECT_THROW(make_propagator(0.0, 0.2, Diffusivity::constant(0.0), b), DomainError);
}

TEST(Propagator, ApplyConservesMeanAndRejectsMismatch) {
  const auto b = build_basis(5);
  const auto p = make_propagator(0.0, 0.3, Diffusivity::constant(2.0), b);
  const auto v = FieldVector::unit(5, 0, 3.5);
  EXPECT_EQ(apply_propagator(p, v), v);
  EXPECT_THROW(apply_propagator(p, FieldVector(4)), DomainError);
  const auto id = make_propagator(0.3, 0.3, Diffusivity::constant(2.0), b);
  const FieldVector w(std::vector<double>{1, 2, 3, 4, 5});
  EXPECT_EQ(apply_propagator(id, w), w);
}

TEST(Propagator, Composition) {
  const auto b = build_basis(12);
  const auto k = Diffusivity::constant(1.0);
  FieldVector v(12);
  for (std::size_t j = 0; j < 12; ++j) v[j] = 1.0 / (1.0 + j);
  const auto two = apply_propagator(make_propagator(0.3, 0.7, k, b), apply_propagator(make_propagator(0.0, 0.3, k, b), v));
  const auto one = apply_propagator(make_propagator(0.0, 0.7, k, b), v);
  EXPECT_LT(distance(one, two), 1e-10);
}

TEST(Propagator, SemigroupForTimeDependentDiffusivity) {
  const auto b = build_basis(10);
  const auto k = Diffusivity::oscillating(1.0, 0.3, 2.0);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    double r = u(rng), s = u(rng), t = u(rng);
    if (r > s) std::swap(r, s);
    if (s > t) std::swap(s, t);
    if (r > s) std::swap(r, s);
    const auto a = make_propagator(r, s, k, b), c = make_propagator(s, t, k, b), full = make_propagator(r, t, k, b);
    for (std::size_t j = 0; j < 10; ++j) EXPECT_NEAR(full.factors[j], a.factors[j] * c.factors[j], 1e-10);
  }
}

TEST(Propagator, Contraction) {
  const auto b = build_basis(20);
  const auto k = Diffusivity::affine(0.5, 1.0);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    FieldVector v(20);
    for (auto& c : v.coeffs) c = n(rng);
    double s = u(rng), t = u(rng);
    if (s > t) std::swap(s, t);
    EXPECT_LE(apply_propagator(make_propagator(s, t, k, b), v).norm(), v.norm());
  }
}

TEST(DiffusionClock, MatchesDirectIntegral) {
  const auto k = Diffusivity::affine(1.0, 2.0);
  const DiffusionClock clock(k, 1.0, 100);
  // Simpson is exact for affine kappa.
  EXPECT_NEAR(clock.between(10, 70), k.integral(0.1, 0.7), 1e-13);
  EXPECT_NEAR(clock.between(0, 100), 2.0, 1e-13);
}

TEST(Green, LongTimeLimitIsOne) {
  const auto b = build_basis(8);
  for (double x : {0.0, 0.3, 1.0})
    for (double y : {0.1, 0.9}) EXPECT_NEAR(green_eval(x, y, 0.0, 40.0, Diffusivity::constant(1.0), b), 1.0, 1e-15);
}

TEST(Green, Symmetric) {
  const auto b = build_basis(64);
  const auto k = Diffusivity::constant(1.0);
  EXPECT_EQ(green_eval(0.2, 0.7, 0.0, 0.1, k, b), green_eval(0.7, 0.2, 0.0, 0.1, k, b));
}

TEST(Green, ConservesMass) {
  const auto b = build_basis(64);
  const auto k = Diffusivity::constant(1.0);
  for (double x : {0.0, 0.25, 0.6, 1.0}) {
    const double mass = midpoint([&](double y) { return green_eval(x, y, 0.0, 0.01, k, b); }, 1u << 12);
    EXPECT_NEAR(mass, 1.0, 1e-8) << x;
  }
}

TEST(Green, RejectsCoincidentTimesAndShortTruncation) {
  const auto b = build_basis(4);
  const auto k = Diffusivity::constant(1.0);
  EXPECT_THROW(green_eval(0.1, 0.2, 0.3, 0.3, k, b), DomainError);
  EXPECT_THROW(green_eval(0.1, 0.2, 0.0, 1e-3, k, b), DomainError);
}

TEST(Green, GaussianDiagonalScaling) {
  const auto b = build_basis(400);
  const auto k = Diffusivity::constant(1.0);
  std::vector<double> lx, ly;
  for (int i = 0; i <= 8; ++i) {
    const double lag = std::pow(10.0, -4.0 + 2.0 * i / 8.0);
    double sup = 0.0;
    for (int xi = 0; xi <= 200; ++xi) sup = std::max(sup, std::abs(green_eval(xi / 200.0, 0.5, 0.0, lag, k, b)));
    lx.push_back(std::log(lag));
    ly.push_back(std::log(sup));
  }
  EXPECT_NEAR(slope(lx, ly), -0.5, 0.05);
}

TEST(Green, GaussianOffDiagonalDecay) {
  const auto b = build_basis(400);
  const auto k = Diffusivity::constant(1.0);
  const double lag = 1e-3;
  std::vector<double> lx, ly;
  for (int i = 0; i < 10; ++i) {
    const double d = 0.01 * i;
    lx.push_back(d * d / lag);
    ly.push_back(std::log(green_eval(0.5 + d, 0.5, 0.0, lag, k, b)));
  }
  EXPECT_LT(slope(lx, ly), 0.0);
}

TEST(Green, TimeIncrementExponent) {
  const auto b = build_basis(200);
  const auto k = Diffusivity::constant(1.0);
  const double t = 0.3, r = 0.05;
  std::vector<double> lx, ly;
  for (int i = 0; i < 8; ++i) {
    const double v = r + 1e-3 * std::pow(2.0, i);
    const double diff = std::abs(green_eval(0.3, 0.4, v, t, k, b) - green_eval(0.3, 0.4, r, t, k, b));
    lx.push_back(std::log(v - r));
    ly.push_back(std::log(diff));
  }
  EXPECT_GE(slope(lx, ly), 1.0 / 3.0 - 0.05);
}
