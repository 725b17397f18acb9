#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "roughpde/noise.hpp"
#include "roughpde/semigroup.hpp"

using namespace roughpde;

TEST_CASE("mollify: identity at T=0, constants fixed, semigroup exact", "[semigroup]") {
  CovarianceSpec spec = CovarianceSpec::product(0.4, 0.0, 0.7);
  GridSpec g{32, 64};
  SpectralField f = sample_noise(spec, g, SeedSpec{7, 0});

  SpectralField same = mollify(f, 0.0);
  for (std::size_t i = 0; i < f.c.size(); ++i) REQUIRE(same.c[i] == f.c[i]);

  SpectralField c(g);
  c.at(0, 0) = cplx{3.25, 0.0};
  SpectralField cT = mollify(c, 0.5);
  CHECK(std::abs(cT.at(0, 0) - c.at(0, 0)) == 0.0);

  for (auto [t, T] : {std::pair{0.01, 0.3}, {0.125, 0.125}, {0.004, 0.02}}) {
    SpectralField two = mollify(mollify(f, t), T);
    SpectralField one = mollify(f, T + t);
    PhysicalField a = ifft(two), b = ifft(one);
    double worst = 0.0, scale = linf(b);
    for (std::size_t i = 0; i < a.v.size(); ++i)
      worst = std::max(worst, std::abs(a.v[i] - b.v[i]));
    CHECK(worst <= 1e-13 * std::max(scale, 1.0));
  }
}

TEST_CASE("mollify computes out-of-range scales anyway", "[semigroup]") {
  GridSpec g{16, 16};
  SpectralField f(g);
  f.at(1, 0) = cplx{0.5, 0.0};
  f.at(15, 0) = cplx{0.5, 0.0};
  double T = g.t_min() / 2;
  SpectralField out = mollify(f, T);
  double k1 = g.k1(1);
  CHECK(std::abs(out.at(1, 0).real() - 0.5 * std::exp(-T * k1 * k1 * k1 * k1)) < 1e-15);
  CHECK_THROWS_AS(mollify(f, -0.1), std::invalid_argument);
}

TEST_CASE("x1_commutator on constants and single modes", "[semigroup]") {
  GridSpec g{32, 16};
  SpectralField c(g);
  c.at(0, 0) = cplx{2.0, 0.0};
  CHECK(linf(ifft(x1_commutator(c, 0.01))) < 1e-16);

  PhysicalField f(g);
  for (int i1 = 0; i1 < g.n1; ++i1)
    for (int i2 = 0; i2 < g.n2; ++i2) f.at(i1, i2) = std::cos(kTwoPi * i1 * g.h1());
  double T = 0.01;
  PhysicalField out = ifft(x1_commutator(fft(f), T));
  double k = kTwoPi;
  double amp = 4.0 * T * k * k * k * std::exp(-T * k * k * k * k);
  double worst = 0.0;
  for (int i1 = 0; i1 < g.n1; ++i1) {
    double want = amp * std::sin(kTwoPi * i1 * g.h1());
    for (int i2 = 0; i2 < g.n2; ++i2)
      worst = std::max(worst, std::abs(out.at(i1, i2) - want));
  }
  CHECK(worst < 1e-14);
}

TEST_CASE("x1_commutator gains one parabolic power over the mollification", "[semigroup]") {
  // sup_T (T^{1/4})^{1-alpha} ||[x1,(.)_T]f|| <= C sup_T (T^{1/4})^{2-alpha} ||f_T||
  CovarianceSpec spec = CovarianceSpec::product(0.4, 0.0, 0.7);
  GridSpec g{32, 256};
  double alpha = spec.alpha;
  for (int s = 0; s < 4; ++s) {
    SpectralField f = sample_noise(spec, g, SeedSpec{11, static_cast<std::uint64_t>(s)});
    double lhs = 0.0, rhs = 0.0;
    for (double T : dyadic_scales(g)) {
      double w = std::pow(std::pow(T, 0.25), 1.0 - alpha);
      lhs = std::max(lhs, w * linf(ifft(x1_commutator(f, T))));
      double w2 = std::pow(std::pow(T, 0.25), 2.0 - alpha);
      rhs = std::max(rhs, w2 * linf(ifft(mollify(f, T))));
    }
    INFO("sample " << s << " lhs " << lhs << " rhs " << rhs);
    CHECK(lhs <= 5.0 * rhs);
  }
}

TEST_CASE("mollification norm growth stays below the kernel L1 mass", "[semigroup]") {
  CovarianceSpec spec = CovarianceSpec::product(0.4, 0.0, 0.7);
  GridSpec g{32, 128};
  double worst = 0.0;
  for (int s = 0; s < 6; ++s) {
    SpectralField f = sample_noise(spec, g, SeedSpec{13, static_cast<std::uint64_t>(s)});
    for (double T : {1.0 / 256, 1.0 / 64, 1.0 / 16}) {
      double base = linf(ifft(mollify(f, T)));
      for (double t : {T, 2 * T, 8 * T})
        worst = std::max(worst, linf(ifft(mollify(f, T + t))) / base);
    }
  }
  // ||f_{T+t}||_inf <= C ||f_T||_inf with C = int |psi_1| = 1.2373 in the plane.
  CHECK(worst <= 1.31);
  CHECK(worst > 0.5);
}

TEST_CASE("dyadic ladder covers (t_min, 1]", "[semigroup]") {
  GridSpec g{64, 2048};
  auto ts = dyadic_scales(g);
  REQUIRE(!ts.empty());
  CHECK(ts.front() == 1.0);
  CHECK(ts.back() == Catch::Approx(std::pow(2.0, -17.0)));
  CHECK(ts.size() == 18);
  for (double T : ts) CHECK(T > g.t_min());
}

TEST_CASE("symbol is even in k1 so x1 psi has zero mean", "[semigroup]") {
  double d = 1e-5;
  double fd = (semigroup_hat(0.3, d, 0.7) - semigroup_hat(0.3, -d, 0.7)) / (2 * d);
  CHECK(std::abs(fd) < 1e-12);
}

TEST_CASE("kernel moments reproduce the parabolic scalings", "[semigroup]") {
  // |psi| mass: T-independent, ~1.2373 in the plane.
  std::vector<double> mass;
  for (int j = 4; j >= 1; --j) mass.push_back(kernel_moment(1, 0, 0.0, std::pow(2.0, -j)));
  for (double m : mass) CHECK(m == Catch::Approx(1.2373).epsilon(0.01));
  for (double m : mass) CHECK(m == Catch::Approx(mass[0]).epsilon(0.02));

  // d1 psi: scales like T^{-1/4}.
  std::vector<double> d1;
  for (int j = 4; j >= 1; --j) {
    double T = std::pow(2.0, -j);
    d1.push_back(kernel_moment(1, 1, 0.0, T) * std::pow(T, 0.25));
  }
  for (double m : d1) CHECK(m == Catch::Approx(d1[0]).epsilon(0.02));

  // d2 psi: scales like T^{-1/2}.
  std::vector<double> d2;
  for (int j = 4; j >= 1; --j) {
    double T = std::pow(2.0, -j);
    d2.push_back(kernel_moment(2, 1, 0.0, T) * std::sqrt(T));
  }
  for (double m : d2) CHECK(m == Catch::Approx(d2[0]).epsilon(0.02));

  // axis choice is irrelevant at order 0: same full kernel mass.
  CHECK(kernel_moment(2, 0, 0.0, 0.05) == Catch::Approx(1.2373).epsilon(0.01));

  // first parabolic moment grows like T^{1/4}.
  std::vector<double> m1;
  for (int j = 4; j >= 1; --j) {
    double T = std::pow(2.0, -j);
    m1.push_back(kernel_moment(1, 0, 1.0, T) / std::pow(T, 0.25));
  }
  for (double m : m1) CHECK(m == Catch::Approx(m1[0]).epsilon(0.02));

  CHECK_THROWS_AS(kernel_moment(3, 0, 0.0, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(kernel_moment(1, 5, 0.0, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(kernel_moment(1, 0, 0.0, 0.0), std::invalid_argument);
}
