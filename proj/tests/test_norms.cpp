#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "roughpde/noise.hpp"
#include "roughpde/norms.hpp"

using namespace roughpde;

TEST_CASE("parabolic distance on the torus", "[norms]") {
  CHECK(parabolic_distance(0.3, 0.8, 0.3, 0.8) == 0.0);
  CHECK(parabolic_distance(0.0, 0.0, 0.25, 0.25) == Catch::Approx(0.75));
  CHECK(parabolic_distance(0.0, 0.0, 0.9, 0.0) == Catch::Approx(0.1));
  CHECK(parabolic_distance(0.0, 0.0, 0.0, 0.9) == Catch::Approx(std::sqrt(0.1)));
  // symmetry
  CHECK(parabolic_distance(0.1, 0.7, 0.6, 0.2) == parabolic_distance(0.6, 0.2, 0.1, 0.7));
}

TEST_CASE("holder seminorm: constants, homogeneity, sampled vs exhaustive", "[norms]") {
  GridSpec g{32, 32};
  PhysicalField c(g);
  std::fill(c.v.begin(), c.v.end(), 3.7);
  CHECK(holder_seminorm(c, 0.7) == 0.0);

  PhysicalField u(g);
  for (int i1 = 0; i1 < g.n1; ++i1)
    for (int i2 = 0; i2 < g.n2; ++i2) u.at(i1, i2) = std::cos(kTwoPi * i1 * g.h1());

  // exhaustive max over all pairs
  double exact = 0.0;
  for (int i1 = 0; i1 < g.n1; ++i1)
    for (int i2 = 0; i2 < g.n2; ++i2)
      for (int j1 = 0; j1 < g.n1; ++j1)
        for (int j2 = 0; j2 < g.n2; ++j2) {
          if (i1 == j1 && i2 == j2) continue;
          double d = parabolic_distance(i1 * g.h1(), i2 * g.h2(), j1 * g.h1(), j2 * g.h2());
          exact = std::max(exact, std::abs(u.at(i1, i2) - u.at(j1, j2)) / std::pow(d, 0.7));
        }
  double sampled = holder_seminorm(u, 0.7);
  INFO("sampled " << sampled << " exhaustive " << exact);
  CHECK(sampled <= exact + 1e-12);
  CHECK(sampled >= 0.9 * exact);

  PhysicalField u2 = u;
  for (double& x : u2.v) x *= 2.0;
  CHECK(holder_seminorm(u2, 0.7) == Catch::Approx(2.0 * sampled).epsilon(1e-12));

  PhysicalField ush = u;
  for (double& x : ush.v) x += 11.0;
  CHECK(holder_seminorm(ush, 0.7) == Catch::Approx(sampled).epsilon(1e-12));

  CHECK_THROWS_AS(holder_seminorm(u, 1.5), std::invalid_argument);
}

TEST_CASE("negative norm: zero field, closed form, monotonicity", "[norms]") {
  GridSpec g{32, 64};
  SpectralField z(g);
  CHECK(negative_norm(z, 0.7) == 0.0);

  SpectralField f(g);
  f.at(1, 0) = cplx{1.0, 0.0};
  f.at(g.n1 - 1, 0) = cplx{1.0, 0.0};
  double alpha = 0.7;
  auto ladder = dyadic_scales(g);
  double want = 0.0;
  double k4 = std::pow(kTwoPi, 4.0);
  for (double T : ladder)
    want = std::max(want, std::pow(std::pow(T, 0.25), 2.0 - alpha) * 2.0 * std::exp(-T * k4));
  CHECK(negative_norm(f, alpha, ladder) == Catch::Approx(want).epsilon(1e-12));

  SpectralField h = f;
  h.at(1, 0) *= 1.5;
  h.at(g.n1 - 1, 0) *= 1.5;
  h.at(2, 1) = cplx{0.2, 0.0};
  h.at(g.n1 - 2, g.n2 - 1) = cplx{0.2, 0.0};
  CHECK(negative_norm(h, alpha) >= negative_norm(f, alpha));

  CHECK_THROWS_AS(negative_norm(f, alpha, std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("modelledness: exact model gives machine-zero M", "[norms]") {
  GridSpec g{32, 64};
  CovarianceSpec spec = CovarianceSpec::product(0.4, 0.0, 0.7);
  SpectralField f = sample_noise(spec, g, SeedSpec{61, 0});
  ModelFamily fam = build_family(f, 0.5, 7);

  double sigma0 = 1.3, a0 = fam.nodes[3], shift = 0.45;
  PhysicalField u(g);
  for (std::size_t i = 0; i < u.v.size(); ++i) u.v[i] = sigma0 * fam.pv[3].v[i] + shift;
  PhysicalField a(g), s(g);
  std::fill(a.v.begin(), a.v.end(), a0);
  std::fill(s.v.begin(), s.v.end(), sigma0);
  ModellednessResult res = modelledness(u, fam, a, s, 0.7);
  CHECK(res.M <= 1e-9);
  REQUIRE(!res.table.empty());

  // constant shift invariance
  PhysicalField u2 = u;
  for (double& x : u2.v) x += 2.2;
  CHECK(modelledness(u2, fam, a, s, 0.7).M == Catch::Approx(res.M).margin(1e-12));
}

TEST_CASE("modelledness reduces to a C^{2 alpha} seminorm when the family vanishes", "[norms]") {
  GridSpec g{32, 32};
  SpectralField zero(g);
  ModelFamily fam = build_family(zero, 0.5, 5);
  PhysicalField u(g);
  for (int i1 = 0; i1 < g.n1; ++i1)
    for (int i2 = 0; i2 < g.n2; ++i2) u.at(i1, i2) = std::sin(kTwoPi * i1 * g.h1()) / kTwoPi;
  PhysicalField a(g), s(g);
  std::fill(a.v.begin(), a.v.end(), 0.75);
  std::fill(s.v.begin(), s.v.end(), 1.0);
  double alpha = 0.7;
  ModellednessParams mp;
  ModellednessResult res = modelledness(u, fam, a, s, alpha, mp);
  CHECK(res.M > 0.0);

  // direct computation with the Taylor affine part c = u(x0), nu = u'(x0)
  double direct = 0.0;
  for (int b1 = 0; b1 < g.n1; b1 += mp.base_stride)
    for (int b2 = 0; b2 < g.n2; b2 += mp.base_stride) {
      double du = std::cos(kTwoPi * b1 * g.h1());
      for (int r = mp.n_radii - 1; r >= 0; --r) {
        double R = mp.r_max * std::pow(2.0, -r);
        int M1 = static_cast<int>(std::floor(R / g.h1()));
        double sup = 0.0;
        int count = 0;
        for (int o1 = -M1; o1 <= M1; ++o1) {
          double rel1 = o1 * g.h1();
          double rem = R - std::abs(rel1);
          if (rem < 0) continue;
          int M2 = std::min(static_cast<int>(std::floor(rem * rem / g.h2())), g.n2 / 2);
          for (int o2 = -M2; o2 <= M2; ++o2) {
            int y1 = ((b1 + o1) % g.n1 + g.n1) % g.n1;
            double val = std::sin(kTwoPi * y1 * g.h1()) / kTwoPi;
            double base = std::sin(kTwoPi * b1 * g.h1()) / kTwoPi;
            sup = std::max(sup, std::abs(val - base - du * rel1));
            ++count;
          }
        }
        if (count >= 2) direct = std::max(direct, sup / std::pow(R, 2 * alpha));
      }
    }
  INFO("LS-ball M " << res.M << " Taylor-ball " << direct);
  CHECK(res.M >= 0.3 * direct);
  CHECK(res.M <= 1.2 * direct);

  // nu at base points approximates u' = cos(2 pi x1)
  double worst = 0.0;
  for (int b1 = 0; b1 < g.n1; b1 += mp.base_stride)
    worst = std::max(worst, std::abs(res.nu.at(b1, 0) - std::cos(kTwoPi * b1 * g.h1())));
  CHECK(worst < 0.25);
}

TEST_CASE("scaling_fit recovers power laws", "[norms]") {
  std::vector<std::pair<double, double>> exact;
  for (int j = 2; j <= 8; ++j) {
    double T = std::pow(2.0, -j);
    exact.emplace_back(T, std::pow(std::pow(T, 0.25), -1.3));
  }
  ScalingReport rep = scaling_fit(exact, -1.3, 0.1);
  CHECK(rep.slope == Catch::Approx(-1.3).margin(1e-12));
  CHECK(rep.r2 == Catch::Approx(1.0).margin(1e-12));
  CHECK(rep.pass);

  std::vector<std::pair<double, double>> flat;
  for (int j = 2; j <= 6; ++j) flat.emplace_back(std::pow(2.0, -j), 2.5);
  CHECK(scaling_fit(flat, 0.0, 0.01).slope == Catch::Approx(0.0).margin(1e-12));

  // 5% multiplicative noise
  CounterRng rng(SeedSpec{77, 0, "fitnoise"});
  std::vector<std::pair<double, double>> noisy;
  for (int j = 2; j <= 12; ++j) {
    double T = std::pow(2.0, -j);
    double v = std::pow(std::pow(T, 0.25), -0.6) * (1.0 + 0.05 * (2.0 * rng.uniform(j) - 1.0));
    noisy.emplace_back(T, v);
  }
  ScalingReport nrep = scaling_fit(noisy, -0.6, 0.05);
  CHECK(std::abs(nrep.slope + 0.6) <= 0.05);

  CHECK_THROWS_AS(scaling_fit({{0.5, 1.0}, {0.25, 1.0}, {0.125, 1.0}}, 0.0, 0.1),
                  std::invalid_argument);
  std::vector<std::pair<double, double>> badv{{0.5, 1.0}, {0.25, -1.0}, {0.125, 1.0}, {0.0625, 1.0}};
  CHECK_THROWS_AS(scaling_fit(badv, 0.0, 0.1), std::invalid_argument);
}

TEST_CASE("negative norm of d1^2 w + d2 z is controlled by Hölder norms", "[norms]") {
  GridSpec g{32, 64};
  double alpha = 0.7;
  double worst = 0.0;
  for (int s = 0; s < 4; ++s) {
    // random smooth low-mode fields
    CounterRng rng(SeedSpec{88, static_cast<std::uint64_t>(s), "normpair"});
    SpectralField W(g), Z(g);
    std::uint64_t c = 0;
    for (int m1 = -3; m1 <= 3; ++m1)
      for (int m2 = -3; m2 <= 3; ++m2) {
        if (m1 == 0 && m2 == 0) continue;
        double g1, g2;
        rng.gaussian_pair(c++, g1, g2);
        int i1 = (m1 + g.n1) % g.n1, i2 = (m2 + g.n2) % g.n2;
        W.at(i1, i2) += 0.05 * cplx{g1, g2};
        rng.gaussian_pair(c++, g1, g2);
        Z.at(i1, i2) += 0.05 * cplx{g1, g2};
      }
    hermitian_symmetrize(W);
    hermitian_symmetrize(Z);
    SpectralField D = d1_squared(W);
    SpectralField dz = Z;
    apply_multiplier(dz, [](double, double k2) { return cplx{0.0, k2}; });
    for (std::size_t i = 0; i < D.c.size(); ++i) D.c[i] += dz.c[i];
    double lhs = negative_norm(D, alpha);
    double rhs = holder_seminorm(ifft(W), alpha) + holder_seminorm(ifft(Z), alpha);
    worst = std::max(worst, lhs / rhs);
  }
  INFO("derivative-pair constant " << worst);
  CHECK(worst < 20.0);
}
