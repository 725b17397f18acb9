#pragma once
// The mollification semigroup (.)_T with symbol exp(-T(k1^4+k2^2)), its
// x1-commutator, dyadic scale ladders, and kernel moment quadratures.

#include <cmath>
#include <cstdio>
#include <mutex>
#include <set>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "roughpde/grid.hpp"

namespace roughpde {

inline double semigroup_hat(double T, double k1, double k2) {
  return std::exp(-T * (k1 * k1 * k1 * k1 + k2 * k2));
}

namespace detail {

// T outside (t_min, 1] is computed anyway; say so once per (grid, T).
inline void warn_scale_once(const GridSpec& g, double T) {
  static std::mutex mu;
  static std::set<std::tuple<int, int, double>> seen;
  std::lock_guard<std::mutex> lock(mu);
  if (seen.emplace(g.n1, g.n2, T).second) {
    std::fprintf(stderr,
                 "mollify: T=%.6g outside resolvable range (T_min=%.6g, grid %dx%d); "
                 "computed anyway\n",
                 T, g.t_min(), g.n1, g.n2);
  }
}

}  // namespace detail

// Mode-wise multiplication by exp(-T(k1^4+k2^2)). Exact semigroup:
// mollify(mollify(f,t),T) = mollify(f,T+t) in spectral arithmetic.
inline SpectralField mollify(const SpectralField& f, double T) {
  if (T < 0.0) throw std::invalid_argument("mollify: T must be nonnegative");
  if (T == 0.0) return f;
  if (!(T > f.grid.t_min() && T <= 1.0)) detail::warn_scale_once(f.grid, T);
  SpectralField out = f;
  apply_multiplier(out, [T](double k1, double k2) { return semigroup_hat(T, k1, k2); });
  return out;
}

// [x1, (.)_T] f: multiplier -4 i T k1^3 exp(-T(k1^4+k2^2)), the Fourier
// transform of x1 psi_T. Vanishes at k = 0, so constants map to zero.
inline SpectralField x1_commutator(const SpectralField& f, double T) {
  SpectralField out = f;
  apply_multiplier(out, [T](double k1, double k2) {
    return cplx{0.0, -4.0 * T * k1 * k1 * k1} * semigroup_hat(T, k1, k2);
  });
  return out;
}

// All in-range dyadic scales T = 2^-j, largest first.
inline std::vector<double> dyadic_scales(const GridSpec& g) {
  std::vector<double> out;
  for (double T = 1.0; T > g.t_min(); T *= 0.5) out.push_back(T);
  return out;
}

namespace detail {

// 1-d kernel values by spectral synthesis on [-L/2, L/2): the symbol is
// sampled at k = 2 pi m / L, which periodizes the continuum kernel with
// period L. L covers 24 parabolic scales, enough for the slowly decaying
// quartic tails (truncation error ~1e-5 relative).
inline std::vector<double> kernel_line(double L, int n, double T, int order, bool quartic) {
  GridSpec g{n, 1};
  SpectralField F(g);
  for (int i = 0; i < n; ++i) {
    double k = kTwoPi * g.m1(i) / L;
    cplx ik{0.0, k};
    cplx sym{1.0, 0.0};
    for (int o = 0; o < order; ++o) sym *= ik;
    double damp = quartic ? std::exp(-T * k * k * k * k) : std::exp(-T * k * k);
    F.at(i, 0) = sym * damp / L;
  }
  return ifft(F).v;
}

}  // namespace detail

// Numerical integral of |d^order psi_T| d(0,x)^alpha over the plane, axis 1
// carrying the quartic factor and axis 2 the heat factor. The kernel is the
// product of two one dimensional kernels, so the quadrature is an outer
// product of two spectral syntheses on enlarged domains (no periodic wrap).
inline double kernel_moment(int axis, int order, double alpha, double T) {
  if (order < 0 || order > 4) throw std::invalid_argument("kernel_moment: order must be in 0..4");
  if (axis != 1 && axis != 2) throw std::invalid_argument("kernel_moment: axis must be 1 or 2");
  if (!(T > 0.0)) throw std::invalid_argument("kernel_moment: T must be positive");
  double s1 = std::pow(T, 0.25), s2 = std::sqrt(T);
  double L1 = std::max(1.0, std::ceil(24.0 * s1));
  double L2 = std::max(1.0, std::ceil(24.0 * s2));
  const int n = 4096;
  std::vector<double> u = detail::kernel_line(L1, n, T, axis == 1 ? order : 0, true);
  std::vector<double> w = detail::kernel_line(L2, n, T, axis == 2 ? order : 0, false);
  std::vector<double> x1(n), x2(n);
  for (int i = 0; i < n; ++i) {
    double a = i * (L1 / n);
    x1[i] = (a >= L1 / 2) ? a - L1 : a;
    double b = i * (L2 / n);
    x2[i] = (b >= L2 / 2) ? b - L2 : b;
  }
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    double ui = std::abs(u[i]);
    if (ui == 0.0) continue;
    double d1 = std::abs(x1[i]);
    for (int j = 0; j < n; ++j) {
      double d = d1 + std::sqrt(std::abs(x2[j]));
      total += ui * std::abs(w[j]) * (alpha == 0.0 ? 1.0 : std::pow(d, alpha));
    }
  }
  return total * (L1 / n) * (L2 / n);
}

}  // namespace roughpde
