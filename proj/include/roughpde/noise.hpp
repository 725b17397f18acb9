#pragma once
// Stationary periodic Gaussian noise: covariance spectra, admissibility,
// sampling, and mollification at fixed scale epsilon.

#include <cmath>
#include <stdexcept>
#include <string>

#include "roughpde/grid.hpp"
#include "roughpde/rng.hpp"

namespace roughpde {

// Product-form spectrum C(k) = (1+|k1|)^{-lambda1} (1+|k2|)^{-lambda2/2} or its
// spatially one-dimensional cousin delta_{k2,0} (1+|k1|)^{-lambda1}; k = 2*pi*m
// are raw wavenumbers and C(0) = 0 always. alpha is the parabolic regularity
// exponent the noise is used at: f lives in C^{alpha-2}.
struct CovarianceSpec {
  enum class Form { product, spatial_only };

  Form form = Form::product;
  double lambda1 = 0.4;
  double lambda2 = 0.0;
  double alpha = 0.7;
  int band_limit = 0;  // if > 0, modes with |m1| or |m2| beyond it carry no variance

  static double critical_alpha(Form form, double l1, double l2) {
    return form == Form::product ? 0.5 * (1.0 + l1 + l2) : 0.5 * (3.0 + l1);
  }

  static CovarianceSpec product(double l1, double l2, double a = -1.0) {
    CovarianceSpec s;
    s.form = Form::product;
    s.lambda1 = l1;
    s.lambda2 = l2;
    s.alpha = a > 0 ? a : std::min(critical_alpha(s.form, l1, l2), 0.95);
    s.validate();
    return s;
  }

  static CovarianceSpec spatial(double l1, double a = -1.0) {
    CovarianceSpec s;
    s.form = Form::spatial_only;
    s.lambda1 = l1;
    s.lambda2 = 0.0;
    s.alpha = a > 0 ? a : std::min(critical_alpha(s.form, l1, 0.0), 0.95);
    s.validate();
    return s;
  }

  // Regularity admissibility in the inequality form: for the product spectrum
  // lambda1 + lambda2 >= -1 + 2 alpha, lambda1 > -3 + 2 alpha,
  // lambda2 > -2 + 2 alpha; spatially one-dimensional noise needs
  // lambda1 >= -3 + 2 alpha.
  bool admissible() const {
    if (!(alpha > 0.0 && alpha < 1.0)) return false;
    if (form == Form::product) {
      return lambda1 + lambda2 >= -1.0 + 2.0 * alpha && lambda1 > -3.0 + 2.0 * alpha &&
             lambda2 > -2.0 + 2.0 * alpha;
    }
    return lambda1 >= -3.0 + 2.0 * alpha;
  }

  // Finiteness of the dichotomy sum  sum_k k1^2/(k1^4+k2^2) C(k): decides
  // whether the renormalization constants converge as eps -> 0.
  bool a2_finite() const {
    if (form == Form::product)
      return lambda1 + lambda2 > 1.0 && lambda1 > -1.0 && lambda2 > -2.0;
    return lambda1 > -1.0;
  }

  void validate() const {
    if (!admissible())
      throw std::invalid_argument("CovarianceSpec: inadmissible (lambda1, lambda2, alpha) triple");
  }
};

// Spectrum value at wavenumber k = (k1, k2) = 2*pi*(m1, m2).
inline double covariance_at(const CovarianceSpec& spec, double k1, double k2) {
  if (k1 == 0.0 && k2 == 0.0) return 0.0;
  if (spec.band_limit > 0) {
    double b = kTwoPi * spec.band_limit;
    if (std::abs(k1) > b + 1e-9 || std::abs(k2) > b + 1e-9) return 0.0;
  }
  if (spec.form == CovarianceSpec::Form::spatial_only) {
    if (k2 != 0.0) return 0.0;
    return std::pow(1.0 + std::abs(k1), -spec.lambda1);
  }
  return std::pow(1.0 + std::abs(k1), -spec.lambda1) *
         std::pow(1.0 + std::abs(k2), -0.5 * spec.lambda2);
}

// Draws f with f-hat(k) = sqrt(C(k)) Z_k, Z Hermitian complex standard normal
// (<|Z_k|^2> = 1), self-conjugate modes real with variance 1. Counter-based:
// bit-identical for a given SeedSpec no matter the evaluation schedule.
inline SpectralField sample_noise(const CovarianceSpec& spec, const GridSpec& g,
                                  const SeedSpec& seed) {
  spec.validate();
  CounterRng rng(seed);
  SpectralField F(g);
  for (int i1 = 0; i1 < g.n1; ++i1) {
    int j1 = (g.n1 - i1) % g.n1;
    for (int i2 = 0; i2 < g.n2; ++i2) {
      int j2 = (g.n2 - i2) % g.n2;
      bool self = (i1 == j1 && i2 == j2);
      bool canonical = self || std::make_pair(i1, i2) < std::make_pair(j1, j2);
      if (!canonical) continue;
      double amp = std::sqrt(covariance_at(spec, g.k1(i1), g.k2(i2)));
      if (amp == 0.0) continue;
      std::uint64_t counter = static_cast<std::uint64_t>(i1) * g.n2 + i2;
      double a, b;
      rng.gaussian_pair(counter, a, b);
      if (self) {
        F.at(i1, i2) = cplx{amp * a, 0.0};
      } else {
        cplx z = amp * cplx{a, b} / std::sqrt(2.0);
        F.at(i1, i2) = z;
        F.at(j1, j2) = std::conj(z);
      }
    }
  }
  return F;
}

// Default mollifier is the semigroup kernel itself, psi' = psi_1, so
// f_eps = f_{T=eps}.
inline double mollifier_hat(double eps, double k1, double k2) {
  return std::exp(-eps * (k1 * k1 * k1 * k1 + k2 * k2));
}

// Gaussian-product alternative with the same parabolic scaling (x1 scale
// eps^{1/4}, x2 scale eps^{1/2}); only exercised by the kernel-independence
// sanity check.
inline double gaussian_mollifier_hat(double eps, double k1, double k2) {
  return std::exp(-std::sqrt(eps) * k1 * k1 - eps * k2 * k2);
}

enum class MollifierKind { semigroup, gaussian_product };

inline SpectralField mollify_noise(const SpectralField& f, double eps,
                                   MollifierKind kind = MollifierKind::semigroup) {
  SpectralField out = f;
  if (eps == 0.0) return out;
  if (kind == MollifierKind::semigroup)
    apply_multiplier(out, [eps](double k1, double k2) { return mollifier_hat(eps, k1, k2); });
  else
    apply_multiplier(out,
                     [eps](double k1, double k2) { return gaussian_mollifier_hat(eps, k1, k2); });
  return out;
}

}  // namespace roughpde
