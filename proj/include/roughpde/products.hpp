#pragma once
// Renormalization constants c1, c2 (truncated lattice sums, with exact
// a0-derivatives of the summand), renormalized products, mollifier
// commutators, the semigroup commutator identity, and reconstruction
// residuals against a model family.

#include <atomic>
#include <cmath>
#include <functional>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "roughpde/grid.hpp"
#include "roughpde/heat.hpp"
#include "roughpde/noise.hpp"
#include "roughpde/semigroup.hpp"

namespace roughpde {

namespace detail {

// d^n/da0^n Re G with G = 1/(a0 k1^2 - i k2): Re[(-1)^n n! k1^{2n} G^{n+1}].
// The n = 0 value a0 k1^2 / (a0^2 k1^4 + k2^2) is the c1 summand.
inline cplx green_power(double k1, double k2, double a0, int n) {
  cplx G = 1.0 / cplx{a0 * k1 * k1, -k2};
  cplx r = G;
  double coef = 1.0;
  for (int i = 1; i <= n; ++i) {
    r *= G;
    coef *= -static_cast<double>(i) * k1 * k1;
  }
  return coef * r;
}

inline double c1_summand(double k1, double k2, double a0, int n) {
  return green_power(k1, k2, a0, n).real();
}

// d^n/da0^n d^np/da0p^np of -k1^2 Re[G(a0) conj(G(a0p))], the c2 summand.
// At n = np = 0 this is -k1^2 (a0 a0p k1^4 + k2^2) / ((a0^2 k1^4 + k2^2)
// ((a0p)^2 k1^4 + k2^2)).
inline double c2_summand(double k1, double k2, double a0, double a0p, int n, int np) {
  cplx g = green_power(k1, k2, a0, n);
  cplx gp = green_power(k1, k2, a0p, np);
  return -k1 * k1 * (g * std::conj(gp)).real();
}

// Sum of kernel(k) * C(k) * psi-hat_eps(k)^2 over the symmetric lattice
// |m1|, |m2| <= cutoff, k = 2 pi m, skipping k = 0. The covariance and
// mollifier factors are separable, so they are tabulated per axis; the axis
// factors reproduce covariance_at exactly (same formula, same arguments).
template <class Kernel>
double renorm_sum(const CovarianceSpec& spec, double eps, int cutoff, Kernel&& kernel) {
  if (!(eps > 0.0)) throw std::invalid_argument("renormalization sums need eps > 0");
  if (cutoff < 1) throw std::invalid_argument("renormalization sums need cutoff >= 1");
  spec.validate();
  std::vector<double> w1(2 * cutoff + 1), w2(2 * cutoff + 1);
  for (int m = -cutoff; m <= cutoff; ++m) {
    double k = kTwoPi * m;
    bool banded = spec.band_limit > 0 && std::abs(m) > spec.band_limit;
    w1[m + cutoff] =
        banded ? 0.0
               : std::pow(1.0 + std::abs(k), -spec.lambda1) * std::exp(-2.0 * eps * k * k * k * k);
    double cf;
    if (spec.form == CovarianceSpec::Form::spatial_only)
      cf = (m == 0) ? 1.0 : 0.0;
    else
      cf = std::pow(1.0 + std::abs(k), -0.5 * spec.lambda2);
    w2[m + cutoff] = banded ? 0.0 : cf * std::exp(-2.0 * eps * k * k);
  }
  double total = 0.0;
  for (int m1 = -cutoff; m1 <= cutoff; ++m1) {
    double a1 = w1[m1 + cutoff];
    if (a1 == 0.0) continue;
    double k1 = kTwoPi * m1;
    double slab = 0.0;
    for (int m2 = -cutoff; m2 <= cutoff; ++m2) {
      if (m1 == 0 && m2 == 0) continue;
      double a2 = w2[m2 + cutoff];
      if (a2 == 0.0) continue;
      slab += a2 * kernel(k1, kTwoPi * m2);
    }
    total += a1 * slab;
  }
  return total;
}

inline void check_deriv_order(int n) {
  if (n < 0 || n > 2) throw std::invalid_argument("derivative order must be 0, 1, or 2");
}

}  // namespace detail

// c1(eps, a0) = sum_{k != 0} a0 k1^2 / (a0^2 k1^4 + k2^2) C(k) |psi-hat'_eps(k)|^2,
// differentiated da0 times in a0 under the sum.
inline double renorm_c1(const CovarianceSpec& spec, double eps, double a0, int cutoff,
                        int da0 = 0) {
  detail::check_deriv_order(da0);
  if (!(a0 > 0.0)) throw std::invalid_argument("renorm_c1: a0 must be positive");
  return detail::renorm_sum(spec, eps, cutoff, [a0, da0](double k1, double k2) {
    return detail::c1_summand(k1, k2, a0, da0);
  });
}

// c2(eps, a0, a0p) = -sum_{k != 0} k1^2 (a0 a0p k1^4 + k2^2) /
// ((a0^2 k1^4 + k2^2)((a0p)^2 k1^4 + k2^2)) C(k) |psi-hat'_eps(k)|^2, the
// expectation of v_eps(x, a0) d1^2 v_eps(x, a0p); not symmetric under
// derivatives. da0/da0p differentiate the summand in a0/a0p.
inline double renorm_c2(const CovarianceSpec& spec, double eps, double a0, double a0p, int cutoff,
                        int da0 = 0, int da0p = 0) {
  detail::check_deriv_order(da0);
  detail::check_deriv_order(da0p);
  if (!(a0 > 0.0) || !(a0p > 0.0)) throw std::invalid_argument("renorm_c2: a0 must be positive");
  return detail::renorm_sum(spec, eps, cutoff, [a0, a0p, da0, da0p](double k1, double k2) {
    return detail::c2_summand(k1, k2, a0, a0p, da0, da0p);
  });
}

// Tables of c1(eps, a0) and c2(eps, a0, a0p) at one truncation.
struct RenormConstants {
  CovarianceSpec spec;
  int truncation = 0;
  std::vector<double> eps_list, a0_list, a0p_list;
  std::map<std::pair<double, double>, double> c1;
  std::map<std::tuple<double, double, double>, double> c2;

  double c1_at(double eps, double a0) const {
    auto it = c1.find({eps, a0});
    if (it == c1.end()) throw std::out_of_range("RenormConstants: no c1 entry for (eps, a0)");
    return it->second;
  }
  double c2_at(double eps, double a0, double a0p) const {
    auto it = c2.find({eps, a0, a0p});
    if (it == c2.end()) throw std::out_of_range("RenormConstants: no c2 entry");
    return it->second;
  }

  void write_csv(std::ostream& os) const {
    os << "eps,a0,a0p,c1,c2,cutoff\n";
    char buf[256];
    for (double e : eps_list)
      for (double a : a0_list)
        for (double ap : a0p_list) {
          std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%d\n", e, a, ap,
                        c1_at(e, a), c2_at(e, a, ap), truncation);
          os << buf;
        }
  }
};

// Fills both tables; entries are independent, so the eps slices run on a
// small thread pool. The merged result is deterministic.
inline RenormConstants build_renorm_table(const CovarianceSpec& spec,
                                          const std::vector<double>& eps_list,
                                          const std::vector<double>& a0_list,
                                          const std::vector<double>& a0p_list, int cutoff) {
  if (eps_list.empty() || a0_list.empty() || a0p_list.empty())
    throw std::invalid_argument("build_renorm_table: empty axis list");
  RenormConstants t;
  t.spec = spec;
  t.truncation = cutoff;
  t.eps_list = eps_list;
  t.a0_list = a0_list;
  t.a0p_list = a0p_list;

  struct Slice {
    std::vector<double> c1v;
    std::vector<double> c2v;
  };
  std::vector<Slice> slices(eps_list.size());
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= eps_list.size()) return;
      Slice& s = slices[i];
      for (double a : a0_list) {
        s.c1v.push_back(renorm_c1(spec, eps_list[i], a, cutoff));
        for (double ap : a0p_list) s.c2v.push_back(renorm_c2(spec, eps_list[i], a, ap, cutoff));
      }
    }
  };
  unsigned n_threads = std::min<unsigned>(std::max(1u, std::thread::hardware_concurrency()),
                                          static_cast<unsigned>(eps_list.size()));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < n_threads; ++i) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();

  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    std::size_t i1 = 0, i2 = 0;
    for (double a : a0_list) {
      t.c1[{eps_list[i], a}] = slices[i].c1v[i1++];
      for (double ap : a0p_list) t.c2[{eps_list[i], a, ap}] = slices[i].c2v[i2++];
    }
  }
  return t;
}

// Pointwise product of the two fields minus the constant c.
inline PhysicalField renorm_product(const SpectralField& g, const SpectralField& h, double c) {
  if (!(g.grid == h.grid)) throw std::invalid_argument("renorm_product: grid mismatch");
  PhysicalField pg = ifft(g), ph = ifft(h);
  PhysicalField out(g.grid);
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] = pg.v[i] * ph.v[i] - c;
  return out;
}

struct CommutatorField {
  double T = 0.0;
  PhysicalField field;
  std::string pairing;
  double a0 = 0.0, a0p = 0.0, eps = 0.0;
  bool renormalized = false;
};

// [g, (.)_T] applied to h against the renormalized product:
// g * (h)_T - (gh_renorm)_T.
inline CommutatorField commutator(const PhysicalField& g, const SpectralField& h,
                                  const PhysicalField& gh_renorm, double T) {
  if (!(g.grid == h.grid) || !(g.grid == gh_renorm.grid))
    throw std::invalid_argument("commutator: grid mismatch");
  CommutatorField out;
  out.T = T;
  out.field = PhysicalField(g.grid);
  PhysicalField hT = ifft(mollify(h, T));
  PhysicalField ghT = ifft(mollify(fft(gh_renorm), T));
  for (std::size_t i = 0; i < out.field.v.size(); ++i)
    out.field.v[i] = g.v[i] * hT.v[i] - ghT.v[i];
  return out;
}

namespace detail {

// (.)_s of a physical field; s = 0 skips the transform pair so the identity
// case stays bit-exact.
inline PhysicalField smooth_physical(const PhysicalField& f, double s) {
  if (s == 0.0) return f;
  return ifft(mollify(fft(f), s));
}

}  // namespace detail

// Max-norm defect of [g,(.)_{t+T}]<>h - ([g,(.)_T]<>h)_t = [g,(.)_t](h_T);
// an algebraic identity of the definitions, so the value is roundoff.
inline double semigroup_commutator_residual(const PhysicalField& g, const SpectralField& h,
                                            const PhysicalField& gh_renorm, double t, double T) {
  CommutatorField big = commutator(g, h, gh_renorm, t + T);
  CommutatorField inner = commutator(g, h, gh_renorm, T);
  PhysicalField inner_t = detail::smooth_physical(inner.field, t);

  SpectralField hT = mollify(h, T);
  PhysicalField phT = ifft(hT);
  PhysicalField phTt = ifft(mollify(hT, t));
  PhysicalField g_hT(g.grid);
  for (std::size_t i = 0; i < g_hT.v.size(); ++i) g_hT.v[i] = g.v[i] * phT.v[i];
  PhysicalField g_hT_t = detail::smooth_physical(g_hT, t);

  double worst = 0.0;
  for (std::size_t i = 0; i < g.v.size(); ++i) {
    double rhs = g.v[i] * phTt.v[i] - g_hT_t.v[i];
    worst = std::max(worst, std::abs(big.field.v[i] - inner_t.v[i] - rhs));
  }
  return worst;
}

// Max-norm of u f_T - (u<>f)_T - sigma(x) E[v,(.)_T]<>f - nu(x) [x1,(.)_T]f.
// Without an explicit candidate for u<>f, the classical product u*f is used,
// which is only meaningful for band-limited (smooth) f; rough f requires the
// caller to supply the candidate.
inline double reconstruction_residual(
    const PhysicalField& u, const PhysicalField& sigma, const PhysicalField& a,
    const PhysicalField& nu, const ModelFamily& family,
    const std::function<CommutatorField(double, double)>& comm_family, const SpectralField& f,
    double T, const PhysicalField* candidate_uf = nullptr) {
  const GridSpec& g = u.grid;
  if (!(g == f.grid) || !(g == sigma.grid) || !(g == a.grid) || !(g == nu.grid) ||
      !(g == family.grid))
    throw std::invalid_argument("reconstruction_residual: grid mismatch");

  PhysicalField uf(g);
  if (candidate_uf) {
    if (!(g == candidate_uf->grid))
      throw std::invalid_argument("reconstruction_residual: grid mismatch");
    uf = *candidate_uf;
  } else {
    double top = 0.0;
    for (const cplx& c : f.c) top = std::max(top, std::abs(c));
    for (int i1 = 0; i1 < g.n1; ++i1)
      for (int i2 = 0; i2 < g.n2; ++i2)
        if ((std::abs(g.m1(i1)) > 8 || std::abs(g.m2(i2)) > 8) &&
            std::abs(f.at(i1, i2)) > 1e-12 * top)
          throw std::invalid_argument(
              "reconstruction_residual: rough f requires a candidate for u<>f");
    PhysicalField pf = ifft(f);
    for (std::size_t i = 0; i < uf.v.size(); ++i) uf.v[i] = u.v[i] * pf.v[i];
  }

  PhysicalField fT = ifft(mollify(f, T));
  PhysicalField ufT = ifft(mollify(fft(uf), T));

  std::vector<PhysicalField> node_comms;
  node_comms.reserve(family.nodes.size());
  for (double a0 : family.nodes) node_comms.push_back(comm_family(a0, T).field);
  PhysicalField ecomm = evaluate_nodes(family, node_comms, a);
  PhysicalField x1c = ifft(x1_commutator(f, T));

  double worst = 0.0;
  for (std::size_t i = 0; i < u.v.size(); ++i) {
    double r = u.v[i] * fT.v[i] - ufT.v[i] - sigma.v[i] * ecomm.v[i] - nu.v[i] * x1c.v[i];
    worst = std::max(worst, std::abs(r));
  }
  return worst;
}

}  // namespace roughpde
