#pragma once
// Constant-coefficient solves (d2 - a0 d1^2) v = P f, exact a0-derivatives of
// the solution family, Chebyshev interpolation in a0, and the evaluation
// operator E that reads a family at (x, a(x)).

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "roughpde/grid.hpp"

namespace roughpde {

struct EllipticityBox {
  double lambda = 0.5;
  bool deterministic_range = false;  // stochastic range [lambda, 1]; deterministic [lambda, 1/lambda]

  EllipticityBox() = default;
  explicit EllipticityBox(double l, bool det = false) : lambda(l), deterministic_range(det) {
    if (!(lambda > 0.0 && lambda <= 1.0))
      throw std::invalid_argument("lambda must lie in (0,1]");
  }
  double lo() const { return lambda; }
  double hi() const { return deterministic_range ? 1.0 / lambda : 1.0; }
  bool contains(double a0) const { return a0 >= lo() - 1e-12 && a0 <= hi() + 1e-12; }
  void check(double a0) const {
    if (!contains(a0)) {
      std::ostringstream os;
      os << "a0=" << a0 << " outside [" << lo() << ", " << hi() << "]";
      throw std::out_of_range(os.str());
    }
  }
};

// Green symbol of (d2 - a0 d1^2) in the convention f-hat(k) = int f e^{+ik.x}:
// 1/(a0 k1^2 - i k2), and 0 at k = 0 (mean-free solutions).
inline cplx green_multiplier(double k1, double k2, double a0) {
  if (k1 == 0.0 && k2 == 0.0) return cplx{0.0, 0.0};
  return 1.0 / cplx{a0 * k1 * k1, -k2};
}

namespace detail {

// Symbol of (d2 - a0 d1^2) as a grid operator. The array convention
// synthesizes with e^{+ik.x}, so the time derivative contributes +i k2 (the
// conjugate of the green_multiplier convention); on the k2 Nyquist line the
// aliased +-k2 branches average to zero imaginary part.
inline cplx heat_symbol(const GridSpec& g, int i1, int i2, double a0) {
  double k1 = g.k1(i1);
  double k2 = (2 * i2 == g.n2) ? 0.0 : g.k2(i2);
  return cplx{a0 * k1 * k1, k2};
}

// Indices where the grid operator vanishes: the mean mode and, for even n2,
// (0, n2/2) whose forcing response is a pure Nyquist sine that samples to
// zero on the grid.
inline bool heat_null_mode(const GridSpec& g, int i1, int i2) {
  return i1 == 0 && (i2 == 0 || 2 * i2 == g.n2);
}

}  // namespace detail

// Mean-free solution of (d2 - a0 d1^2) v = P f; the grid operator applied to
// the result reproduces P f exactly outside its null modes.
inline SpectralField solve_heat(const SpectralField& f, double a0) {
  SpectralField v = f;
  const GridSpec& g = v.grid;
  for (int i1 = 0; i1 < g.n1; ++i1)
    for (int i2 = 0; i2 < g.n2; ++i2) {
      if (detail::heat_null_mode(g, i1, i2)) {
        v.at(i1, i2) = cplx{0.0, 0.0};
        continue;
      }
      v.at(i1, i2) /= detail::heat_symbol(g, i1, i2, a0);
    }
  fix_self_conjugate(v);
  return v;
}

// Exact d^n v / d a0^n of the solve map: (-1)^n n! k1^{2n} / S^{n+1} with S
// the grid operator symbol; n in {1, 2}.
inline SpectralField a0_derivative(const SpectralField& f, double a0, int n) {
  if (n < 1 || n > 2) throw std::invalid_argument("a0_derivative: order must be 1 or 2");
  SpectralField v = f;
  const GridSpec& g = v.grid;
  double fact = (n == 1) ? -1.0 : 2.0;
  for (int i1 = 0; i1 < g.n1; ++i1) {
    double k1 = g.k1(i1);
    double k1p = std::pow(k1 * k1, n);
    for (int i2 = 0; i2 < g.n2; ++i2) {
      if (detail::heat_null_mode(g, i1, i2)) {
        v.at(i1, i2) = cplx{0.0, 0.0};
        continue;
      }
      cplx S = detail::heat_symbol(g, i1, i2, a0);
      cplx Sp = S;
      for (int i = 0; i < n; ++i) Sp *= S;
      v.at(i1, i2) = fact * k1p * v.at(i1, i2) / Sp;
    }
  }
  fix_self_conjugate(v);
  return v;
}

enum class FamilyField { v, dv_da0, d2v_da02, d1sq_v };

// The solution family a0 -> v(., a0) sampled at Chebyshev-Lobatto nodes of
// [lambda, 1], with exact-multiplier a0-derivatives stored per node. v-hat is
// analytic in a0 there (poles sit at a0 = i k2 / k1^2, off the real axis), so
// barycentric interpolation converges spectrally in the node count.
struct ModelFamily {
  GridSpec grid;
  double lambda = 0.5;
  std::vector<double> nodes;
  std::vector<double> weights;
  std::vector<SpectralField> v, dv, d2v, d12v;
  std::vector<PhysicalField> pv, pdv, pd2v, pd12v;
  double max_residual = 0.0;

  const std::vector<PhysicalField>& physical(FamilyField kind) const {
    switch (kind) {
      case FamilyField::v: return pv;
      case FamilyField::dv_da0: return pdv;
      case FamilyField::d2v_da02: return pd2v;
      default: return pd12v;
    }
  }
  const std::vector<SpectralField>& spectral(FamilyField kind) const {
    switch (kind) {
      case FamilyField::v: return v;
      case FamilyField::dv_da0: return dv;
      case FamilyField::d2v_da02: return d2v;
      default: return d12v;
    }
  }
};

// 13 nodes hold the midpoint interpolation error near 2e-10 for grid symbol
// families; 9 leave it above 1e-8.
inline ModelFamily build_family(const SpectralField& f, double lambda, int n_nodes = 13) {
  if (!(lambda > 0.0 && lambda <= 1.0)) throw std::invalid_argument("lambda must lie in (0,1]");
  if (n_nodes < 3) throw std::invalid_argument("build_family: n_nodes must be >= 3");
  ModelFamily fam;
  fam.grid = f.grid;
  fam.lambda = lambda;
  double mid = 0.5 * (lambda + 1.0), half = 0.5 * (1.0 - lambda);
  for (int j = n_nodes - 1; j >= 0; --j) {
    fam.nodes.push_back(mid + half * std::cos(3.14159265358979323846 * j / (n_nodes - 1)));
    double w = (j % 2 == 0) ? 1.0 : -1.0;
    if (j == 0 || j == n_nodes - 1) w *= 0.5;
    fam.weights.push_back(w);
  }
  SpectralField pf = f;
  project_mean_zero(pf);
  if (pf.grid.n2 % 2 == 0) pf.at(0, pf.grid.n2 / 2) = cplx{0.0, 0.0};
  for (double a0 : fam.nodes) {
    SpectralField vi = solve_heat(pf, a0);
    fam.v.push_back(vi);
    fam.dv.push_back(a0_derivative(pf, a0, 1));
    fam.d2v.push_back(a0_derivative(pf, a0, 2));
    fam.d12v.push_back(d1_squared(vi));

    SpectralField r = vi;
    apply_multiplier(r, [a0](double k1, double k2) { return cplx{a0 * k1 * k1, k2}; });
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < r.c.size(); ++i) {
      num += std::norm(r.c[i] - pf.c[i]);
      den += std::norm(pf.c[i]);
    }
    fam.max_residual = std::max(fam.max_residual, std::sqrt(num / std::max(den, 1e-300)));
  }
  if (fam.max_residual > 1e-12)
    throw std::runtime_error("build_family: node residual exceeds 1e-12");
  for (std::size_t i = 0; i < fam.nodes.size(); ++i) {
    fam.pv.push_back(ifft(fam.v[i]));
    fam.pdv.push_back(ifft(fam.dv[i]));
    fam.pd2v.push_back(ifft(fam.d2v[i]));
    fam.pd12v.push_back(ifft(fam.d12v[i]));
  }
  return fam;
}

// E evaluates the family field at (x, a(x)) by pointwise barycentric
// interpolation over the a0 nodes.
// E over an arbitrary list of node fields (one per fam node), evaluated at
// a(x) pointwise. evaluate_E reads the stored family; commutator and
// renormalization-table compositions pass their own node fields.
inline PhysicalField evaluate_nodes(const ModelFamily& fam,
                                    const std::vector<PhysicalField>& node_fields,
                                    const PhysicalField& a) {
  if (a.grid != fam.grid) throw std::invalid_argument("evaluate_E: grid mismatch");
  if (node_fields.size() != fam.nodes.size())
    throw std::invalid_argument("evaluate_E: one field per node required");
  std::ostringstream bad;
  int nbad = 0;
  for (int i1 = 0; i1 < a.grid.n1 && nbad < 8; ++i1)
    for (int i2 = 0; i2 < a.grid.n2 && nbad < 8; ++i2) {
      double x = a.at(i1, i2);
      if (x < fam.lambda - 1e-12 || x > 1.0 + 1e-12) {
        bad << " (" << i1 << "," << i2 << ")=" << x;
        ++nbad;
      }
    }
  if (nbad > 0)
    throw std::out_of_range("evaluate_E: a(x) outside [lambda, 1] at" + bad.str());

  std::size_t nn = fam.nodes.size();
  PhysicalField out(fam.grid);
  for (std::size_t p = 0; p < out.v.size(); ++p) {
    double x = a.v[p];
    double num = 0.0, den = 0.0;
    bool hit = false;
    for (std::size_t j = 0; j < nn; ++j) {
      double d = x - fam.nodes[j];
      if (std::abs(d) < 1e-14) {
        out.v[p] = node_fields[j].v[p];
        hit = true;
        break;
      }
      double c = fam.weights[j] / d;
      num += c * node_fields[j].v[p];
      den += c;
    }
    if (!hit) out.v[p] = num / den;
  }
  return out;
}

inline PhysicalField evaluate_E(const ModelFamily& fam, FamilyField kind, const PhysicalField& a) {
  return evaluate_nodes(fam, fam.physical(kind), a);
}

// Interpolation at a constant a0 (used for off-node checks and the solver's
// renormalization tables).
inline PhysicalField family_at(const ModelFamily& fam, FamilyField kind, double a0) {
  PhysicalField a(fam.grid);
  std::fill(a.v.begin(), a.v.end(), a0);
  return evaluate_E(fam, kind, a);
}

}  // namespace roughpde
