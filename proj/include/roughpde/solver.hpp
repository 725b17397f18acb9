#pragma once
// Picard iteration for the regularized renormalized quasilinear equation,
// epsilon-continuation, and an independent classical time-stepping check.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "roughpde/grid.hpp"
#include "roughpde/heat.hpp"
#include "roughpde/noise.hpp"
#include "roughpde/norms.hpp"
#include "roughpde/products.hpp"
#include "roughpde/semigroup.hpp"

namespace roughpde {

// Nonlinearities a, sigma with derivatives up to third order. The bounds
// lambda <= a <= 1, |sigma| <= 1 and derivative sups <= 1/lambda are the
// standing assumptions; validate() enforces them by dense sampling.
struct NonlinearityPair {
  std::function<double(double)> a, da, d2a, d3a;
  std::function<double(double)> sigma, dsigma, d2sigma, d3sigma;
  double lambda = 0.5;

  // a = 3/4 + tanh(u)/4, sigma = tanh(u + shift). The shift breaks the odd
  // symmetry of tanh; without it sigma(0) = 0 and zero data stays at zero.
  static NonlinearityPair defaults(double sigma_shift = 0.0) {
    NonlinearityPair nl;
    nl.lambda = 0.5;
    nl.a = [](double u) { return 0.75 + 0.25 * std::tanh(u); };
    nl.da = [](double u) {
      double t = std::tanh(u);
      return 0.25 * (1.0 - t * t);
    };
    nl.d2a = [](double u) {
      double t = std::tanh(u);
      return -0.5 * t * (1.0 - t * t);
    };
    nl.d3a = [](double u) {
      double t = std::tanh(u);
      return -0.5 * (1.0 - t * t) * (1.0 - 3.0 * t * t);
    };
    nl.sigma = [sigma_shift](double u) { return std::tanh(u + sigma_shift); };
    nl.dsigma = [sigma_shift](double u) {
      double t = std::tanh(u + sigma_shift);
      return 1.0 - t * t;
    };
    nl.d2sigma = [sigma_shift](double u) {
      double t = std::tanh(u + sigma_shift);
      return -2.0 * t * (1.0 - t * t);
    };
    nl.d3sigma = [sigma_shift](double u) {
      double t = std::tanh(u + sigma_shift);
      return -2.0 * (1.0 - t * t) * (1.0 - 3.0 * t * t);
    };
    return nl;
  }

  // Dense sampling on [-10, 10] plus tail monotonicity of |a'|, |sigma'| at
  // the sampled ends, standing in for the bound at infinity.
  void validate() const {
    if (!(lambda > 0.0 && lambda <= 1.0))
      throw std::invalid_argument("NonlinearityPair: lambda must lie in (0, 1]");
    for (const auto* fn : {&a, &da, &d2a, &d3a, &sigma, &dsigma, &d2sigma, &d3sigma})
      if (!*fn) throw std::invalid_argument("NonlinearityPair: all eight functions must be set");
    const double bound = 1.0 / lambda + 1e-9;
    const double tol = 1e-9;
    const int n = 20001;
    for (int i = 0; i < n; ++i) {
      double u = -10.0 + 20.0 * i / (n - 1);
      double av = a(u);
      if (!(av >= lambda - tol && av <= 1.0 + tol))
        throw std::invalid_argument("NonlinearityPair: a must map into [lambda, 1]");
      double sv = sigma(u);
      if (!(std::abs(sv) <= 1.0 + tol))
        throw std::invalid_argument("NonlinearityPair: |sigma| must stay <= 1");
      for (double d : {da(u), d2a(u), d3a(u), dsigma(u), d2sigma(u), d3sigma(u)})
        if (!(std::abs(d) <= bound))
          throw std::invalid_argument("NonlinearityPair: derivative sups must stay <= 1/lambda");
    }
    for (double s : {-1.0, 1.0}) {
      double prev_a = std::abs(da(s * 8.0)), prev_s = std::abs(dsigma(s * 8.0));
      for (double u = 8.5; u <= 10.0; u += 0.5) {
        double ca = std::abs(da(s * u)), cs = std::abs(dsigma(s * u));
        if (ca > prev_a + tol || cs > prev_s + tol)
          throw std::invalid_argument("NonlinearityPair: derivatives must decay in the tails");
        prev_a = ca;
        prev_s = cs;
      }
    }
  }
};

enum class A0Policy { mean_of_a, fixed };

struct SolveParams {
  double eta = 1.0;                           // noise intensity multiplying f
  A0Policy a0_star_policy = A0Policy::mean_of_a;
  double damping = 1.0;                       // theta in u+ = (1-theta)u + theta u~
  double tol_fixed_point = 1e-9;              // sup-norm increment target
  int max_iters = 200;
  bool dealias = true;                        // 2/3-rule mask on the assembled rhs
  bool compute_diagnostics = true;            // Holder, modelledness, residual on the result
  double alpha = 0.7;                         // exponent for the diagnostics
  double alpha_prime = 0.65;                  // exponent for continuation increments

  void validate() const {
    if (!(eta >= 0.0)) throw std::invalid_argument("SolveParams: eta must be nonnegative");
    if (!(damping > 0.0 && damping <= 1.0))
      throw std::invalid_argument("SolveParams: damping must lie in (0, 1]");
    if (!(tol_fixed_point > 0.0))
      throw std::invalid_argument("SolveParams: tol_fixed_point must be positive");
    if (max_iters < 1) throw std::invalid_argument("SolveParams: max_iters must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0 && alpha_prime > 0.0 && alpha_prime < alpha))
      throw std::invalid_argument("SolveParams: need 0 < alpha_prime < alpha < 1");
  }
};

struct IterateStat {
  double delta = 0.0;          // ||u_next - u||_inf after damping
  double step_residual = 0.0;  // ||u~ - u||_inf, the undamped Picard defect
};

struct SolveDiagnostics {
  double holder_alpha = 0.0;
  double modelledness_M = 0.0;
  double residual_norm = 0.0;
  double contraction_ratio = 0.0;  // median of successive delta ratios
  double a0_star = 0.0;            // value used on the final iterate
};

struct SolveResult {
  PhysicalField u;
  std::vector<IterateStat> iterates;
  SolveDiagnostics diagnostics;
  bool converged = false;
};

namespace detail {

// Lagrange interpolation through up to four nodes nearest to x, clamped to
// the node hull. The renormalization table stores exact-lookup values; the
// solver needs c(a0) between nodes because a(u(x)) varies continuously.
inline double lagrange_at(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  std::size_t n = xs.size();
  if (n == 0) throw std::invalid_argument("lagrange_at: empty node list");
  if (n == 1) return ys[0];
  x = std::clamp(x, xs.front(), xs.back());
  std::size_t deg = std::min<std::size_t>(4, n);
  std::size_t hi = 0;
  while (hi < n && xs[hi] < x) ++hi;
  std::size_t lo = (hi > deg / 2) ? hi - deg / 2 : 0;
  if (lo + deg > n) lo = n - deg;
  double out = 0.0;
  for (std::size_t i = lo; i < lo + deg; ++i) {
    double w = 1.0;
    for (std::size_t j = lo; j < lo + deg; ++j)
      if (j != i) w *= (x - xs[j]) / (xs[i] - xs[j]);
    out += w * ys[i];
  }
  return out;
}

// One eps-slice of a renormalization table, scaled to the solve's noise
// intensity. The table is computed for unit-amplitude noise and the
// constants are quadratic in the amplitude, hence the eta^2 factor.
struct ConstantSlice {
  bool active = false;
  std::vector<double> nodes, c1_row, c2_diag;

  double c1(double a0) const { return active ? lagrange_at(nodes, c1_row, a0) : 0.0; }
  double c2(double a0) const { return active ? lagrange_at(nodes, c2_diag, a0) : 0.0; }
};

inline ConstantSlice slice_constants(const RenormConstants* consts, double eps, double eta) {
  ConstantSlice s;
  if (consts == nullptr) return s;
  s.active = true;
  s.nodes = consts->a0_list;
  if (!std::is_sorted(s.nodes.begin(), s.nodes.end()))
    throw std::invalid_argument("slice_constants: a0_list must be sorted");
  double w = eta * eta;
  for (double a0 : s.nodes) {
    s.c1_row.push_back(w * consts->c1_at(eps, a0));
    s.c2_diag.push_back(w * consts->c2_at(eps, a0, a0));
  }
  return s;
}

inline void dealias_mask(SpectralField& F) {
  const GridSpec& g = F.grid;
  for (int i1 = 0; i1 < g.n1; ++i1)
    for (int i2 = 0; i2 < g.n2; ++i2)
      if (3 * std::abs(g.m1(i1)) > g.n1 || 3 * std::abs(g.m2(i2)) > g.n2)
        F.at(i1, i2) = cplx{0.0, 0.0};
}

// The renormalized right-hand side before projection and inversion:
// (a(u) - a0*) d1^2 u + sigma(u) f_eps - sigma'(u)sigma(u) c1(a(u))
//                                      - a'(u)sigma(u)^2 c2(a(u)).
inline PhysicalField renormalized_rhs(const PhysicalField& u, const PhysicalField& f_eps_phys,
                                      double a0_star, const ConstantSlice& cs,
                                      const NonlinearityPair& nl) {
  const GridSpec& g = u.grid;
  PhysicalField d1sq_u = ifft(d1_squared(fft(u)));
  PhysicalField rhs(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    double uv = u.v[i];
    double av = nl.a(uv);
    if (!(av >= nl.lambda - 1e-12 && av <= 1.0 + 1e-12))
      throw std::runtime_error("ellipticity violated");
    double sv = nl.sigma(uv);
    rhs.v[i] = (av - a0_star) * d1sq_u.v[i] + sv * f_eps_phys.v[i] -
               nl.dsigma(uv) * sv * cs.c1(av) - nl.da(uv) * sv * sv * cs.c2(av);
  }
  return rhs;
}

inline double a0_star_of(const PhysicalField& u, const NonlinearityPair& nl, A0Policy policy) {
  if (policy == A0Policy::fixed) return nl.a(0.0);
  double m = 0.0;
  for (double uv : u.v) m += nl.a(uv);
  return m / static_cast<double>(u.v.size());
}

}  // namespace detail

// One damped Picard step: u+ = (1 - theta) u + theta G(., a0*) P[rhs].
// consts == nullptr runs the unrenormalized iteration (both counterterms
// zero); eps only selects the table slice, f_eps is already mollified.
inline PhysicalField picard_step(const PhysicalField& u, const SpectralField& f_eps, double eps,
                                 const ModelFamily& family, const RenormConstants* consts,
                                 const NonlinearityPair& nl, const SolveParams& params) {
  params.validate();
  const GridSpec& g = u.grid;
  if (f_eps.grid != g || family.grid != g)
    throw std::invalid_argument("picard_step: grid mismatch");
  detail::ConstantSlice cs = detail::slice_constants(consts, eps, params.eta);
  double a0_star = detail::a0_star_of(u, nl, params.a0_star_policy);
  PhysicalField f_phys = ifft(f_eps);
  PhysicalField rhs = detail::renormalized_rhs(u, f_phys, a0_star, cs, nl);
  SpectralField rhs_hat = fft(rhs);
  if (params.dealias) detail::dealias_mask(rhs_hat);
  PhysicalField u_tilde = ifft(solve_heat(rhs_hat, a0_star));
  double theta = params.damping;
  PhysicalField out(g);
  for (std::size_t i = 0; i < g.size(); ++i)
    out.v[i] = (1.0 - theta) * u.v[i] + theta * u_tilde.v[i];
  return out;
}

// Residual of the mollified equation: max over T in T_list of
// (T^{1/4})^{2-2alpha} || d2 u_T - P[a(u) d1^2 u_T + sigma(u) (f_eps)_T
//                                   - (renormalization field)_T] ||_inf.
// For the exact constant-coefficient linear solution every T-term vanishes
// to roundoff because all the multipliers commute.
inline double residual(const PhysicalField& u, const SpectralField& f_eps,
                       const ModelFamily& family, const RenormConstants* consts,
                       const NonlinearityPair& nl, const std::vector<double>& T_list, double eps,
                       const SolveParams& params) {
  const GridSpec& g = u.grid;
  if (f_eps.grid != g || family.grid != g)
    throw std::invalid_argument("residual: grid mismatch");
  if (T_list.empty()) throw std::invalid_argument("residual: T_list must be nonempty");
  detail::ConstantSlice cs = detail::slice_constants(consts, eps, params.eta);
  SpectralField u_hat = fft(u);

  PhysicalField a_field(g), sigma_field(g), renorm_field(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    double uv = u.v[i];
    double av = nl.a(uv);
    if (!(av >= nl.lambda - 1e-12 && av <= 1.0 + 1e-12))
      throw std::runtime_error("ellipticity violated");
    double sv = nl.sigma(uv);
    a_field.v[i] = av;
    sigma_field.v[i] = sv;
    renorm_field.v[i] = nl.dsigma(uv) * sv * cs.c1(av) + nl.da(uv) * sv * sv * cs.c2(av);
  }
  SpectralField renorm_hat = fft(renorm_field);

  double worst = 0.0;
  for (double T : T_list) {
    SpectralField uT = mollify(u_hat, T);
    SpectralField d2_uT = uT;
    apply_multiplier(d2_uT, [](double, double k2) { return cplx{0.0, k2}; });
    PhysicalField d2_phys = ifft(d2_uT);
    PhysicalField d1sq_phys = ifft(d1_squared(uT));
    PhysicalField f_T = ifft(mollify(f_eps, T));
    PhysicalField renorm_T = ifft(mollify(renorm_hat, T));

    PhysicalField bracket(g);
    for (std::size_t i = 0; i < g.size(); ++i)
      bracket.v[i] =
          a_field.v[i] * d1sq_phys.v[i] + sigma_field.v[i] * f_T.v[i] - renorm_T.v[i];
    project_mean_zero(bracket);
    double m = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
      m = std::max(m, std::abs(d2_phys.v[i] - bracket.v[i]));
    worst = std::max(worst, std::pow(T, 0.25 * (2.0 - 2.0 * params.alpha)) * m);
  }
  return worst;
}

// Picard iteration from u0 (zero if absent). The forcing actually used is
// eta * mollify_noise(f, eps); divergence is declared after five consecutive
// non-contracting steps, and damping falls back to 1/2 once the increments
// grow twice.
inline SolveResult solve_quasilinear(const SpectralField& f, double eps,
                                     const NonlinearityPair& nl, const SolveParams& params,
                                     const RenormConstants* consts = nullptr,
                                     const PhysicalField* u0 = nullptr) {
  params.validate();
  nl.validate();
  if (!(eps >= 0.0)) throw std::invalid_argument("solve_quasilinear: eps must be nonnegative");
  const GridSpec& g = f.grid;

  SpectralField f_scaled = f;
  for (cplx& z : f_scaled.c) z *= params.eta;
  SpectralField f_eps = mollify_noise(f_scaled, eps);
  PhysicalField f_phys = ifft(f_eps);
  detail::ConstantSlice cs = detail::slice_constants(consts, eps, params.eta);

  SolveResult res;
  res.u = u0 ? *u0 : PhysicalField(g);
  if (u0 && u0->grid != g) throw std::invalid_argument("solve_quasilinear: u0 grid mismatch");
  project_mean_zero(res.u);

  double theta = params.damping;
  int growth_count = 0, diverge_count = 0;
  for (int it = 0; it < params.max_iters; ++it) {
    double a0_star = detail::a0_star_of(res.u, nl, params.a0_star_policy);
    PhysicalField rhs = detail::renormalized_rhs(res.u, f_phys, a0_star, cs, nl);
    SpectralField rhs_hat = fft(rhs);
    if (params.dealias) detail::dealias_mask(rhs_hat);
    PhysicalField u_tilde = ifft(solve_heat(rhs_hat, a0_star));

    double step_res = 0.0;
    PhysicalField u_next(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
      step_res = std::max(step_res, std::abs(u_tilde.v[i] - res.u.v[i]));
      u_next.v[i] = (1.0 - theta) * res.u.v[i] + theta * u_tilde.v[i];
    }
    double delta = theta * step_res;
    res.iterates.push_back({delta, step_res});
    res.u = std::move(u_next);

    if (step_res <= params.tol_fixed_point) {
      res.converged = true;
      break;
    }
    std::size_t k = res.iterates.size();
    if (k >= 2) {
      double prev = res.iterates[k - 2].delta;
      double ratio = prev > 0.0 ? delta / prev : 0.0;
      if (delta > prev && ++growth_count >= 2 && theta > 0.5) {
        theta = 0.5;
        growth_count = 0;
      }
      diverge_count = (ratio >= 1.0) ? diverge_count + 1 : 0;
      if (diverge_count >= 5) break;
    }
  }

  std::vector<double> ratios;
  for (std::size_t k = 1; k < res.iterates.size(); ++k)
    if (res.iterates[k - 1].delta > 0.0)
      ratios.push_back(res.iterates[k].delta / res.iterates[k - 1].delta);
  if (!ratios.empty()) {
    std::sort(ratios.begin(), ratios.end());
    res.diagnostics.contraction_ratio = ratios[ratios.size() / 2];
  }
  res.diagnostics.a0_star = detail::a0_star_of(res.u, nl, params.a0_star_policy);
  if (params.compute_diagnostics) {
    ModelFamily family = build_family(f_eps, nl.lambda);
    res.diagnostics.holder_alpha = holder_seminorm(res.u, params.alpha);
    PhysicalField a_field(g), sigma_field(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
      a_field.v[i] = nl.a(res.u.v[i]);
      sigma_field.v[i] = nl.sigma(res.u.v[i]);
    }
    res.diagnostics.modelledness_M =
        modelledness(res.u, family, a_field, sigma_field, params.alpha).M;
    std::vector<double> T_list = dyadic_scales(g);
    res.diagnostics.residual_norm =
        residual(res.u, f_eps, family, consts, nl, T_list, eps, params);
  }
  return res;
}

// eta such that || eta f ||_{alpha-2} equals the target size.
inline double calibrate_eta(const SpectralField& f, double alpha, double target = 0.05) {
  double n0 = negative_norm(f, alpha);
  if (!(n0 > 0.0)) throw std::invalid_argument("calibrate_eta: forcing has zero negative norm");
  return target / n0;
}

struct ContinuationReport {
  std::vector<double> eps;
  std::vector<SolveResult> results;
  std::vector<double> diff_inf;     // ||u_{eps_i} - u_{eps_{i+1}}||_inf
  std::vector<double> diff_holder;  // [u_{eps_i} - u_{eps_{i+1}}]_{alpha'}
  bool decreasing = false;          // diff_inf strictly decreasing (needs >= 2 increments)
  bool aborted = false;             // a solve failed to converge; table is partial
};

// Warm-started solves down a decreasing eps ladder. Every eps must stay
// above the grid cutoff scale so that consecutive solutions differ by
// resolved content rather than truncation.
inline ContinuationReport eps_continuation(const SpectralField& f,
                                           const std::vector<double>& eps_list,
                                           const NonlinearityPair& nl, const SolveParams& params,
                                           const RenormConstants* consts = nullptr) {
  if (eps_list.size() < 2)
    throw std::invalid_argument("eps_continuation: need at least two eps values");
  for (std::size_t i = 0; i + 1 < eps_list.size(); ++i)
    if (!(eps_list[i] > eps_list[i + 1]))
      throw std::invalid_argument("eps_continuation: eps_list must be strictly decreasing");
  if (!(eps_list.back() > f.grid.t_min()))
    throw std::invalid_argument("eps_continuation: eps below the grid cutoff scale");

  ContinuationReport rep;
  const PhysicalField* warm = nullptr;
  for (double eps : eps_list) {
    SolveResult r = solve_quasilinear(f, eps, nl, params, consts, warm);
    rep.eps.push_back(eps);
    rep.results.push_back(std::move(r));
    if (!rep.results.back().converged) {
      rep.aborted = true;
      break;
    }
    warm = &rep.results.back().u;
  }
  for (std::size_t i = 0; i + 1 < rep.results.size(); ++i) {
    const PhysicalField& ua = rep.results[i].u;
    const PhysicalField& ub = rep.results[i + 1].u;
    PhysicalField d(ua.grid);
    for (std::size_t j = 0; j < d.v.size(); ++j) d.v[j] = ua.v[j] - ub.v[j];
    rep.diff_inf.push_back(linf(d));
    rep.diff_holder.push_back(holder_seminorm(d, params.alpha_prime));
  }
  rep.decreasing = rep.diff_inf.size() >= 2;
  for (std::size_t i = 0; i + 1 < rep.diff_inf.size(); ++i)
    if (!(rep.diff_inf[i + 1] < rep.diff_inf[i])) rep.decreasing = false;
  return rep;
}

// Constant-constants table: c1 = g1 and c2 = g2 at every node of one eps
// slice, for checking against classical solutions with constant shifts.
inline RenormConstants constant_table(double eps, const std::vector<double>& a0_nodes, double g1,
                                      double g2) {
  if (a0_nodes.empty()) throw std::invalid_argument("constant_table: empty a0 node list");
  RenormConstants t;
  t.spec = CovarianceSpec::spatial(0.0);
  t.truncation = 0;
  t.eps_list = {eps};
  t.a0_list = a0_nodes;
  t.a0p_list = a0_nodes;
  for (double a0 : a0_nodes) {
    t.c1[{eps, a0}] = g1;
    for (double a0p : a0_nodes) t.c2[{eps, a0, a0p}] = g2;
  }
  return t;
}

struct EquivalenceReport {
  double discrepancy = 0.0;   // max-norm gap on the shared grid
  double period_defect = 0.0; // final period-map displacement plus gauge defect
  int periods = 0;
  bool converged = false;
};

namespace detail {

// Dense DFT on one x1-line; the line lengths here are small enough that the
// quadratic cost is irrelevant next to the number of time steps.
struct LineDft {
  int n = 0;
  std::vector<cplx> w;  // w[j] = exp(+2 pi i j / n)

  explicit LineDft(int n_) : n(n_), w(n_) {
    for (int j = 0; j < n; ++j) {
      double ph = kTwoPi * j / n;
      w[j] = cplx{std::cos(ph), std::sin(ph)};
    }
  }
  // sign +1: coefficients -> values; sign -1: values -> coefficients / n.
  void run(const std::vector<cplx>& in, std::vector<cplx>& out, int sign) const {
    out.assign(n, cplx{0.0, 0.0});
    for (int k = 0; k < n; ++k) {
      cplx acc{0.0, 0.0};
      for (int j = 0; j < n; ++j) {
        int idx = static_cast<int>((static_cast<long long>(j) * k) % n);
        cplx tw = w[idx];
        if (sign < 0) tw = std::conj(tw);
        acc += in[j] * tw;
      }
      out[k] = sign < 0 ? acc / static_cast<double>(n) : acc;
    }
  }
};

}  // namespace detail

// Independent classical check: march the renormalized equation with the
// constant shifts g1, g2 by semi-implicit (CN + AB2) time stepping in x2,
// converge the period map including the mean-mode shooting constant, and
// compare the periodic orbit with the fixed-point solution on the grid.
// f_smooth enters unscaled and unmollified; it should be band-limited well
// below the grid cutoff for the time-marching error to stay near roundoff.
inline EquivalenceReport classical_check(const SolveResult& u, const SpectralField& f_smooth,
                                         double g1, double g2, const NonlinearityPair& nl,
                                         int steps_per_cell = 64, int max_periods = 80,
                                         double orbit_tol = 1e-11) {
  const GridSpec& g = u.u.grid;
  if (f_smooth.grid != g) throw std::invalid_argument("classical_check: grid mismatch");
  if (steps_per_cell < 1) throw std::invalid_argument("classical_check: steps_per_cell >= 1");
  const int n1 = g.n1, n2 = g.n2;
  const int steps = n2 * steps_per_cell;
  const double h = 1.0 / steps;
  detail::LineDft dft(n1);

  // Columns of f with any energy, for evaluating f(., t) off the grid lines.
  std::vector<int> cols;
  for (int i2 = 0; i2 < n2; ++i2) {
    double e = 0.0;
    for (int i1 = 0; i1 < n1; ++i1) e += std::abs(f_smooth.at(i1, i2));
    if (e > 0.0) cols.push_back(i2);
  }
  std::vector<double> ksq(n1);
  for (int i1 = 0; i1 < n1; ++i1) {
    double k1 = g.k1(i1);
    ksq[i1] = k1 * k1;  // even symbol, so the Nyquist average equals the value
  }

  std::vector<cplx> f_line_hat(n1), f_line(n1), u_hat(n1, cplx{0.0, 0.0});
  std::vector<cplx> u_phys(n1), d1sq_phys(n1), n_hat(n1), n_prev(n1), n_phys(n1);
  auto eval_f_line = [&](double t, std::vector<cplx>& out_phys) {
    for (int i1 = 0; i1 < n1; ++i1) {
      cplx acc{0.0, 0.0};
      for (int i2 : cols) {
        double ph = kTwoPi * g.m2(i2) * t;
        acc += f_smooth.at(i1, i2) * cplx{std::cos(ph), std::sin(ph)};
      }
      f_line_hat[i1] = acc;
    }
    dft.run(f_line_hat, out_phys, +1);
  };

  // N(u, t) = (a(u) - abar) d1^2 u + sigma(u) f(., t) - sigma'(u)sigma(u) g1
  //           - a'(u)sigma(u)^2 g2, in spectral line coefficients.
  auto eval_n = [&](const std::vector<cplx>& uh, double t, double abar, std::vector<cplx>& out) {
    dft.run(uh, u_phys, +1);
    std::vector<cplx> tmp(n1);
    for (int i1 = 0; i1 < n1; ++i1) tmp[i1] = -ksq[i1] * uh[i1];
    dft.run(tmp, d1sq_phys, +1);
    eval_f_line(t, f_line);
    for (int i1 = 0; i1 < n1; ++i1) {
      double uv = u_phys[i1].real();
      double av = nl.a(uv), sv = nl.sigma(uv);
      n_phys[i1] = cplx{(av - abar) * d1sq_phys[i1].real() + sv * f_line[i1].real() -
                            nl.dsigma(uv) * sv * g1 - nl.da(uv) * sv * sv * g2,
                        0.0};
    }
    dft.run(n_phys, out, -1);
  };

  EquivalenceReport rep;
  double kappa = 0.0;
  std::vector<cplx> u_start = u_hat;
  bool have_prev = false;
  for (int period = 0; period < max_periods; ++period) {
    u_start = u_hat;
    double mode0_sum = 0.0;
    for (int m = 0; m < steps; ++m) {
      double t = m * h;
      dft.run(u_hat, u_phys, +1);
      double mean_u = 0.0;
      for (int i1 = 0; i1 < n1; ++i1) mean_u += u_phys[i1].real();
      mean_u /= n1;
      double abar = nl.a(mean_u);

      eval_n(u_hat, t, abar, n_hat);
      if (!have_prev) {
        n_prev = n_hat;
        have_prev = true;
      }
      for (int i1 = 0; i1 < n1; ++i1) {
        cplx nn = 1.5 * n_hat[i1] - 0.5 * n_prev[i1];
        if (i1 == 0) nn -= cplx{kappa, 0.0};
        double L = -abar * ksq[i1];
        u_hat[i1] = ((1.0 + 0.5 * h * L) * u_hat[i1] + h * nn) / (1.0 - 0.5 * h * L);
      }
      n_prev = n_hat;
      mode0_sum += u_hat[0].real();
    }
    double drift = u_hat[0].real() - u_start[0].real();
    double mu = mode0_sum * h;  // space-time mean of the running period
    kappa += drift;
    u_hat[0] -= cplx{mu, 0.0};

    double defect = 0.0;
    for (int i1 = 1; i1 < n1; ++i1)
      defect = std::max(defect, std::abs(u_hat[i1] - u_start[i1]));
    rep.period_defect = defect + std::abs(drift) + std::abs(mu);
    rep.periods = period + 1;
    if (rep.period_defect <= orbit_tol) {
      rep.converged = true;
      break;
    }
  }

  // One more period, sampling the n2 grid lines for the comparison.
  double disc = 0.0;
  for (int m = 0; m < steps; ++m) {
    if (m % steps_per_cell == 0) {
      int i2 = m / steps_per_cell;
      dft.run(u_hat, u_phys, +1);
      for (int i1 = 0; i1 < n1; ++i1)
        disc = std::max(disc, std::abs(u_phys[i1].real() - u.u.at(i1, i2)));
    }
    double t = m * h;
    dft.run(u_hat, u_phys, +1);
    double mean_u = 0.0;
    for (int i1 = 0; i1 < n1; ++i1) mean_u += u_phys[i1].real();
    mean_u /= n1;
    double abar = nl.a(mean_u);
    eval_n(u_hat, t, abar, n_hat);
    for (int i1 = 0; i1 < n1; ++i1) {
      cplx nn = 1.5 * n_hat[i1] - 0.5 * n_prev[i1];
      if (i1 == 0) nn -= cplx{kappa, 0.0};
      double L = -abar * ksq[i1];
      u_hat[i1] = ((1.0 + 0.5 * h * L) * u_hat[i1] + h * nn) / (1.0 - 0.5 * h * L);
    }
    n_prev = n_hat;
  }
  rep.discrepancy = disc;
  return rep;
}

}  // namespace roughpde
