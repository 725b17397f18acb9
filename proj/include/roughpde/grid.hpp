#pragma once
// Periodic grids on the unit torus [0,1)^2, spectral transforms, Fourier
// multipliers, and the RPF1 field snapshot format.
//
// Convention: a real field f on an n1 x n2 grid is represented spectrally by
// coefficients F(m) with f(x) = sum_m F(m) exp(2*pi*i m.x), m running over the
// fftfreq mode set {-n/2,...,n/2-1} per axis. Physical wavenumbers are
// k = 2*pi*m. Index (i1,i2) is row-major, i1 along x1 (spatial axis), i2
// along x2 (temporal axis).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <fftw3.h>

namespace roughpde {

using cplx = std::complex<double>;
inline constexpr double kTwoPi = 6.28318530717958647692528676655900577;

struct GridSpec {
  int n1 = 0;
  int n2 = 0;

  double h1() const { return 1.0 / n1; }
  double h2() const { return 1.0 / n2; }
  std::size_t size() const { return static_cast<std::size_t>(n1) * n2; }

  // fftfreq layout: index i carries signed mode i for i < n/2, i - n otherwise.
  static int mode(int i, int n) { return (2 * i < n) ? i : i - n; }
  int m1(int i1) const { return mode(i1, n1); }
  int m2(int i2) const { return mode(i2, n2); }
  double k1(int i1) const { return kTwoPi * m1(i1); }
  double k2(int i2) const { return kTwoPi * m2(i2); }

  // Smallest mollification scale the grid resolves (kernel width >= a few cells).
  double t_min() const {
    double a = h1(), b = h2();
    return 16.0 * std::max(a * a * a * a, b * b);
  }

  bool operator==(const GridSpec& o) const { return n1 == o.n1 && n2 == o.n2; }
  bool operator!=(const GridSpec& o) const { return !(*this == o); }
};

struct PhysicalField {
  GridSpec grid;
  std::vector<double> v;

  PhysicalField() = default;
  explicit PhysicalField(GridSpec g) : grid(g), v(g.size(), 0.0) {}
  double& at(int i1, int i2) { return v[static_cast<std::size_t>(i1) * grid.n2 + i2]; }
  double at(int i1, int i2) const { return v[static_cast<std::size_t>(i1) * grid.n2 + i2]; }
};

struct SpectralField {
  GridSpec grid;
  std::vector<cplx> c;

  SpectralField() = default;
  explicit SpectralField(GridSpec g) : grid(g), c(g.size(), cplx{0.0, 0.0}) {}
  cplx& at(int i1, int i2) { return c[static_cast<std::size_t>(i1) * grid.n2 + i2]; }
  cplx at(int i1, int i2) const { return c[static_cast<std::size_t>(i1) * grid.n2 + i2]; }
};

namespace detail {

// Plan cache; FFTW planning is not thread-safe, execution on distinct buffers is.
class FftEngine {
 public:
  static FftEngine& instance() {
    static FftEngine e;
    return e;
  }

  void transform(const GridSpec& g, const cplx* in, cplx* out, int sign) {
    fftw_plan plan = get_plan(g, sign);
    std::size_t n = g.size();
    Scratch& s = scratch();
    s.ensure(n);
    std::memcpy(s.in, in, n * sizeof(cplx));
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(s.in),
                     reinterpret_cast<fftw_complex*>(s.out));
    std::memcpy(out, s.out, n * sizeof(cplx));
  }

 private:
  struct Scratch {
    cplx* in = nullptr;
    cplx* out = nullptr;
    std::size_t cap = 0;
    void ensure(std::size_t n) {
      if (cap >= n) return;
      if (in) fftw_free(in);
      if (out) fftw_free(out);
      in = static_cast<cplx*>(fftw_malloc(n * sizeof(cplx)));
      out = static_cast<cplx*>(fftw_malloc(n * sizeof(cplx)));
      if (!in || !out) throw std::bad_alloc();
      cap = n;
    }
    ~Scratch() {
      if (in) fftw_free(in);
      if (out) fftw_free(out);
    }
  };

  static Scratch& scratch() {
    thread_local Scratch s;
    return s;
  }

  fftw_plan get_plan(const GridSpec& g, int sign) {
    std::lock_guard<std::mutex> lock(mu_);
    auto key = std::make_tuple(g.n1, g.n2, sign);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    std::size_t n = g.size();
    cplx* a = static_cast<cplx*>(fftw_malloc(n * sizeof(cplx)));
    cplx* b = static_cast<cplx*>(fftw_malloc(n * sizeof(cplx)));
    fftw_plan p = fftw_plan_dft_2d(g.n1, g.n2, reinterpret_cast<fftw_complex*>(a),
                                   reinterpret_cast<fftw_complex*>(b), sign, FFTW_ESTIMATE);
    fftw_free(a);
    fftw_free(b);
    if (!p) throw std::runtime_error("fftw plan creation failed");
    plans_.emplace(key, p);
    return p;
  }

  std::mutex mu_;
  std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

}  // namespace detail

// Physical -> spectral; coefficients normalized so f(x) = sum F(m) e^{2 pi i m.x}.
inline SpectralField fft(const PhysicalField& f) {
  SpectralField out(f.grid);
  std::vector<cplx> in(f.grid.size());
  for (std::size_t i = 0; i < in.size(); ++i) in[i] = cplx{f.v[i], 0.0};
  detail::FftEngine::instance().transform(f.grid, in.data(), out.c.data(), FFTW_FORWARD);
  double scale = 1.0 / static_cast<double>(f.grid.size());
  for (auto& z : out.c) z *= scale;
  return out;
}

// Spectral -> physical; returns the real part, optionally reporting the
// largest imaginary residue (nonzero iff the input is not Hermitian).
inline PhysicalField ifft(const SpectralField& F, double* imag_max = nullptr) {
  std::vector<cplx> out(F.grid.size());
  detail::FftEngine::instance().transform(F.grid, F.c.data(), out.data(), FFTW_BACKWARD);
  PhysicalField f(F.grid);
  double worst = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    f.v[i] = out[i].real();
    worst = std::max(worst, std::abs(out[i].imag()));
  }
  if (imag_max) *imag_max = worst;
  return f;
}

// Indices whose mirror mode is themselves: (0 or n/2) on each axis.
inline std::vector<std::pair<int, int>> self_conjugate_indices(const GridSpec& g) {
  std::vector<int> a{0}, b{0};
  if (g.n1 % 2 == 0 && g.n1 > 1) a.push_back(g.n1 / 2);
  if (g.n2 % 2 == 0 && g.n2 > 1) b.push_back(g.n2 / 2);
  std::vector<std::pair<int, int>> out;
  for (int i1 : a)
    for (int i2 : b) out.emplace_back(i1, i2);
  return out;
}

// A real field's spectrum satisfies F(-m) = conj(F(m)); multipliers that are
// odd at the unpaired Nyquist lines break it there, so those imaginary parts
// are dropped after every multiplier application.
inline void fix_self_conjugate(SpectralField& F) {
  for (auto [i1, i2] : self_conjugate_indices(F.grid))
    F.at(i1, i2) = cplx{F.at(i1, i2).real(), 0.0};
}

inline double hermitian_defect(const SpectralField& F) {
  const GridSpec& g = F.grid;
  double worst = 0.0;
  for (int i1 = 0; i1 < g.n1; ++i1) {
    int j1 = (g.n1 - i1) % g.n1;
    for (int i2 = 0; i2 < g.n2; ++i2) {
      int j2 = (g.n2 - i2) % g.n2;
      worst = std::max(worst, std::abs(F.at(i1, i2) - std::conj(F.at(j1, j2))));
    }
  }
  return worst;
}

inline void hermitian_symmetrize(SpectralField& F) {
  const GridSpec& g = F.grid;
  for (int i1 = 0; i1 < g.n1; ++i1) {
    int j1 = (g.n1 - i1) % g.n1;
    for (int i2 = 0; i2 < g.n2; ++i2) {
      int j2 = (g.n2 - i2) % g.n2;
      if (std::make_pair(i1, i2) > std::make_pair(j1, j2)) continue;
      cplx a = F.at(i1, i2), b = F.at(j1, j2);
      cplx s = 0.5 * (a + std::conj(b));
      F.at(i1, i2) = s;
      F.at(j1, j2) = std::conj(s);
    }
  }
  fix_self_conjugate(F);
}

// Applies F(k) *= m(k1, k2) with k the physical wavenumbers 2*pi*mode.
// A Nyquist index aliases the modes +-n/2, so the symbol acts there as its
// average over the aliased wavenumbers; odd symbols vanish on Nyquist lines
// (their sine branch is invisible on the grid) and Hermitian symmetry of the
// spectrum survives any symbol with m(-k) = conj(m(k)).
template <class Mult>
void apply_multiplier(SpectralField& F, Mult&& mult) {
  const GridSpec& g = F.grid;
  for (int i1 = 0; i1 < g.n1; ++i1) {
    double k1 = g.k1(i1);
    bool ny1 = (2 * i1 == g.n1);
    for (int i2 = 0; i2 < g.n2; ++i2) {
      double k2 = g.k2(i2);
      bool ny2 = (2 * i2 == g.n2);
      cplx s;
      if (!ny1 && !ny2)
        s = mult(k1, k2);
      else if (ny1 && !ny2)
        s = 0.5 * (mult(k1, k2) + mult(-k1, k2));
      else if (!ny1)
        s = 0.5 * (mult(k1, k2) + mult(k1, -k2));
      else
        s = 0.25 * (mult(k1, k2) + mult(-k1, k2) + mult(k1, -k2) + mult(-k1, -k2));
      F.at(i1, i2) *= s;
    }
  }
  fix_self_conjugate(F);
}

inline void project_mean_zero(SpectralField& F) { F.at(0, 0) = cplx{0.0, 0.0}; }

inline void project_mean_zero(PhysicalField& f) {
  double m = 0.0;
  for (double x : f.v) m += x;
  m /= static_cast<double>(f.v.size());
  for (double& x : f.v) x -= m;
}

inline SpectralField d1_squared(SpectralField F) {
  apply_multiplier(F, [](double k1, double) { return cplx{-k1 * k1, 0.0}; });
  return F;
}

inline double mean(const PhysicalField& f) {
  double m = 0.0;
  for (double x : f.v) m += x;
  return m / static_cast<double>(f.v.size());
}

inline double linf(const PhysicalField& f) {
  double m = 0.0;
  for (double x : f.v) m = std::max(m, std::abs(x));
  return m;
}

// Grid-mean normalized L2: sqrt((1/N) sum f^2) = continuum L2 on [0,1)^2.
inline double l2(const PhysicalField& f) {
  double s = 0.0;
  for (double x : f.v) s += x * x;
  return std::sqrt(s / static_cast<double>(f.v.size()));
}

inline double l2(const SpectralField& F) {
  double s = 0.0;
  for (const cplx& z : F.c) s += std::norm(z);
  return std::sqrt(s);
}

// Trigonometric interpolation onto a factor-(r1, r2) refined grid by spectral
// zero padding. Nyquist coefficients are split evenly between +-n/2 so the
// interpolant of a real field stays real; values at the original grid points
// are preserved exactly.
inline SpectralField refine_spectrum(const SpectralField& F, int r1, int r2) {
  if (r1 < 1 || r2 < 1) throw std::invalid_argument("refine_spectrum: factors must be >= 1");
  const GridSpec& g = F.grid;
  GridSpec fine{g.n1 * r1, g.n2 * r2};
  SpectralField out(fine);
  auto place = [&](int m1, int m2, cplx val) {
    int i1 = (m1 % fine.n1 + fine.n1) % fine.n1;
    int i2 = (m2 % fine.n2 + fine.n2) % fine.n2;
    out.at(i1, i2) += val;
  };
  for (int i1 = 0; i1 < g.n1; ++i1) {
    int m1 = g.m1(i1);
    bool ny1 = (g.n1 % 2 == 0) && (i1 == g.n1 / 2) && r1 > 1;
    for (int i2 = 0; i2 < g.n2; ++i2) {
      int m2 = g.m2(i2);
      bool ny2 = (g.n2 % 2 == 0) && (i2 == g.n2 / 2) && r2 > 1;
      cplx val = F.at(i1, i2);
      if (!ny1 && !ny2) {
        place(m1, m2, val);
      } else if (ny1 && !ny2) {
        place(m1, m2, 0.5 * val);
        place(-m1, m2, 0.5 * val);
      } else if (!ny1 && ny2) {
        place(m1, m2, 0.5 * val);
        place(m1, -m2, 0.5 * val);
      } else {
        place(m1, m2, 0.25 * val);
        place(-m1, m2, 0.25 * val);
        place(m1, -m2, 0.25 * val);
        place(-m1, -m2, 0.25 * val);
      }
    }
  }
  return out;
}

inline PhysicalField refine(const PhysicalField& f, int r1, int r2) {
  return ifft(refine_spectrum(fft(f), r1, r2));
}

// Point evaluation of the trigonometric interpolant at arbitrary (x1, x2).
// Matches refine(): Nyquist modes contribute through cos(pi n x).
inline double evaluate_at(const SpectralField& F, double x1, double x2) {
  const GridSpec& g = F.grid;
  std::vector<cplx> e1(g.n1), e2(g.n2);
  for (int i = 0; i < g.n1; ++i) {
    int m = g.m1(i);
    if (g.n1 % 2 == 0 && i == g.n1 / 2)
      e1[i] = cplx{std::cos(kTwoPi * 0.5 * g.n1 * x1), 0.0};
    else
      e1[i] = std::polar(1.0, kTwoPi * m * x1);
  }
  for (int i = 0; i < g.n2; ++i) {
    int m = g.m2(i);
    if (g.n2 % 2 == 0 && i == g.n2 / 2)
      e2[i] = cplx{std::cos(kTwoPi * 0.5 * g.n2 * x2), 0.0};
    else
      e2[i] = std::polar(1.0, kTwoPi * m * x2);
  }
  cplx acc{0.0, 0.0};
  for (int i1 = 0; i1 < g.n1; ++i1)
    for (int i2 = 0; i2 < g.n2; ++i2) acc += F.at(i1, i2) * e1[i1] * e2[i2];
  return acc.real();
}

// RPF1 snapshot: magic "RPF1", u32 n1, u32 n2 (little endian), then n1*n2
// f64 values row-major. Roundtrips bit-exactly.
inline void save_field(const PhysicalField& f, const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw std::runtime_error("save_field: cannot open " + path);
  const char magic[4] = {'R', 'P', 'F', '1'};
  std::uint32_t n1 = static_cast<std::uint32_t>(f.grid.n1);
  std::uint32_t n2 = static_cast<std::uint32_t>(f.grid.n2);
  bool ok = std::fwrite(magic, 1, 4, fp) == 4 && std::fwrite(&n1, 4, 1, fp) == 1 &&
            std::fwrite(&n2, 4, 1, fp) == 1 &&
            std::fwrite(f.v.data(), sizeof(double), f.v.size(), fp) == f.v.size();
  std::fclose(fp);
  if (!ok) throw std::runtime_error("save_field: short write to " + path);
}

inline PhysicalField load_field(const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw std::runtime_error("load_field: cannot open " + path);
  char magic[4];
  std::uint32_t n1 = 0, n2 = 0;
  if (std::fread(magic, 1, 4, fp) != 4 || std::memcmp(magic, "RPF1", 4) != 0) {
    std::fclose(fp);
    throw std::runtime_error("load_field: bad magic in " + path);
  }
  if (std::fread(&n1, 4, 1, fp) != 1 || std::fread(&n2, 4, 1, fp) != 1) {
    std::fclose(fp);
    throw std::runtime_error("load_field: truncated header in " + path);
  }
  PhysicalField f(GridSpec{static_cast<int>(n1), static_cast<int>(n2)});
  if (std::fread(f.v.data(), sizeof(double), f.v.size(), fp) != f.v.size()) {
    std::fclose(fp);
    throw std::runtime_error("load_field: truncated data in " + path);
  }
  std::fclose(fp);
  return f;
}

}  // namespace roughpde
