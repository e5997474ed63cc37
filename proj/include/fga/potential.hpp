#pragma once

#include "fga/common.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace fga {

// Lattice potential V on the unit cell, stored as reciprocal-lattice Fourier
// coefficients: V(X) = sum_k Vhat_k exp(2 pi i k.X).
class PeriodicPotential {
 public:
  PeriodicPotential() = default;
  // `cutoff` < 0 means "infer K_V from the largest stored |k|_inf".
  PeriodicPotential(int dim, std::map<IVec, cplx> coefficients, int cutoff = -1);

  static PeriodicPotential zero(int dim);
  // amplitude * cos(2 pi X_axis); Vhat_{+-e_axis} = amplitude / 2.
  static PeriodicPotential cosine(int dim, double amplitude, int axis = 0);

  int dim() const { return dim_; }
  int cutoff() const { return cutoff_; }
  cplx coefficient(const IVec& k) const;
  const std::map<IVec, cplx>& coefficients() const { return coefficients_; }

  // max |Vhat_{-k} - conj(Vhat_k)|; zero for a real-valued V.
  double hermitian_defect() const;
  bool is_hermitian(double tol = 1e-14) const;

  // V at a point of the fast variable X (real part of the Fourier sum).
  double operator()(const Vec& X) const;

  // Text format: "d <dim>", "K_V <cutoff>", then one "<k_1> [k_2] <re> <im>"
  // line per coefficient. '#' starts a comment.
  static PeriodicPotential parse(std::istream& in);
  static PeriodicPotential parse(const std::string& text);
  std::string serialize() const;

 private:
  int dim_ = 1;
  int cutoff_ = 0;
  std::map<IVec, cplx> coefficients_;
};

// Rank-3 and rank-4 derivative tensors for d <= 2, flat row-major with stride 2.
using Tensor3 = std::array<double, 8>;
using Tensor4 = std::array<double, 16>;

inline constexpr int t3(int i, int j, int k) { return (i * 2 + j) * 2 + k; }
inline constexpr int t4(int i, int j, int k, int l) { return ((i * 2 + j) * 2 + k) * 2 + l; }

// Smooth external potential U(x) built from analytic terms.
class ExternalPotential {
 public:
  // sum_{m=1..4} coeff[m] (x_axis - center)^m / m!  (coeff[0] is a constant).
  struct PolyTerm {
    int axis = 0;
    double center = 0.0;
    std::array<double, 5> coeff{};
  };
  // amplitude * cos(k.x + phase)
  struct CosTerm {
    double amplitude = 0.0;
    Vec wavevector;
    double phase = 0.0;
  };

  ExternalPotential() : ExternalPotential(1) {}
  explicit ExternalPotential(int dim) : dim_(dim) {}

  static ExternalPotential zero(int dim) { return ExternalPotential(dim); }
  // 0.5 * omega^2 * |x - center|^2
  static ExternalPotential harmonic(int dim, double omega = 1.0, double center = 0.0);

  ExternalPotential& add(PolyTerm term);
  ExternalPotential& add(CosTerm term);

  int dim() const { return dim_; }
  const std::vector<PolyTerm>& poly_terms() const { return poly_; }
  const std::vector<CosTerm>& cos_terms() const { return cos_; }

  double value(const Vec& x) const;
  Vec gradient(const Vec& x) const;
  Mat hessian(const Vec& x) const;
  Tensor3 third(const Vec& x) const;
  Tensor4 fourth(const Vec& x) const;

  // True when every derivative of order >= 2 is bounded (no cubic or
  // quartic polynomial pieces).
  bool subquadratic() const;
  // sup |d^a U| over |a| = 2, 3, 4; infinity where unbounded.
  std::array<double, 3> derivative_bounds() const;
  bool is_zero() const { return poly_.empty() && cos_.empty(); }

  // Grammar: term ("+" term)*, term := "zero"
  //   | "poly(axis=0,center=c,c0=..,c1=..,c2=..,c3=..,c4=..)"
  //   | "harmonic(omega=w,center=c)"  (all axes)
  //   | "cos(amp=a,k=k1[;k2],phase=f)"
  static ExternalPotential parse(const std::string& spec, int dim);
  std::string to_string() const;

 private:
  int dim_;
  std::vector<PolyTerm> poly_;
  std::vector<CosTerm> cos_;
};

}  // namespace fga
