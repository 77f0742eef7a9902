// Generalized-eigenfunction ladders T_k^inf, T_k^0 built by iterating the
// Green's operators S_0, S_inf of -Delta + V, the regularization
// coefficients e_i^k with the r^2-regular combinations, and the
// polynomial-in-time non-radiative profiles S_k^{inf,sigma}.
#pragma once

#include <string>
#include <vector>

#include "chanlab/radial.hpp"

namespace chanlab {

enum class GreensMode { AtOrigin, AtInfinity };

struct LadderFamily {
  int N = 8;
  GridPtr grid;
  // T_inf holds levels 0..(N-6)/2 plus one auxiliary level used only by the
  // regularization recursion (its e-sum reaches index k+1).
  std::vector<RadialField> T_inf;
  std::vector<RadialField> T_zero;      // levels 0..(N-6)/2
  std::vector<RadialField> T_zero_reg;  // regularized T~_k^0, same range
  std::vector<std::vector<double>> e_coeffs;  // e_coeffs[k][i], i = 0..k+1
  std::vector<double> residual_inf;   // relative recursion residual per level
  std::vector<double> residual_zero;
  // fitted asymptotic exponents (origin, infinity) per level
  std::vector<std::pair<double, double>> exponents_inf;
  std::vector<std::pair<double, double>> exponents_zero;
  std::vector<double> reg_origin_exponents;  // fitted exponent of T~_k^0 at 0
  double gamma_wronskian_error = 0.0;

  int top_level() const { return (N - 6) / 2; }
};

// Quadrature realization of S_0 f or S_inf f; satisfies
// (-Delta + V)(S f) = f up to discretization error. `kernel0` = Gamma,
// `kernel_inf` = Lambda W, sampled on f's grid.
RadialField apply_greens(const RadialField& f, GreensMode mode, int N,
                         const RadialField& kernel0,
                         const RadialField& kernel_inf);

LadderFamily build_ladder(int N, GridPtr grid);

// Fills e_coeffs and T_zero_reg by the constructive recursion; the
// regularized fields are assembled from the explicit integral form so the
// r^2 origin behavior survives in floating point.
void regularize_T0(LadderFamily& family);

// S_k^{inf,sigma}(t) and its time derivative.
struct NonradiativeProfile {
  RadialField u;
  RadialField v;
};
NonradiativeProfile eval_nonradiative_profile(const LadderFamily& family,
                                              int k, int sigma, double t);

// Columnar text dump (r, T columns) plus a JSON sidecar with exponents,
// residuals and e-coefficients.
void export_ladder(const LadderFamily& family, const std::string& out_prefix);

}  // namespace chanlab
