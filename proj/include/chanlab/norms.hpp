// Exterior inner products on (R, infinity), the Z-family of dyadic-shell
// norms, Gram-solve projections (pi_0, pi_1, Pi_perp_R, Pbar_{mu,R}), the
// alternating norm, the averaging operator A, and Z-distances to spans.
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "chanlab/ladder.hpp"
#include "chanlab/radial.hpp"

namespace chanlab {

enum class NormSpace { H1R, L2R };

struct SpanBasis {
  std::vector<RadialField> fields;
  NormSpace space = NormSpace::H1R;
  double R = 0.0;  // cut radius of the ambient space
  int N = 8;
  std::vector<std::string> labels;  // "power" | "T-infinity" | "chi-T-zero"
};

// Quintic smoothstep cutoff: 1 on [0, inner], 0 on [outer, inf), C^2.
struct CutoffProfile {
  double inner = 10.0;
  double outer = 11.0;
  double operator()(double r) const;
  double scaled(double r, double R) const { return (*this)(r / R); }
};

// Pointwise chi(r / R) * f(r); tails updated (the inf tail becomes zero).
RadialField apply_cutoff(const RadialField& f, const CutoffProfile& chi,
                         double R = 1.0);

// <f,g> = int_R^inf f'g' r^{N-1} dr (H1R) or int_R^inf f g r^{N-1} dr (L2R).
double inner_product(const RadialField& f, const RadialField& g,
                     NormSpace space, int N, double R);
double space_norm(const RadialField& f, NormSpace space, int N, double R);

// sqrt(|u0|^2_{H1_R} + |u1|^2_{L2_R}).
double pair_energy_norm(const RadialField& u0, const RadialField& u1, int N,
                        double R = 0.0);

enum class ZVariantKind { Plain, Based, Multi };

struct ZVariant {
  ZVariantKind kind = ZVariantKind::Plain;
  double R = 1.0;               // base radius for Based
  std::vector<double> lambdas;  // scales for Multi
  // Multi only: use the weight exactly as printed, R^{-3-alpha}/inf_j<R/l_j>,
  // instead of the scaling-consistent R^{-N/2-alpha}/inf_j<log(R/l_j)>.
  bool literal_weight = false;
};

struct ZNormDetail {
  double value = 0.0;
  int k_min = 0;    // smallest dyadic index sampled
  int k_max = 0;    // largest dyadic index sampled
  int k_argmax = 0; // index attaining the supremum
};

// sup over dyadic shells (2^k, 2^{k+1}) of weight(2^k) * shell L2 mass.
double z_norm(const RadialField& f, double alpha, const ZVariant& variant,
              int N);
ZNormDetail z_norm_detail(const RadialField& f, double alpha,
                          const ZVariant& variant, int N);

struct ProjectionResult {
  std::vector<double> coefficients;  // with respect to the original basis
  RadialField remainder;
  double gram_condition = 1.0;
};

// Orthogonal projection onto the span, Gram system solved after unit
// normalization; throws if the normalized condition number exceeds 1e12.
ProjectionResult project_onto_span(const RadialField& f,
                                   const SpanBasis& basis);

// pi_sigma power span: {r^{-(N-2k)} : 1 <= k <= N/4} in H1_R when
// N = 0 mod 4, {r^{-(N-2k)} : 1 <= k <= (N-2)/4} in L2_R when N = 2 mod 4.
SpanBasis power_span_basis(int N, double R, GridPtr grid);

// |pi_0-complement of u0|_{H1_R} (N = 0 mod 4) or |pi_1-complement of
// u1|_{L2_R} (N = 2 mod 4).
double alternating_norm(const RadialField& u0, const RadialField& u1, int N,
                        double R);

// Pi_perp_R span: {T_k^inf} for R = 0 (only T_0^inf when N = 0 mod 4) or
// R >= 1; additionally the cutoff-regularized {chi_0 T_k^0} for R in (0,1).
SpanBasis pi_perp_basis(const LadderFamily& family, double R);

// Applies Pi_perp_R to (u0, u1): projects the parity-relevant slot, passes
// the other through unchanged.
struct PairProjection {
  RadialField u0;
  RadialField u1;
  ProjectionResult detail;  // projection of the relevant slot
  int projected_slot = 0;
};
PairProjection pi_perp_apply(const LadderFamily& family, double R,
                             const RadialField& u0, const RadialField& u1);

// Pbar_{mu,R} span: {(T_k^inf) H1-critically rescaled by mu} in H1_R when
// N = 0 mod 4, {(T_k^inf) L2-critically rescaled by mu} in L2_R otherwise.
SpanBasis pbar_basis(const LadderFamily& family, double mu, double R);

enum class AveragingDirection { Forward, Inverse };

// Forward: (A f)(r) = int_r^inf rho f(rho) drho (needs inf exponent < -2).
// Inverse: -(1/r) f'(r), with the even-limit value -f''(0) at r = 0.
RadialField averaging_transform(const RadialField& f,
                                AveragingDirection direction);

struct ZDistanceResult {
  double value = 0.0;
  std::vector<double> coefficients;
  bool converged = true;  // false: iteration cap hit, value is an upper bound
};

// inf over span coefficients of |u - sum c_i b_i| in Z_{alpha, R}, by
// coordinate descent from a weighted least-squares seed.
ZDistanceResult span_distance_Z(const RadialField& u,
                                const std::vector<const RadialField*>& basis,
                                double alpha, double R, int N);

}  // namespace chanlab
