// Closed-form ground-state objects (W, Lambda W, V), the singular companion
// Gamma, scaling actions, multisoliton potential assembly and the
// general-nonlinearity machinery (phi series, equivariant wave maps).
#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "chanlab/radial.hpp"

namespace chanlab {

double eval_W(int N, double r);
double eval_lambda_W(int N, double r);
double eval_lambda_W_prime(int N, double r);  // analytic d/dr of Lambda W
double eval_V(int N, double r);

// W, Lambda W and V realized on a grid with their exact analytic tails.
RadialField make_W_field(int N, GridPtr grid);
RadialField make_lambda_W_field(int N, GridPtr grid);
RadialField make_V_field(int N, GridPtr grid);

// Gamma: the second kernel element of -Delta + V, with Wronskian
// Gamma (LW)' - LW Gamma' = r^{-(N-1)}. Built by two-sided ODE integration
// from r = 1 so the zero of Lambda W at r* = sqrt(N(N-2)) is crossed
// smoothly.
struct GammaSolution {
  RadialField gamma;
  RadialField gamma_prime;         // from the ODE state, not finite differences
  double max_wronskian_rel_error;  // over interior nodes
};

GammaSolution build_gamma_full(int N, GridPtr grid);
RadialField build_gamma(int N, GridPtr grid);

enum class ScalingKind { H1Critical, L2Critical, Potential };

RadialField rescale(const RadialField& f, double lambda, ScalingKind kind,
                    int N);

struct PhiSeries {
  std::vector<double> coefficients;  // phi_k for k = 2,3,...; index 0 <-> k=2
  int N = 8;
};

struct WaveMapParams {
  int k = 1;
  int ell = 0;
  double lambda = 1.0;
  // Two conventions for the additive constant are in circulation; both are
  // available: offset = ell * (use_pi_offset ? pi : k).
  bool use_pi_offset = false;
};

struct SingleSpec {
  double lambda = 1.0;
};
struct MultisolitonSpec {
  std::vector<double> lambdas;  // strictly decreasing, positive
};
struct GeneralSpec {
  std::optional<PhiSeries> series;
  std::optional<WaveMapParams> wavemap;
};

struct PotentialSpec {
  std::variant<SingleSpec, MultisolitonSpec, GeneralSpec> variant;
};

struct MultisolitonGeometry {
  double gamma = 0.0;
  std::vector<double> r_plus;   // R_j^+ = sqrt(lambda_j lambda_{j+1})
  std::vector<double> r_minus;  // R_j^- = lambda_{j+1} gamma^{-1/4}
};

// gamma(lambda) = sup_j lambda_{j+1}/lambda_j (0 for J = 1), together with
// the separation radii. gamma_exponent = 2 selects the alternative
// squared-ratio weight.
std::pair<double, MultisolitonGeometry> separation_gamma(
    const std::vector<double>& lambdas, int gamma_exponent = 1);

RadialField assemble_potential(const PotentialSpec& spec, int N, GridPtr grid);

// Q_{k,ell,lambda} = offset + 2 arctan(lambda r^k) and the decaying profile
// U = (Q - Q(inf)) / r^k fed to the linearized potential.
struct WaveMapStatic {
  RadialField Q;
  RadialField U;
};
WaveMapStatic wavemap_static(const WaveMapParams& params, GridPtr grid);

// phi(r, u) = sum_{k>=2} phi_k r^{(k-1)(N/2-1)-2} u^k
double phi_eval(const PhiSeries& series, double r, double u);

// closed-form phi for the k-equivariant wave map into the sphere
double wavemap_phi(int k, double r, double u);
double wavemap_dphi_du(int k, double r, double u);

}  // namespace chanlab
