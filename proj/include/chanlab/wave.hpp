// Leapfrog evolution of d_tt u - Delta_N u + V u = f for radial u on a
// uniform grid, exterior-cone energies, outer radiated energy estimation
// and exterior space-time norms.
#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "chanlab/radial.hpp"

namespace chanlab {

struct WaveState {
  double t = 0.0;
  RadialField u;
  RadialField v;  // d_t u
};

struct ProbeConfig {
  std::vector<double> radii;        // exterior-energy probe radii
  double t_center = 0.0;            // cone apex time
  std::size_t snapshot_stride = 0;  // in samples; 0 disables snapshots
  std::size_t sample_stride = 0;    // in time steps; 0 picks ~400 samples
  // Localized modes projected out of (u, v) at every sample time. Used to
  // suppress exponentially unstable bound states of deep potential wells,
  // whose amplification overflows double precision long before it can reach
  // the exterior cones. Filtering invalidates the conserved-energy series.
  std::vector<RadialField> filter_span;
};

struct EvolutionProbe {
  std::vector<double> times;  // sample times (integer steps)
  std::vector<double> radii;
  // exterior_energy[s][j]: energy outside r = radii[j] + |t_s - t_center|
  std::vector<std::vector<double>> exterior_energy;
  std::vector<double> conserved_energy;  // discrete leapfrog invariant
  double energy_drift = 0.0;             // max relative drift of the series
  std::vector<WaveState> snapshots;
  WaveState final_state;
  double t_center = 0.0;
  double dt = 0.0;
};

// Space-time forcing f(t, r); an empty function means no forcing.
using Forcing = std::function<double(double t, double r)>;

// Leapfrog with dt = cfl times the spectral stability limit of the discrete
// operator (close to dr away from the stiff origin rows); origin handled by
// the flux stencil, outer boundary homogeneous Dirichlet. Requires a uniform
// grid starting at r = 0, cfl in (0,1], and the causal margin
// r_max >= max probe radius + t_max + 2 dr. Aborts on non-finite state.
EvolutionProbe evolve(const WaveState& initial, const RadialField& potential,
                      const Forcing& forcing, double t_max, double cfl,
                      const ProbeConfig& probes, int N);

// Discrete bound states of -Delta + V with eigenvalue below `threshold`
// (w-orthonormal, most negative first), computed by Sturm-count bisection and
// inverse iteration on the same flux operator the solver uses. A bound state at
// eigenvalue -kappa^2 makes the linear flow grow like e^{kappa t}; the modes
// returned here are meant for ProbeConfig::filter_span.
std::vector<RadialField> unstable_modes(const RadialField& potential,
                                        GridPtr grid, int N,
                                        double threshold = -1.0);

// int_{R + |t - t_center|}^{r_max} (v^2 + (u')^2) r^{N-1} dr.
double exterior_energy_at(const WaveState& state, double R, double t_center,
                          int N);

struct OuterEnergy {
  double e_minus = 0.0;
  double e_plus = 0.0;
  double plateau_quality = 0.0;  // relative spread over the averaged window
  bool flagged = false;          // plateau_quality > 0.2
};

// Plateau average of the last quarter of the exterior-energy series at the
// given probe radius. `backward` may be null when one evolution covers both
// time directions (data with definite time parity).
OuterEnergy estimate_outer_energy(const EvolutionProbe& forward,
                                  const EvolutionProbe* backward, double R);

// L^p_t L^q_r norm of u over the exterior cone r > R + |t - t_center|,
// from probe snapshots. Supports (p,q) = (1,2) and (2, 2N/(N-3)).
double spacetime_cone_norm(const EvolutionProbe& probe, double p, double q,
                           double R, double t_center, int N);

}  // namespace chanlab
