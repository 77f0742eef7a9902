// Radial grids, fields, quadrature, differentiation and power-law tail
// fitting. Everything downstream (ground state, ladders, norms, solver)
// consumes these primitives.
#pragma once

#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace chanlab {

enum class GridPolicy { Uniform, GradedLog };

struct RadialGrid {
  std::vector<double> nodes;  // strictly increasing, nonnegative
  GridPolicy policy = GridPolicy::Uniform;

  std::size_t size() const { return nodes.size(); }
  double front() const { return nodes.front(); }
  double back() const { return nodes.back(); }
  // Constant spacing; only meaningful for uniform grids.
  double spacing() const { return nodes[1] - nodes[0]; }
};

using GridPtr = std::shared_ptr<const RadialGrid>;

// Power-law behavior c * r^e near one end of the domain.
struct PowerTail {
  double exponent = 0.0;
  double coefficient = 0.0;
};

struct RadialField {
  GridPtr grid;
  std::vector<double> values;
  std::optional<PowerTail> zero_tail;  // behavior as r -> 0
  std::optional<PowerTail> inf_tail;   // behavior as r -> infinity
};

struct DimensionProfile {
  int N = 8;
  int sigma = 0;            // 0 if N = 0 mod 4, 1 if N = 2 mod 4
  int ladder_top_even = 0;  // (N-6)/2
  int ladder_top_odd = 0;   // (N-8)/2
  int power_span_count = 0; // N/4 or (N-2)/4 depending on parity

  static DimensionProfile make(int N);
};

GridPtr make_grid(double r_min, double r_max, std::size_t count,
                  GridPolicy policy);

// Builds f(r) on the grid from a callable; tails are left unset.
template <typename F>
RadialField field_from(GridPtr grid, F&& fn) {
  RadialField f;
  f.grid = std::move(grid);
  f.values.reserve(f.grid->size());
  for (double r : f.grid->nodes) f.values.push_back(fn(r));
  return f;
}

RadialField zero_field(GridPtr grid);

// Pointwise value with tail extension beyond the grid support and
// monotone-cubic interpolation inside it.
double value_at(const RadialField& f, double r);

constexpr double kInf = std::numeric_limits<double>::infinity();

// integral of f(r) r^{N-1} dr on [lo, hi]; hi may be infinity when an
// integrable inf_tail is present, and lo may undershoot the grid when an
// integrable zero_tail is present.
double integrate_radial(const RadialField& f, int N, double lo, double hi);

// Same weight, integrand f*g. Tail metadata combines multiplicatively.
double integrate_product(const RadialField& f, const RadialField& g, int N,
                         double lo, double hi);

// Second-order finite differences; tails differentiated analytically.
RadialField differentiate(const RadialField& f);

// Delta_N f = f'' + (N-1)/r f'; even-extension stencil at r = 0.
RadialField radial_laplacian(const RadialField& f, int N);

enum class FitEnd { Origin, Infinity };

struct PowerFit {
  double exponent = 0.0;
  double coefficient = 0.0;
  double residual = 0.0;  // RMS deviation of the log-log fit
};

PowerFit fit_power_law(const RadialField& f, FitEnd end, double decades);

// Resamples onto another grid by monotone cubic interpolation; tails carry
// over unchanged.
RadialField resample(const RadialField& f, GridPtr grid);

// Fits and stores both tails from the outer/inner decade when the field is
// sign-definite there; leaves a tail unset if the fit fails.
void fit_and_store_tails(RadialField& f);

// sum_k coeffs[k] * fields[k], with tail bookkeeping: the surviving tail at
// each end is the dominant exponent among the contributing terms.
RadialField linear_combination(const std::vector<const RadialField*>& fields,
                               const std::vector<double>& coeffs);

}  // namespace chanlab
