// Leapfrog radial wave solver with flux-form spatial operator (symmetric
// with respect to the discrete r^{N-1} weights, so the staggered leapfrog
// energy is conserved to rounding), plus cone-energy diagnostics.
#include "chanlab/wave.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace chanlab {
namespace {

// Discrete radial laplacian context on a uniform grid starting at 0.
struct FluxOperator {
  std::vector<double> weight;  // cell weights w_i (w_0 from the origin cell)
  std::vector<double> flux;    // flux[i] = r_{i+1/2}^{N-1} / h
  std::vector<double> V;       // potential samples
  double h = 0.0;
  int N = 8;

  // out = -(Lu)_i + V_i u_i, the operator K with w-symmetric matrix.
  void apply_K(const std::vector<double>& u, std::vector<double>& out) const {
    const std::size_t n = u.size();
    out[0] = -flux[0] * (u[1] - u[0]) / weight[0] + V[0] * u[0];
    for (std::size_t i = 1; i + 1 < n; ++i)
      out[i] = -(flux[i] * (u[i + 1] - u[i]) - flux[i - 1] * (u[i] - u[i - 1])) /
                   weight[i] +
               V[i] * u[i];
    out[n - 1] = 0.0;  // Dirichlet node is never updated
  }
};

double dot_w(const std::vector<double>& w, const std::vector<double>& a,
             const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += w[i] * a[i] * b[i];
  return s;
}

FluxOperator make_flux_operator(const RadialGrid& grid,
                                const RadialField& potential, int N) {
  const double h = grid.spacing();
  const std::size_t n = grid.size();
  FluxOperator op;
  op.h = h;
  op.N = N;
  op.weight.resize(n);
  op.flux.resize(n);
  op.V.resize(n);
  // exact cell-volume weights int_{r - h/2}^{r + h/2} rho^{N-1} d rho keep
  // the operator w-symmetric and second order, and reduce the stiffness of
  // the first rows compared to midpoint weights
  op.weight[0] = std::pow(0.5 * h, N) / N;
  for (std::size_t i = 1; i < n; ++i)
    op.weight[i] = (std::pow(grid.nodes[i] + 0.5 * h, N) -
                    std::pow(grid.nodes[i] - 0.5 * h, N)) /
                   N;
  for (std::size_t i = 0; i + 1 < n; ++i)
    op.flux[i] = std::pow(grid.nodes[i] + 0.5 * h, N - 1) / h;
  op.flux[n - 1] = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    op.V[i] = value_at(potential, grid.nodes[i]);
  return op;
}

// Top eigenvalue of K by power iteration (Rayleigh quotient in the w-inner
// product), floored by the 1-d limit 4/h^2.
double estimate_lambda_max(const FluxOperator& op) {
  const std::size_t n = op.weight.size();
  std::vector<double> x(n, 0.0), kx(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i)
    x[i] = std::sin(0.5 + 3.7 * static_cast<double>(i));
  double lam = 4.0 / (op.h * op.h);
  for (int it = 0; it < 60; ++it) {
    op.apply_K(x, kx);
    double num = dot_w(op.weight, x, kx), den = dot_w(op.weight, x, x);
    if (den > 0.0) lam = std::abs(num / den);
    double norm = std::sqrt(dot_w(op.weight, kx, kx));
    if (norm == 0.0) break;
    for (std::size_t i = 0; i < n; ++i) x[i] = kx[i] / norm;
  }
  return std::max(4.0 / (op.h * op.h), 1.02 * lam);  // small safety factor
}

}  // namespace

std::vector<RadialField> unstable_modes(const RadialField& potential,
                                        GridPtr grid, int N,
                                        double threshold) {
  if (grid->policy != GridPolicy::Uniform || grid->front() != 0.0)
    throw std::invalid_argument(
        "unstable_modes: needs a uniform grid starting at r = 0");
  const std::size_t n = grid->size();
  const FluxOperator op = make_flux_operator(*grid, potential, N);

  // K is similar to a symmetric tridiagonal matrix T = D K D^{-1} with
  // D = diag(sqrt(w)); the Dirichlet node is excluded. Eigenvalues below the
  // threshold are isolated by Sturm counts and bisection, eigenvectors by
  // inverse iteration with the Thomas algorithm.
  const std::size_t m = n - 1;
  std::vector<double> d(m), e(m > 1 ? m - 1 : 0);
  d[0] = op.flux[0] / op.weight[0] + op.V[0];
  for (std::size_t i = 1; i < m; ++i)
    d[i] = (op.flux[i] + op.flux[i - 1]) / op.weight[i] + op.V[i];
  for (std::size_t i = 0; i + 1 < m; ++i)
    e[i] = -op.flux[i] / std::sqrt(op.weight[i] * op.weight[i + 1]);

  // number of eigenvalues of T below t (LDL^T sign count)
  auto count_below = [&](double t) {
    int cnt = 0;
    double q = d[0] - t;
    if (q < 0.0) ++cnt;
    for (std::size_t i = 1; i < m; ++i) {
      if (q == 0.0) q = 1e-300;
      q = d[i] - t - e[i - 1] * e[i - 1] / q;
      if (q < 0.0) ++cnt;
    }
    return cnt;
  };

  const int total = count_below(threshold);
  if (total <= 0) return {};

  double lo = d[0] - (m > 1 ? std::abs(e[0]) : 0.0);
  for (std::size_t i = 1; i < m; ++i) {
    double g = d[i] - std::abs(e[i - 1]) - (i + 1 < m ? std::abs(e[i]) : 0.0);
    lo = std::min(lo, g);
  }

  // k-th smallest eigenvalue by bisection on the Sturm count
  auto eigenvalue = [&](int k) {
    double a = lo, b = threshold;
    for (int it = 0; it < 200 && b - a > 1e-13 * std::max(1.0, std::abs(a));
         ++it) {
      const double mid = 0.5 * (a + b);
      if (count_below(mid) >= k + 1)
        b = mid;
      else
        a = mid;
    }
    return 0.5 * (a + b);
  };

  // Thomas solve of (T - mu I) x = b
  std::vector<double> cp(m), dp(m), x(m);
  auto solve_shifted = [&](double mu, std::vector<double>& rhs) {
    double denom = d[0] - mu;
    if (std::abs(denom) < 1e-300) denom = 1e-300;
    cp[0] = m > 1 ? e[0] / denom : 0.0;
    dp[0] = rhs[0] / denom;
    for (std::size_t i = 1; i < m; ++i) {
      denom = d[i] - mu - e[i - 1] * cp[i - 1];
      if (std::abs(denom) < 1e-300) denom = 1e-300;
      cp[i] = i + 1 < m ? e[i] / denom : 0.0;
      dp[i] = (rhs[i] - e[i - 1] * dp[i - 1]) / denom;
    }
    x[m - 1] = dp[m - 1];
    for (std::size_t i = m - 1; i-- > 0;) x[i] = dp[i] - cp[i] * x[i + 1];
    rhs = x;
  };

  std::vector<RadialField> out;
  std::vector<std::vector<double>> found;  // T-eigenvectors (orthonormal)
  for (int k = 0; k < total && k < 8; ++k) {
    const double lam = eigenvalue(k);
    std::vector<double> y(m);
    for (std::size_t i = 0; i < m; ++i)
      y[i] = 1.0 + 0.3 * std::sin(1.7 * static_cast<double>(i) + 0.4);
    for (int it = 0; it < 6; ++it) {
      for (const auto& f : found) {  // deflate clustered eigenvalues
        double c = 0.0;
        for (std::size_t i = 0; i < m; ++i) c += y[i] * f[i];
        for (std::size_t i = 0; i < m; ++i) y[i] -= c * f[i];
      }
      solve_shifted(lam + 1e-10 * std::max(1.0, std::abs(lam)), y);
      double nrm = 0.0;
      for (double v : y) nrm += v * v;
      nrm = std::sqrt(nrm);
      for (double& v : y) v /= nrm;
    }
    found.push_back(y);
    RadialField f;
    f.grid = grid;
    f.values.assign(n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      f.values[i] = y[i] / std::sqrt(op.weight[i]);
    f.zero_tail = PowerTail{0.0, f.values[0]};
    f.inf_tail = PowerTail{-1000.0, 0.0};
    out.push_back(std::move(f));
  }
  return out;
}

EvolutionProbe evolve(const WaveState& initial, const RadialField& potential,
                      const Forcing& forcing, double t_max, double cfl,
                      const ProbeConfig& probes, int N) {
  const RadialGrid& grid = *initial.u.grid;
  if (grid.policy != GridPolicy::Uniform || grid.front() != 0.0)
    throw std::invalid_argument("evolve: needs a uniform grid starting at r = 0");
  if (!(cfl > 0.0 && cfl <= 1.0))
    throw std::invalid_argument("evolve: cfl must lie in (0, 1]");
  const double h = grid.spacing();
  const std::size_t n = grid.size();
  double max_probe = 0.0;
  for (double R : probes.radii) max_probe = std::max(max_probe, R);
  if (grid.back() < max_probe + t_max + 2.0 * h) {
    std::ostringstream msg;
    msg << "evolve: causal margin violated, r_max = " << grid.back()
        << " < " << max_probe << " + " << t_max << " + 2h";
    throw std::invalid_argument(msg.str());
  }

  const FluxOperator op = make_flux_operator(grid, potential, N);

  // leapfrog is stable for dt < 2 / sqrt(lambda_max(K)); near the origin the
  // radial stencil is stiffer than the 1-d limit 4/h^2, so estimate the top
  // eigenvalue by power iteration instead of trusting dt = cfl * h
  const double lambda_max = estimate_lambda_max(op);
  double dt = cfl * 2.0 / std::sqrt(lambda_max);
  const std::size_t steps =
      std::max<std::size_t>(1, static_cast<std::size_t>(
                                   std::ceil(t_max / dt - 1e-12)));
  dt = t_max / static_cast<double>(steps);  // land exactly on t_max
  const std::size_t stride =
      probes.sample_stride > 0
          ? probes.sample_stride
          : std::max<std::size_t>(1, steps / 400);

  std::vector<double> u = initial.u.values;
  std::vector<double> v_half = initial.v.values;  // becomes v_{1/2} below
  std::vector<double> ku(n, 0.0);
  u[n - 1] = 0.0;
  v_half[n - 1] = 0.0;

  // unstable-mode filter: sampled on this grid, w-normalized
  std::vector<std::vector<double>> filt;
  for (const RadialField& m : probes.filter_span) {
    std::vector<double> vals(n);
    for (std::size_t i = 0; i < n; ++i) vals[i] = value_at(m, grid.nodes[i]);
    vals[n - 1] = 0.0;
    const double norm = std::sqrt(dot_w(op.weight, vals, vals));
    if (norm == 0.0) continue;
    for (double& x : vals) x /= norm;
    filt.push_back(std::move(vals));
  }
  auto apply_filter = [&](std::vector<double>& a) {
    for (const auto& m : filt) {
      const double c = dot_w(op.weight, a, m);
      for (std::size_t i = 0; i < n; ++i) a[i] -= c * m[i];
    }
  };
  apply_filter(u);
  apply_filter(v_half);

  EvolutionProbe out;
  out.radii = probes.radii;
  out.t_center = probes.t_center;
  out.dt = dt;

  auto force_into = [&](double t, std::vector<double>& acc, double scale) {
    if (!forcing) return;
    for (std::size_t i = 0; i + 1 < n; ++i)
      acc[i] += scale * forcing(t, grid.nodes[i]);
  };

  auto sample = [&](double t, const std::vector<double>& v_prev_half,
                    const std::vector<double>& v_next_half,
                    std::size_t sample_index) {
    // integer-time velocity by averaging the staggered half-step values
    std::vector<double> v_int(n);
    for (std::size_t i = 0; i < n; ++i)
      v_int[i] = 0.5 * (v_prev_half[i] + v_next_half[i]);
    WaveState state;
    state.t = t;
    // Dirichlet boundary plus finite speed keep states compactly supported;
    // the origin value extends evenly
    state.u = RadialField{initial.u.grid, u, PowerTail{0.0, u[0]},
                          PowerTail{-1000.0, 0.0}};
    state.v = RadialField{initial.u.grid, v_int, PowerTail{0.0, v_int[0]},
                          PowerTail{-1000.0, 0.0}};
    for (double x : u)
      if (!std::isfinite(x)) {
        std::ostringstream msg;
        msg << "evolve: non-finite state at t = " << t << " (instability)";
        throw std::runtime_error(msg.str());
      }
    out.times.push_back(t);
    std::vector<double> row;
    row.reserve(probes.radii.size());
    for (double R : probes.radii)
      row.push_back(exterior_energy_at(state, R, probes.t_center, N));
    out.exterior_energy.push_back(std::move(row));
    // staggered invariant E = 1/2 <v+, v-> + 1/2 <u, K u> (w-weighted);
    // exactly conserved for the symmetric flux operator
    op.apply_K(u, ku);
    double e = 0.5 * dot_w(op.weight, v_prev_half, v_next_half) +
               0.5 * dot_w(op.weight, u, ku);
    if (forcing) e = 0.0;  // no invariant under forcing; series left zero
    out.conserved_energy.push_back(e);
    if (probes.snapshot_stride > 0 &&
        sample_index % probes.snapshot_stride == 0)
      out.snapshots.push_back(state);
    out.final_state = std::move(state);
  };

  // bootstrap: v_{1/2} = v_0 - dt/2 K u_0 + dt/2 f(0)
  op.apply_K(u, ku);
  std::vector<double> v_prev = v_half;  // v at t = 0 (integer)
  for (std::size_t i = 0; i + 1 < n; ++i) v_half[i] -= 0.5 * dt * ku[i];
  force_into(0.0, v_half, 0.5 * dt);
  {
    // at t = 0 the two half-step values straddling it are v_{-1/2}, v_{1/2};
    // reconstruct v_{-1/2} = 2 v_0 - v_{1/2}
    std::vector<double> v_m(n);
    for (std::size_t i = 0; i < n; ++i) v_m[i] = 2.0 * v_prev[i] - v_half[i];
    sample(0.0, v_m, v_half, 0);
  }

  std::size_t sample_index = 1;
  for (std::size_t s = 1; s <= steps; ++s) {
    for (std::size_t i = 0; i + 1 < n; ++i) u[i] += dt * v_half[i];
    const double t = static_cast<double>(s) * dt;
    const bool do_sample = (s % stride == 0) || s == steps;
    if (do_sample && !filt.empty()) {
      apply_filter(u);
      apply_filter(v_half);
    }
    std::vector<double> v_before;
    if (do_sample) v_before = v_half;
    if (s < steps) {
      op.apply_K(u, ku);
      for (std::size_t i = 0; i + 1 < n; ++i) v_half[i] -= dt * ku[i];
      force_into(t, v_half, dt);
    } else {
      // close the final half step to land v on the integer time
      op.apply_K(u, ku);
      for (std::size_t i = 0; i + 1 < n; ++i) v_half[i] -= dt * ku[i];
      force_into(t, v_half, dt);
    }
    if (do_sample) {
      sample(t, v_before, v_half, sample_index);
      ++sample_index;
    }
  }

  double e0 = out.conserved_energy.empty() ? 0.0 : out.conserved_energy[0];
  double drift = 0.0;
  for (double e : out.conserved_energy)
    drift = std::max(drift, std::abs(e - e0));
  out.energy_drift = e0 != 0.0 ? drift / std::abs(e0) : drift;
  return out;
}

double exterior_energy_at(const WaveState& state, double R, double t_center,
                          int N) {
  const double lo = R + std::abs(state.t - t_center);
  if (lo > state.u.grid->back())
    throw std::invalid_argument("exterior_energy_at: cone exits grid");
  const RadialField du = differentiate(state.u);
  double e = integrate_product(state.v, state.v, N, lo, state.u.grid->back());
  e += integrate_product(du, du, N, lo, state.u.grid->back());
  return e;
}

OuterEnergy estimate_outer_energy(const EvolutionProbe& forward,
                                  const EvolutionProbe* backward, double R) {
  auto series_at = [&](const EvolutionProbe& p) {
    std::size_t j = p.radii.size();
    for (std::size_t i = 0; i < p.radii.size(); ++i)
      if (std::abs(p.radii[i] - R) <= 1e-12 * std::max(1.0, R)) j = i;
    if (j == p.radii.size())
      throw std::invalid_argument("estimate_outer_energy: radius not probed");
    std::vector<double> s;
    s.reserve(p.exterior_energy.size());
    for (const auto& row : p.exterior_energy) s.push_back(row[j]);
    return s;
  };
  auto plateau = [](const std::vector<double>& s, double& quality) {
    if (s.empty()) {
      quality = 0.0;
      return 0.0;
    }
    const std::size_t start = s.size() - std::max<std::size_t>(1, s.size() / 4);
    double lo = s[start], hi = s[start], sum = 0.0;
    for (std::size_t i = start; i < s.size(); ++i) {
      lo = std::min(lo, s[i]);
      hi = std::max(hi, s[i]);
      sum += s[i];
    }
    const double avg = sum / static_cast<double>(s.size() - start);
    quality = avg > 0.0 ? (hi - lo) / avg : 0.0;
    return avg;
  };
  OuterEnergy out;
  double q_plus = 0.0, q_minus = 0.0;
  out.e_plus = plateau(series_at(forward), q_plus);
  out.e_minus = backward ? plateau(series_at(*backward), q_minus) : out.e_plus;
  if (!backward) q_minus = q_plus;
  out.plateau_quality = std::max(q_plus, q_minus);
  out.flagged = out.plateau_quality > 0.2;
  return out;
}

double spacetime_cone_norm(const EvolutionProbe& probe, double p, double q,
                           double R, double t_center, int N) {
  const bool pq_12 = (p == 1.0 && q == 2.0);
  const bool pq_str = (p == 2.0 && q == 2.0 * N / (N - 3.0));
  if (!pq_12 && !pq_str)
    throw std::invalid_argument("spacetime_cone_norm: unsupported (p, q)");
  if (probe.snapshots.size() < 2)
    throw std::invalid_argument("spacetime_cone_norm: needs snapshots");
  const double dt_snap = probe.snapshots[1].t - probe.snapshots[0].t;
  if (probe.dt > 0.0 && dt_snap > 4.0 * probe.dt + 1e-12)
    throw std::invalid_argument("spacetime_cone_norm: undersampled snapshots");
  std::vector<double> g;  // spatial norm per snapshot time
  g.reserve(probe.snapshots.size());
  for (const auto& snap : probe.snapshots) {
    const double lo = R + std::abs(snap.t - t_center);
    if (lo > snap.u.grid->back())
      throw std::invalid_argument("spacetime_cone_norm: cone exits grid");
    RadialField absq = snap.u;
    for (double& x : absq.values) x = std::pow(std::abs(x), q);
    absq.zero_tail.reset();
    absq.inf_tail = PowerTail{-1000.0, 0.0};
    const double mass = integrate_radial(absq, N, lo, snap.u.grid->back());
    g.push_back(std::pow(std::max(0.0, mass), 1.0 / q));
  }
  double acc = 0.0;  // trapezoid in time of g^p
  for (std::size_t i = 0; i + 1 < g.size(); ++i) {
    const double dt = probe.snapshots[i + 1].t - probe.snapshots[i].t;
    acc += 0.5 * dt * (std::pow(g[i], p) + std::pow(g[i + 1], p));
  }
  return std::pow(acc, 1.0 / p);
}

}  // namespace chanlab
