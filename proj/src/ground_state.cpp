#include "chanlab/ground_state.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace chanlab {

namespace {

double w_argument(int N, double r) { return r * r / (double(N) * (N - 2)); }

// (N(N-2))^{(N-2)/2}, the coefficient of the W tail
double w_tail_coefficient(int N) {
  return std::pow(double(N) * (N - 2), 0.5 * (N - 2));
}

}  // namespace

double eval_W(int N, double r) {
  return std::pow(1.0 + w_argument(N, r), -0.5 * (N - 2));
}

double eval_lambda_W(int N, double r) {
  const double s = w_argument(N, r);
  return 0.5 * (N - 2) * (1.0 - s) / (1.0 + s) * eval_W(N, r);
}

double eval_lambda_W_prime(int N, double r) {
  const double s = w_argument(N, r);
  const double sp = 2.0 * r / (double(N) * (N - 2));
  const double W = eval_W(N, r);
  const double Wp = -0.5 * (N - 2) * std::pow(1.0 + s, -0.5 * N) * sp;
  const double q = (1.0 - s) / (1.0 + s);
  const double qp = -2.0 * sp / ((1.0 + s) * (1.0 + s));
  return 0.5 * (N - 2) * (qp * W + q * Wp);
}

double eval_V(int N, double r) {
  return -double(N + 2) / (N - 2) *
         std::pow(eval_W(N, r), 4.0 / (N - 2));
}

RadialField make_W_field(int N, GridPtr grid) {
  auto f = field_from(std::move(grid), [N](double r) { return eval_W(N, r); });
  f.zero_tail = PowerTail{0.0, 1.0};
  f.inf_tail = PowerTail{-double(N - 2), w_tail_coefficient(N)};
  return f;
}

RadialField make_lambda_W_field(int N, GridPtr grid) {
  auto f = field_from(std::move(grid),
                      [N](double r) { return eval_lambda_W(N, r); });
  f.zero_tail = PowerTail{0.0, 0.5 * (N - 2)};
  f.inf_tail = PowerTail{-double(N - 2), -0.5 * (N - 2) * w_tail_coefficient(N)};
  return f;
}

RadialField make_V_field(int N, GridPtr grid) {
  auto f = field_from(std::move(grid), [N](double r) { return eval_V(N, r); });
  const double c = -double(N + 2) / (N - 2);
  f.zero_tail = PowerTail{0.0, c};
  // W^{4/(N-2)} ~ (N(N-2))^2 r^{-4}
  f.inf_tail = PowerTail{-4.0, c * std::pow(double(N) * (N - 2), 2.0)};
  return f;
}

GammaSolution build_gamma_full(int N, GridPtr grid) {
  const auto& r = grid->nodes;
  if (r.front() <= 0.0)
    throw std::invalid_argument("Gamma is singular at r = 0; grid must start at r > 0");
  if (r.size() < 3) throw std::invalid_argument("grid too small for Gamma");

  // ODE in s = log r for u(s) = Gamma(e^s):
  //   u'' + (N-2) u' - e^{2s} V(e^s) u = 0
  // from s = 0 with u(0) = 0, u'(0) = Gamma'(1) = -1/LambdaW(1).
  auto rhs = [N](double s, double u, double up) {
    const double rr = std::exp(s);
    return -(double(N) - 2.0) * up + rr * rr * eval_V(N, rr) * u;
  };
  auto rk4 = [&](double s, double& u, double& up, double h) {
    const double k1u = up, k1p = rhs(s, u, up);
    const double k2u = up + 0.5 * h * k1p,
                 k2p = rhs(s + 0.5 * h, u + 0.5 * h * k1u, up + 0.5 * h * k1p);
    const double k3u = up + 0.5 * h * k2p,
                 k3p = rhs(s + 0.5 * h, u + 0.5 * h * k2u, up + 0.5 * h * k2p);
    const double k4u = up + h * k3p,
                 k4p = rhs(s + h, u + h * k3u, up + h * k3p);
    u += h / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u);
    up += h / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p);
  };
  auto integrate_to = [&](double s_from, double s_to, double& u, double& up) {
    const double span = s_to - s_from;
    const int steps = std::max(2, int(std::ceil(std::abs(span) / 2e-4)));
    const double h = span / steps;
    double s = s_from;
    for (int i = 0; i < steps; ++i) {
      rk4(s, u, up, h);
      s += h;
    }
  };

  const std::size_t n = r.size();
  std::vector<double> gv(n), gp(n);
  const double up0 = -1.0 / eval_lambda_W(N, 1.0);

  // locate the first node >= 1 and sweep outward / inward from r = 1
  std::size_t i1 = std::size_t(std::lower_bound(r.begin(), r.end(), 1.0) -
                               r.begin());
  {
    double u = 0.0, up = up0, s = 0.0;
    for (std::size_t i = i1; i < n; ++i) {
      const double st = std::log(r[i]);
      integrate_to(s, st, u, up);
      s = st;
      gv[i] = u;
      gp[i] = up / r[i];
    }
  }
  {
    double u = 0.0, up = up0, s = 0.0;
    for (std::size_t ii = i1; ii-- > 0;) {
      const double st = std::log(r[ii]);
      integrate_to(s, st, u, up);
      s = st;
      gv[ii] = u;
      gp[ii] = up / r[ii];
    }
  }

  GammaSolution sol;
  sol.gamma.grid = grid;
  sol.gamma.values = gv;
  sol.gamma_prime.grid = grid;
  sol.gamma_prime.values = gp;

  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double wr = gv[i] * eval_lambda_W_prime(N, r[i]) -
                      eval_lambda_W(N, r[i]) * gp[i];
    const double target = std::pow(r[i], -double(N - 1));
    worst = std::max(worst, std::abs(wr - target) / target);
  }
  sol.max_wronskian_rel_error = worst;
  if (worst > 1e-5)
    throw std::runtime_error("Gamma construction failed: Wronskian residual " +
                             std::to_string(worst));

  sol.gamma.zero_tail =
      PowerTail{-double(N - 2), gv.front() * std::pow(r.front(), N - 2)};
  sol.gamma.inf_tail = PowerTail{0.0, gv.back()};
  sol.gamma_prime.zero_tail =
      PowerTail{-double(N - 1),
                -double(N - 2) * sol.gamma.zero_tail->coefficient};
  sol.gamma_prime.inf_tail = PowerTail{-double(N - 1), 0.0};
  return sol;
}

RadialField build_gamma(int N, GridPtr grid) {
  return build_gamma_full(N, std::move(grid)).gamma;
}

RadialField rescale(const RadialField& f, double lambda, ScalingKind kind,
                    int N) {
  if (!(lambda > 0.0)) throw std::invalid_argument("scale must be positive");
  double p = 0.0;
  switch (kind) {
    case ScalingKind::H1Critical: p = 0.5 * (N - 2); break;
    case ScalingKind::L2Critical: p = 0.5 * N; break;
    case ScalingKind::Potential:  p = 2.0; break;
  }
  const double amp = std::pow(lambda, -p);
  RadialField g;
  g.grid = f.grid;
  g.values.reserve(f.values.size());
  for (double r : f.grid->nodes) g.values.push_back(amp * value_at(f, r / lambda));
  auto scale_tail = [&](const std::optional<PowerTail>& t)
      -> std::optional<PowerTail> {
    if (!t) return std::nullopt;
    return PowerTail{t->exponent,
                     amp * t->coefficient * std::pow(lambda, -t->exponent)};
  };
  g.zero_tail = scale_tail(f.zero_tail);
  g.inf_tail = scale_tail(f.inf_tail);
  return g;
}

std::pair<double, MultisolitonGeometry> separation_gamma(
    const std::vector<double>& lambdas, int gamma_exponent) {
  const std::size_t J = lambdas.size();
  if (J == 0) throw std::invalid_argument("empty scale vector");
  for (std::size_t j = 0; j < J; ++j) {
    if (!(lambdas[j] > 0.0))
      throw std::invalid_argument("scales must be positive");
    if (j + 1 < J && !(lambdas[j + 1] < lambdas[j]))
      throw std::invalid_argument("scales must be strictly decreasing");
  }
  double ratio = 0.0;  // empty-sup convention for J = 1
  for (std::size_t j = 0; j + 1 < J; ++j)
    ratio = std::max(ratio, lambdas[j + 1] / lambdas[j]);
  const double gamma = std::pow(ratio, double(gamma_exponent));
  MultisolitonGeometry geo;
  geo.gamma = gamma;
  for (std::size_t j = 0; j + 1 < J; ++j) {
    geo.r_plus.push_back(std::sqrt(lambdas[j] * lambdas[j + 1]));
    geo.r_minus.push_back(lambdas[j + 1] * std::pow(gamma, -0.25));
  }
  return {gamma, geo};
}

namespace {

// Linearized wave-map potential around Q_{k,l,lambda}, in closed form:
//   d2phi(r, U) = 8 k^2 lambda^2 r^{2k-2} / (1 + lambda^2 r^{2k})^2.
double wavemap_potential(int k, double lambda, double r) {
  const double x = lambda * std::pow(r, k);
  const double denom = 1.0 + x * x;
  return 8.0 * double(k) * k * lambda * lambda * std::pow(r, 2 * k - 2) /
         (denom * denom);
}

// Shooting solve of Delta_N U = phi(r, U) with U(0) = a, U'(0) = 0, bisecting
// on the sign of U at the far end; returns the decaying static profile.
RadialField shoot_static(const PhiSeries& series, GridPtr grid) {
  const int N = series.N;
  const auto& rn = grid->nodes;
  const double r_end = rn.back();
  auto integrate = [&](double a, std::vector<double>* out) {
    double r = 1e-6, u = a, up = 0.0;
    const int steps = 40000;
    const double h = (r_end - r) / steps;
    std::size_t gi = 0;
    if (out) out->assign(rn.size(), a);
    auto acc = [&](double rr, double uu, double uup) {
      return phi_eval(series, rr, uu) - double(N - 1) / rr * uup;
    };
    for (int i = 0; i < steps; ++i) {
      const double k1u = up, k1p = acc(r, u, up);
      const double k2u = up + 0.5 * h * k1p,
                   k2p = acc(r + 0.5 * h, u + 0.5 * h * k1u, up + 0.5 * h * k1p);
      const double k3u = up + 0.5 * h * k2p,
                   k3p = acc(r + 0.5 * h, u + 0.5 * h * k2u, up + 0.5 * h * k2p);
      const double k4u = up + h * k3p, k4p = acc(r + h, u + h * k3u, up + h * k3p);
      u += h / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u);
      up += h / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p);
      r += h;
      if (!std::isfinite(u)) return u;
      if (out)
        while (gi < rn.size() && rn[gi] <= r) (*out)[gi++] = u;
    }
    return u;
  };
  // bracket a sign change of the endpoint value in the shooting amplitude
  double a_lo = 0.0, a_hi = 1.0;
  double f_hi = integrate(a_hi, nullptr);
  int expand = 0;
  while (std::isfinite(f_hi) && f_hi > 0 && expand++ < 40) {
    a_hi *= 2.0;
    f_hi = integrate(a_hi, nullptr);
  }
  if (!(f_hi <= 0) && std::isfinite(f_hi))
    throw std::runtime_error("static solution missing: shooting failed to bracket");
  for (int it = 0; it < 200 && a_hi - a_lo > 1e-8 * std::max(1.0, a_hi); ++it) {
    const double mid = 0.5 * (a_lo + a_hi);
    const double fm = integrate(mid, nullptr);
    if (std::isfinite(fm) && fm > 0)
      a_lo = mid;
    else
      a_hi = mid;
  }
  std::vector<double> vals;
  integrate(0.5 * (a_lo + a_hi), &vals);
  RadialField U;
  U.grid = std::move(grid);
  U.values = std::move(vals);
  fit_and_store_tails(U);
  return U;
}

}  // namespace

RadialField assemble_potential(const PotentialSpec& spec, int N, GridPtr grid) {
  RadialField out;
  out.grid = grid;
  out.values.assign(grid->size(), 0.0);

  if (const auto* s = std::get_if<SingleSpec>(&spec.variant)) {
    const double l = s->lambda;
    for (std::size_t i = 0; i < grid->size(); ++i)
      out.values[i] = eval_V(N, grid->nodes[i] / l) / (l * l);
    out.zero_tail = PowerTail{0.0, eval_V(N, 0.0) / (l * l)};
    out.inf_tail = PowerTail{-4.0, -double(N + 2) / (N - 2) *
                                       std::pow(double(N) * (N - 2), 2.0) *
                                       l * l};
  } else if (const auto* m = std::get_if<MultisolitonSpec>(&spec.variant)) {
    separation_gamma(m->lambdas);  // validates ordering
    double c0 = 0.0, c4 = 0.0;
    for (double l : m->lambdas) {
      for (std::size_t i = 0; i < grid->size(); ++i)
        out.values[i] += eval_V(N, grid->nodes[i] / l) / (l * l);
      c0 += eval_V(N, 0.0) / (l * l);
      c4 += -double(N + 2) / (N - 2) * std::pow(double(N) * (N - 2), 2.0) * l * l;
    }
    out.zero_tail = PowerTail{0.0, c0};
    out.inf_tail = PowerTail{-4.0, c4};
  } else {
    const auto& g = std::get<GeneralSpec>(spec.variant);
    if (g.wavemap) {
      const auto& wm = *g.wavemap;
      for (std::size_t i = 0; i < grid->size(); ++i)
        out.values[i] = wavemap_potential(wm.k, wm.lambda, grid->nodes[i]);
      out.zero_tail = PowerTail{double(2 * wm.k - 2),
                                8.0 * wm.k * wm.k * wm.lambda * wm.lambda};
      out.inf_tail = PowerTail{-double(2 * wm.k + 2),
                               8.0 * wm.k * wm.k / (wm.lambda * wm.lambda)};
    } else if (g.series) {
      RadialField U = shoot_static(*g.series, grid);
      const auto& s = *g.series;
      for (std::size_t i = 0; i < grid->size(); ++i) {
        const double r = grid->nodes[i];
        if (r <= 0.0) continue;
        double acc = 0.0;
        for (std::size_t j = 0; j < s.coefficients.size(); ++j) {
          const double k = double(j) + 2.0;
          acc += k * s.coefficients[j] *
                 std::pow(r, (k - 1.0) * (0.5 * s.N - 1.0) - 2.0) *
                 std::pow(U.values[i], k - 1.0);
        }
        out.values[i] = acc;
      }
      fit_and_store_tails(out);
    } else {
      throw std::invalid_argument("static solution missing for general potential");
    }
  }
  for (double v : out.values)
    if (!std::isfinite(v)) throw std::runtime_error("non-finite potential");
  return out;
}

WaveMapStatic wavemap_static(const WaveMapParams& params, GridPtr grid) {
  if (params.k < 1) throw std::invalid_argument("wave-map index k must be >= 1");
  if (!(params.lambda > 0.0)) throw std::invalid_argument("scale must be positive");
  const double offset =
      params.use_pi_offset ? params.ell * std::numbers::pi
                           : double(params.ell) * params.k;
  WaveMapStatic st;
  st.Q = field_from(grid, [&](double r) {
    return offset + 2.0 * std::atan(params.lambda * std::pow(r, params.k));
  });
  st.Q.zero_tail = PowerTail{0.0, offset};
  st.Q.inf_tail = PowerTail{0.0, offset + std::numbers::pi};
  // decaying profile: U = (Q - Q(inf)) / r^k = (2 atan(l r^k) - pi)/r^k
  st.U = field_from(std::move(grid), [&](double r) {
    if (r <= 0.0) return 0.0;  // placeholder; U is singular at the origin
    const double x = params.lambda * std::pow(r, params.k);
    return (2.0 * std::atan(x) - std::numbers::pi) / std::pow(r, params.k);
  });
  st.U.zero_tail = PowerTail{-double(params.k), -std::numbers::pi};
  st.U.inf_tail = PowerTail{-double(2 * params.k), -2.0 / params.lambda};
  return st;
}

double phi_eval(const PhiSeries& series, double r, double u) {
  if (!(r > 0.0)) throw std::invalid_argument("phi_eval requires r > 0");
  if (u == 0.0) return 0.0;
  double acc = 0.0, prev_term = 0.0;
  int growth = 0;
  for (std::size_t j = 0; j < series.coefficients.size(); ++j) {
    const double k = double(j) + 2.0;
    const double term = series.coefficients[j] *
                        std::pow(r, (k - 1.0) * (0.5 * series.N - 1.0) - 2.0) *
                        std::pow(u, k);
    if (j > 0 && std::abs(term) > std::abs(prev_term) && std::abs(term) > 1.0)
      ++growth;
    else
      growth = 0;
    if (growth >= 4)
      throw std::runtime_error("phi series diverges on stored prefix");
    acc += term;
    prev_term = term;
  }
  return acc;
}

double wavemap_phi(int k, double r, double u) {
  const double x = std::pow(r, k) * u;
  return double(k) * k / std::pow(r, 2 + k) * (x - 0.5 * std::sin(2.0 * x));
}

double wavemap_dphi_du(int k, double r, double u) {
  const double x = std::pow(r, k) * u;
  return double(k) * k / (r * r) * (1.0 - std::cos(2.0 * x));
}

}  // namespace chanlab

