// Inner products, Z norms over dyadic shells, Gram-solve projections, the
// averaging operator and Z-distances to spans.
#include "chanlab/norms.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "chanlab/ground_state.hpp"

namespace chanlab {
namespace {

double angle_bracket(double x) { return std::sqrt(1.0 + x * x); }

// --- small dense symmetric linear algebra -------------------------------

// Cholesky factorization A = L L^T in place; throws if not SPD.
void cholesky(std::vector<std::vector<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j][j];
    for (std::size_t k = 0; k < j; ++k) d -= a[j][k] * a[j][k];
    if (!(d > 0.0)) throw std::runtime_error("Gram matrix not positive definite");
    a[j][j] = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i][j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i][k] * a[j][k];
      a[i][j] = s / a[j][j];
    }
  }
}

std::vector<double> cholesky_solve(std::vector<std::vector<double>> a,
                                   std::vector<double> b) {
  cholesky(a);
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) b[i] -= a[i][k] * b[k];
    b[i] /= a[i][i];
  }
  for (std::size_t ii = n; ii-- > 0;) {
    for (std::size_t k = ii + 1; k < n; ++k) b[ii] -= a[k][ii] * b[k];
    b[ii] /= a[ii][ii];
  }
  return b;
}

// Jacobi eigenvalue sweep for a small symmetric matrix; returns eigenvalues.
std::vector<double> symmetric_eigenvalues(std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a[p][q] == 0.0) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
      }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a[i][i];
  return ev;
}

// --- dyadic shell machinery ---------------------------------------------

// L2 mass of f on the shell (s, 2s) with weight r^{N-1}. Shells fully past
// the sampled range are closed analytically from the tail metadata.
double shell_mass_sq(const RadialField& f, int N, double s) {
  const auto& nodes = f.grid->nodes;
  const double r_lo = nodes.front() > 0.0 ? nodes.front() : nodes[1];
  const double r_hi = nodes.back();
  auto tail_shell = [&](const PowerTail& t) {
    const double p = 2.0 * t.exponent + N;
    const double c2 = t.coefficient * t.coefficient;
    if (std::abs(p) < 1e-12) return c2 * std::log(2.0);
    return c2 * (std::pow(2.0, p) - 1.0) / p * std::pow(s, p);
  };
  if (2.0 * s <= r_lo && f.zero_tail) return tail_shell(*f.zero_tail);
  if (s >= r_hi && f.inf_tail) return tail_shell(*f.inf_tail);
  return integrate_product(f, f, N, s, 2.0 * s);
}

struct ShellWeight {
  double alpha;
  int N;
  const ZVariant* variant;
  double operator()(double s) const {
    switch (variant->kind) {
      case ZVariantKind::Plain:
        return std::pow(s, -0.5 * N - alpha) / angle_bracket(std::log(s));
      case ZVariantKind::Based:
        return std::pow(s, -0.5 * N - alpha) /
               angle_bracket(std::log(s / angle_bracket(variant->R)));
      case ZVariantKind::Multi: {
        double inf_w = kInf;
        for (double l : variant->lambdas) {
          const double w = variant->literal_weight
                               ? angle_bracket(s / l)
                               : angle_bracket(std::log(s / l));
          inf_w = std::min(inf_w, w);
        }
        const double ex = variant->literal_weight ? -3.0 - alpha
                                                  : -0.5 * N - alpha;
        return std::pow(s, ex) / inf_w;
      }
    }
    return 0.0;
  }
};

struct ShellRange {
  int k_min;
  int k_max;
};

ShellRange shell_range(const RadialField& f, const ZVariant& variant) {
  const auto& nodes = f.grid->nodes;
  const double r_lo = nodes.front() > 0.0 ? nodes.front() : nodes[1];
  const double r_hi = nodes.back();
  const bool has_tails = f.zero_tail.has_value() && f.inf_tail.has_value();
  if (std::log10(r_hi / r_lo) < 8.0 && !has_tails)
    throw std::runtime_error("z_norm: undersampled shells (need 8 decades or tails)");
  int k_min = static_cast<int>(std::floor(std::log2(r_lo)));
  int k_max = static_cast<int>(std::floor(std::log2(r_hi))) - 1;
  if (f.zero_tail) k_min -= 60;
  if (f.inf_tail) k_max += 60;
  if (variant.kind == ZVariantKind::Based) {
    const int k_base = static_cast<int>(std::ceil(std::log2(variant.R)));
    k_min = std::max(k_min, k_base);
  }
  return {k_min, k_max};
}

}  // namespace

double CutoffProfile::operator()(double r) const {
  if (r <= inner) return 1.0;
  if (r >= outer) return 0.0;
  const double s = (r - inner) / (outer - inner);
  return 1.0 - s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
}

RadialField apply_cutoff(const RadialField& f, const CutoffProfile& chi,
                         double R) {
  RadialField out = f;
  for (std::size_t i = 0; i < out.values.size(); ++i)
    out.values[i] *= chi.scaled(out.grid->nodes[i], R);
  out.inf_tail = PowerTail{-1000.0, 0.0};  // compactly supported
  return out;
}

double inner_product(const RadialField& f, const RadialField& g,
                     NormSpace space, int N, double R) {
  if (space == NormSpace::L2R) return integrate_product(f, g, N, R, kInf);
  const RadialField df = differentiate(f);
  const RadialField dg = differentiate(g);
  return integrate_product(df, dg, N, R, kInf);
}

double space_norm(const RadialField& f, NormSpace space, int N, double R) {
  return std::sqrt(std::max(0.0, inner_product(f, f, space, N, R)));
}

double pair_energy_norm(const RadialField& u0, const RadialField& u1, int N,
                        double R) {
  const double a = inner_product(u0, u0, NormSpace::H1R, N, R);
  const double b = inner_product(u1, u1, NormSpace::L2R, N, R);
  return std::sqrt(std::max(0.0, a + b));
}

ZNormDetail z_norm_detail(const RadialField& f, double alpha,
                          const ZVariant& variant, int N) {
  if (variant.kind == ZVariantKind::Multi && variant.lambdas.empty())
    throw std::invalid_argument("z_norm: multi variant needs scales");
  const ShellRange range = shell_range(f, variant);
  const ShellWeight weight{alpha, N, &variant};
  ZNormDetail out{0.0, range.k_min, range.k_max, range.k_min};
  int growth_run = 0;
  double prev = 0.0;
  for (int k = range.k_min; k <= range.k_max; ++k) {
    const double s = std::ldexp(1.0, k);
    const double mass_sq = shell_mass_sq(f, N, s);
    if (!std::isfinite(mass_sq))
      throw std::runtime_error("z_norm: non-finite shell value");
    const double mass = std::sqrt(std::max(0.0, mass_sq));
    const double val = weight(s) * mass;
    if (!std::isfinite(val))
      throw std::runtime_error("z_norm: non-finite shell value");
    if (val > out.value) {
      out.value = val;
      out.k_argmax = k;
    }
    // a persistently growing outer-tail sequence signals a divergent sup
    const auto& nodes = f.grid->nodes;
    if (s >= nodes.back()) {
      growth_run = (val > prev * (1.0 + 1e-12) && val > 0.0) ? growth_run + 1 : 0;
      if (growth_run >= 5)
        throw std::runtime_error("z_norm: supremum diverges at infinity");
    }
    prev = val;
  }
  return out;
}

double z_norm(const RadialField& f, double alpha, const ZVariant& variant,
              int N) {
  return z_norm_detail(f, alpha, variant, N).value;
}

ProjectionResult project_onto_span(const RadialField& f,
                                   const SpanBasis& basis) {
  const std::size_t n = basis.fields.size();
  if (n == 0) {
    ProjectionResult out;
    out.remainder = f;
    return out;
  }
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    norms[i] = space_norm(basis.fields[i], basis.space, basis.N, basis.R);
    if (!(norms[i] > 0.0))
      throw std::runtime_error("project_onto_span: basis member has zero norm");
  }
  std::vector<std::vector<double>> gram(n, std::vector<double>(n, 0.0));
  std::vector<double> rhs(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double g = inner_product(basis.fields[i], basis.fields[j],
                                     basis.space, basis.N, basis.R) /
                       (norms[i] * norms[j]);
      gram[i][j] = gram[j][i] = g;
    }
    rhs[i] = inner_product(f, basis.fields[i], basis.space, basis.N, basis.R) /
             norms[i];
  }
  const std::vector<double> ev = symmetric_eigenvalues(gram);
  const double ev_max = *std::max_element(ev.begin(), ev.end());
  const double ev_min = *std::min_element(ev.begin(), ev.end());
  const double cond = ev_min > 0.0 ? ev_max / ev_min : kInf;
  if (!(cond <= 1e12))
    throw std::runtime_error("project_onto_span: Gram condition number above 1e12");
  std::vector<double> c_hat = cholesky_solve(gram, rhs);
  ProjectionResult out;
  out.gram_condition = cond;
  out.coefficients.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.coefficients[i] = c_hat[i] / norms[i];
  std::vector<const RadialField*> fields;
  std::vector<double> coeffs;
  fields.push_back(&f);
  coeffs.push_back(1.0);
  for (std::size_t i = 0; i < n; ++i) {
    fields.push_back(&basis.fields[i]);
    coeffs.push_back(-out.coefficients[i]);
  }
  out.remainder = linear_combination(fields, coeffs);
  return out;
}

SpanBasis power_span_basis(int N, double R, GridPtr grid) {
  const DimensionProfile dp = DimensionProfile::make(N);
  SpanBasis basis;
  basis.space = dp.sigma == 0 ? NormSpace::H1R : NormSpace::L2R;
  basis.R = R;
  basis.N = N;
  for (int k = 1; k <= dp.power_span_count; ++k) {
    const double a = static_cast<double>(N - 2 * k);
    RadialField b = field_from(grid, [a](double r) {
      return r > 0.0 ? std::pow(r, -a) : 0.0;
    });
    b.zero_tail = PowerTail{-a, 1.0};
    b.inf_tail = PowerTail{-a, 1.0};
    basis.fields.push_back(std::move(b));
    basis.labels.push_back("power");
  }
  return basis;
}

double alternating_norm(const RadialField& u0, const RadialField& u1, int N,
                        double R) {
  const DimensionProfile dp = DimensionProfile::make(N);
  const RadialField& slot = dp.sigma == 0 ? u0 : u1;
  const SpanBasis basis = power_span_basis(N, R, slot.grid);
  const ProjectionResult proj = project_onto_span(slot, basis);
  return space_norm(proj.remainder, basis.space, N, R);
}

SpanBasis pi_perp_basis(const LadderFamily& family, double R) {
  const DimensionProfile dp = DimensionProfile::make(family.N);
  const int top = dp.sigma == 0 ? dp.ladder_top_even : dp.ladder_top_odd;
  SpanBasis basis;
  basis.space = dp.sigma == 0 ? NormSpace::H1R : NormSpace::L2R;
  basis.R = R;
  basis.N = family.N;
  // R = 0 keeps only the scaling mode T_0^inf = Lambda W: the higher
  // T_k^inf carry the r^{-(N-2)} origin singularity and have infinite
  // H1 / L2 norm down to r = 0.
  const int inf_top = R == 0.0 ? 0 : top;
  for (int k = 0; k <= inf_top; ++k) {
    basis.fields.push_back(family.T_inf[static_cast<std::size_t>(k)]);
    basis.labels.push_back("T-infinity");
  }
  if (R > 0.0 && R < 1.0) {
    const CutoffProfile chi;
    for (int k = 0; k <= top; ++k) {
      basis.fields.push_back(
          apply_cutoff(family.T_zero[static_cast<std::size_t>(k)], chi));
      basis.labels.push_back("chi-T-zero");
    }
  }
  return basis;
}

PairProjection pi_perp_apply(const LadderFamily& family, double R,
                             const RadialField& u0, const RadialField& u1) {
  const DimensionProfile dp = DimensionProfile::make(family.N);
  const SpanBasis basis = pi_perp_basis(family, R);
  PairProjection out;
  out.projected_slot = dp.sigma;
  if (dp.sigma == 0) {
    out.detail = project_onto_span(u0, basis);
    out.u0 = out.detail.remainder;
    out.u1 = u1;
  } else {
    out.detail = project_onto_span(u1, basis);
    out.u1 = out.detail.remainder;
    out.u0 = u0;
  }
  return out;
}

SpanBasis pbar_basis(const LadderFamily& family, double mu, double R) {
  const DimensionProfile dp = DimensionProfile::make(family.N);
  const int top = dp.ladder_top_even;  // (N-6)/2 in both parities
  SpanBasis basis;
  basis.space = dp.sigma == 0 ? NormSpace::H1R : NormSpace::L2R;
  basis.R = R;
  basis.N = family.N;
  const ScalingKind kind =
      dp.sigma == 0 ? ScalingKind::H1Critical : ScalingKind::L2Critical;
  for (int k = 0; k <= top; ++k) {
    basis.fields.push_back(rescale(family.T_inf[static_cast<std::size_t>(k)],
                                   mu, kind, family.N));
    basis.labels.push_back("T-infinity");
  }
  return basis;
}

RadialField averaging_transform(const RadialField& f,
                                AveragingDirection direction) {
  const auto& nodes = f.grid->nodes;
  const std::size_t n = nodes.size();
  if (direction == AveragingDirection::Forward) {
    if (!f.inf_tail || f.inf_tail->exponent >= -2.0) {
      if (!f.inf_tail || f.inf_tail->coefficient != 0.0)
        throw std::runtime_error("averaging_transform: divergent forward tail");
    }
    RadialField out;
    out.grid = f.grid;
    out.values.assign(n, 0.0);
    // analytic closure beyond the grid, then cumulative trapezoid inward
    const PowerTail t = *f.inf_tail;
    double acc = t.coefficient == 0.0
                     ? 0.0
                     : -t.coefficient * std::pow(nodes.back(), t.exponent + 2.0) /
                           (t.exponent + 2.0);
    out.values[n - 1] = acc;
    for (std::size_t i = n - 1; i-- > 0;) {
      const double h = nodes[i + 1] - nodes[i];
      acc += 0.5 * h *
             (nodes[i] * f.values[i] + nodes[i + 1] * f.values[i + 1]);
      out.values[i] = acc;
    }
    if (t.coefficient != 0.0)
      out.inf_tail = PowerTail{t.exponent + 2.0,
                               -t.coefficient / (t.exponent + 2.0)};
    else
      out.inf_tail = PowerTail{-1000.0, 0.0};
    double at_zero = out.values[0];
    if (nodes.front() > 0.0 && f.zero_tail && f.zero_tail->exponent > -2.0)
      at_zero += f.zero_tail->coefficient *
                 std::pow(nodes.front(), f.zero_tail->exponent + 2.0) /
                 (f.zero_tail->exponent + 2.0);
    out.zero_tail = PowerTail{0.0, at_zero};
    return out;
  }
  const RadialField df = differentiate(f);
  RadialField out;
  out.grid = f.grid;
  out.values.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (nodes[i] > 0.0) {
      out.values[i] = -df.values[i] / nodes[i];
    } else {
      // even limit: -(1/r) f'(r) -> -f''(0)
      const RadialField d2 = differentiate(df);
      out.values[i] = -d2.values[i];
    }
  }
  auto map_tail = [](const std::optional<PowerTail>& t) {
    std::optional<PowerTail> r;
    if (t) r = PowerTail{t->exponent - 2.0, -t->coefficient * t->exponent};
    return r;
  };
  out.zero_tail = map_tail(f.zero_tail);
  out.inf_tail = map_tail(f.inf_tail);
  return out;
}

ZDistanceResult span_distance_Z(const RadialField& u,
                                const std::vector<const RadialField*>& basis,
                                double alpha, double R, int N) {
  ZVariant variant;
  variant.kind = ZVariantKind::Based;
  variant.R = R;
  const std::size_t n = basis.size();
  auto objective = [&](const std::vector<double>& c) {
    std::vector<const RadialField*> fields;
    std::vector<double> coeffs;
    fields.push_back(&u);
    coeffs.push_back(1.0);
    for (std::size_t i = 0; i < n; ++i) {
      fields.push_back(basis[i]);
      coeffs.push_back(-c[i]);
    }
    const RadialField diff = linear_combination(fields, coeffs);
    return z_norm(diff, alpha, variant, N);
  };
  ZDistanceResult out;
  out.coefficients.assign(n, 0.0);
  if (n == 0) {
    out.value = z_norm(u, alpha, variant, N);
    return out;
  }
  // weighted least-squares seed over the dyadic shells of the grid
  {
    const ShellWeight weight{alpha, N, &variant};
    const ShellRange range = shell_range(u, variant);
    std::vector<std::vector<double>> gram(n, std::vector<double>(n, 0.0));
    std::vector<double> rhs(n, 0.0);
    for (int k = range.k_min; k <= range.k_max; ++k) {
      const double s = std::ldexp(1.0, k);
      const double w2 = weight(s) * weight(s);
      if (!(w2 > 0.0) || !std::isfinite(w2)) continue;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
          const double g =
              w2 * integrate_product(*basis[i], *basis[j], N, s, 2.0 * s);
          gram[i][j] += g;
          if (j != i) gram[j][i] += g;
        }
        rhs[i] += w2 * integrate_product(u, *basis[i], N, s, 2.0 * s);
      }
    }
    try {
      out.coefficients = cholesky_solve(gram, rhs);
    } catch (const std::runtime_error&) {
      out.coefficients.assign(n, 0.0);
    }
  }
  double best = objective(out.coefficients);
  const double at_zero = z_norm(u, alpha, variant, N);
  if (at_zero < best) {
    out.coefficients.assign(n, 0.0);
    best = at_zero;
  }
  // coordinate descent with golden-section line searches
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  const int max_sweeps = 200;
  bool converged = false;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    const double before = best;
    for (std::size_t i = 0; i < n; ++i) {
      const double center = out.coefficients[i];
      double span = std::max(1.0, std::abs(center));
      double a = center - span, b = center + span;
      auto eval = [&](double x) {
        std::vector<double> c = out.coefficients;
        c[i] = x;
        return objective(c);
      };
      // expand the bracket while an endpoint keeps improving
      for (int e = 0; e < 40 && (eval(a) < best || eval(b) < best); ++e) {
        if (eval(a) < best) a -= span;
        if (eval(b) < best) b += span;
        span *= 2.0;
      }
      double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
      double f1 = eval(x1), f2 = eval(x2);
      for (int it = 0; it < 80 && (b - a) > 1e-10 * (1.0 + std::abs(center));
           ++it) {
        if (f1 < f2) {
          b = x2; x2 = x1; f2 = f1;
          x1 = b - gr * (b - a); f1 = eval(x1);
        } else {
          a = x1; x1 = x2; f1 = f2;
          x2 = a + gr * (b - a); f2 = eval(x2);
        }
      }
      const double cand = f1 < f2 ? x1 : x2;
      const double val = std::min(f1, f2);
      if (val < best) {
        out.coefficients[i] = cand;
        best = val;
      }
    }
    if (before - best < 1e-6 * std::max(best, 1e-300)) {
      converged = true;
      break;
    }
  }
  out.value = best;
  out.converged = converged;
  return out;
}

}  // namespace chanlab
