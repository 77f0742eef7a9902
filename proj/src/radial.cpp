#include "chanlab/radial.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace chanlab {

DimensionProfile DimensionProfile::make(int N) {
  if (N < 8 || N % 2 != 0)
    throw std::invalid_argument("dimension must be even and >= 8");
  DimensionProfile p;
  p.N = N;
  p.sigma = (N % 4) / 2;
  p.ladder_top_even = (N - 6) / 2;
  p.ladder_top_odd = (N - 8) / 2;
  p.power_span_count = (p.sigma == 0) ? N / 4 : (N - 2) / 4;
  return p;
}

GridPtr make_grid(double r_min, double r_max, std::size_t count,
                  GridPolicy policy) {
  if (!std::isfinite(r_min) || !std::isfinite(r_max))
    throw std::invalid_argument("grid bounds must be finite");
  if (r_min < 0 || r_min >= r_max)
    throw std::invalid_argument("require 0 <= r_min < r_max");
  if (count < 16 && !(count >= 3 && policy == GridPolicy::GradedLog))
    throw std::invalid_argument("grid needs at least 16 nodes");

  auto g = std::make_shared<RadialGrid>();
  g->policy = policy;
  g->nodes.reserve(count);
  if (policy == GridPolicy::Uniform) {
    const double h = (r_max - r_min) / double(count - 1);
    for (std::size_t i = 0; i < count; ++i)
      g->nodes.push_back(i + 1 == count ? r_max : r_min + h * double(i));
  } else {
    // Geometric placement on [r_min, r_max]; r_min = 0 contributes an extra
    // node at the origin and anchors the geometric part 8 decades down.
    double lo = r_min > 0.0 ? r_min : r_max * 1e-8;
    std::size_t m = count;
    if (r_min == 0.0) {
      g->nodes.push_back(0.0);
      m = count - 1;
    }
    const double ratio = std::log(r_max / lo) / double(m - 1);
    for (std::size_t i = 0; i < m; ++i)
      g->nodes.push_back(i + 1 == m ? r_max : lo * std::exp(ratio * double(i)));
  }
  return g;
}

RadialField zero_field(GridPtr grid) {
  RadialField f;
  f.grid = std::move(grid);
  f.values.assign(f.grid->size(), 0.0);
  f.zero_tail = PowerTail{0.0, 0.0};
  f.inf_tail = PowerTail{-1000.0, 0.0};
  return f;
}

namespace {

// Fritsch-Carlson monotone cubic slopes for scattered data.
std::vector<double> pchip_slopes(const std::vector<double>& x,
                                 const std::vector<double>& y) {
  const std::size_t n = x.size();
  std::vector<double> d(n, 0.0), delta(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i)
    delta[i] = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
  if (n == 2) {
    d[0] = d[1] = delta[0];
    return d;
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (delta[i - 1] * delta[i] <= 0.0) {
      d[i] = 0.0;
    } else {
      const double h0 = x[i] - x[i - 1], h1 = x[i + 1] - x[i];
      const double w1 = 2.0 * h1 + h0, w2 = h1 + 2.0 * h0;
      d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
    }
  }
  auto end_slope = [](double h0, double h1, double d0, double d1) {
    double d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (d * d0 <= 0.0)
      d = 0.0;
    else if (d0 * d1 <= 0.0 && std::abs(d) > 3.0 * std::abs(d0))
      d = 3.0 * d0;
    return d;
  };
  d[0] = end_slope(x[1] - x[0], x[2] - x[1], delta[0], delta[1]);
  d[n - 1] = end_slope(x[n - 1] - x[n - 2], x[n - 2] - x[n - 3],
                       delta[n - 2], delta[n - 3]);
  return d;
}

double pchip_eval(const std::vector<double>& x, const std::vector<double>& y,
                  const std::vector<double>& d, double xq) {
  auto it = std::upper_bound(x.begin(), x.end(), xq);
  std::size_t i = (it == x.begin()) ? 0 : std::size_t(it - x.begin()) - 1;
  if (i + 1 >= x.size()) i = x.size() - 2;
  const double h = x[i + 1] - x[i], t = (xq - x[i]) / h;
  const double t2 = t * t, t3 = t2 * t;
  const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
  const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
  return h00 * y[i] + h * h10 * d[i] + h01 * y[i + 1] + h * h11 * d[i + 1];
}

double tail_value(const PowerTail& t, double r) {
  return t.coefficient * std::pow(r, t.exponent);
}

// analytic integral of c r^{e+N-1} over [lo, hi]
double tail_integral(double c, double e, int N, double lo, double hi) {
  const double p = e + double(N);
  if (c == 0.0) return 0.0;
  if (hi == kInf) {
    if (p >= 0.0) throw std::domain_error("divergent tail integral at infinity");
    return -c * std::pow(lo, p) / p;
  }
  if (lo == 0.0) {
    if (p <= 0.0) throw std::domain_error("divergent tail integral at origin");
    return c * std::pow(hi, p) / p;
  }
  if (std::abs(p) < 1e-14) return c * std::log(hi / lo);
  return c * (std::pow(hi, p) - std::pow(lo, p)) / p;
}

// trapezoid of w(r) r^{N-1} over [lo, hi] clipped to the grid, with linear
// interpolation of w at the clip points. w is sampled at the nodes.
double trapezoid_weighted(const std::vector<double>& r,
                          const std::vector<double>& w, int N, double lo,
                          double hi) {
  const std::size_t n = r.size();
  if (hi <= r.front() || lo >= r.back()) return 0.0;
  lo = std::max(lo, r.front());
  hi = std::min(hi, r.back());
  if (lo >= hi) return 0.0;
  auto interp = [&](double x) {
    auto it = std::upper_bound(r.begin(), r.end(), x);
    std::size_t i = std::size_t(it - r.begin());
    if (i == 0) return w.front();
    if (i >= n) return w.back();
    const double t = (x - r[i - 1]) / (r[i] - r[i - 1]);
    return (1 - t) * w[i - 1] + t * w[i];
  };
  auto weight = [&](double x, double wx) {
    return wx * std::pow(x, N - 1);
  };
  std::size_t i0 = std::size_t(std::upper_bound(r.begin(), r.end(), lo) -
                               r.begin());
  std::size_t i1 = std::size_t(std::lower_bound(r.begin(), r.end(), hi) -
                               r.begin());
  double acc = 0.0;
  double xp = lo, fp = weight(lo, interp(lo));
  for (std::size_t i = i0; i < i1; ++i) {
    const double fx = weight(r[i], w[i]);
    acc += 0.5 * (fp + fx) * (r[i] - xp);
    xp = r[i];
    fp = fx;
  }
  const double fe = weight(hi, interp(hi));
  acc += 0.5 * (fp + fe) * (hi - xp);
  return acc;
}

std::optional<PowerTail> combine_tails(const std::optional<PowerTail>& a,
                                       const std::optional<PowerTail>& b) {
  if (!a || !b) return std::nullopt;
  return PowerTail{a->exponent + b->exponent,
                   a->coefficient * b->coefficient};
}

double integrate_values(const RadialField& f, const std::vector<double>& w,
                        const std::optional<PowerTail>& ztail,
                        const std::optional<PowerTail>& itail, int N,
                        double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("require lo < hi");
  const auto& r = f.grid->nodes;
  double acc = 0.0;
  const double r0 = r.front(), rM = r.back();
  if (lo < r0) {
    if (r0 > 0.0) {
      if (!ztail)
        throw std::domain_error("integration below grid support without a zero tail");
      acc += tail_integral(ztail->coefficient, ztail->exponent, N, lo,
                           std::min(hi, r0));
    }
  }
  acc += trapezoid_weighted(r, w, N, lo, hi);
  if (hi > rM) {
    if (!itail)
      throw std::domain_error("integration beyond grid support without an inf tail");
    acc += tail_integral(itail->coefficient, itail->exponent, N,
                         std::max(lo, rM), hi);
  }
  return acc;
}

}  // namespace

double value_at(const RadialField& f, double r) {
  const auto& x = f.grid->nodes;
  if (r <= x.front()) {
    if (r == x.front()) return f.values.front();
    if (f.zero_tail) return tail_value(*f.zero_tail, r);
    return f.values.front();
  }
  if (r >= x.back()) {
    if (r == x.back()) return f.values.back();
    if (f.inf_tail) return tail_value(*f.inf_tail, r);
    return 0.0;
  }
  auto d = pchip_slopes(x, f.values);
  return pchip_eval(x, f.values, d, r);
}

double integrate_radial(const RadialField& f, int N, double lo, double hi) {
  return integrate_values(f, f.values, f.zero_tail, f.inf_tail, N, lo, hi);
}

double integrate_product(const RadialField& f, const RadialField& g, int N,
                         double lo, double hi) {
  if (f.grid != g.grid) {
    RadialField gg = resample(g, f.grid);
    return integrate_product(f, gg, N, lo, hi);
  }
  std::vector<double> w(f.values.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = f.values[i] * g.values[i];
  return integrate_values(f, w, combine_tails(f.zero_tail, g.zero_tail),
                          combine_tails(f.inf_tail, g.inf_tail), N, lo, hi);
}

RadialField differentiate(const RadialField& f) {
  const auto& r = f.grid->nodes;
  const std::size_t n = r.size();
  if (n < 3) throw std::invalid_argument("differentiate needs >= 3 nodes");
  RadialField g;
  g.grid = f.grid;
  g.values.resize(n);
  const auto& y = f.values;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double hl = r[i] - r[i - 1], hr = r[i + 1] - r[i];
    g.values[i] = (-hr / (hl * (hl + hr))) * y[i - 1] +
                  ((hr - hl) / (hl * hr)) * y[i] +
                  (hl / (hr * (hl + hr))) * y[i + 1];
  }
  {  // one-sided second order at the ends
    const double h0 = r[1] - r[0], h1 = r[2] - r[1];
    g.values[0] = -(2 * h0 + h1) / (h0 * (h0 + h1)) * y[0] +
                  (h0 + h1) / (h0 * h1) * y[1] -
                  h0 / (h1 * (h0 + h1)) * y[2];
    const double hm = r[n - 1] - r[n - 2], hm1 = r[n - 2] - r[n - 3];
    g.values[n - 1] = (2 * hm + hm1) / (hm * (hm + hm1)) * y[n - 1] -
                      (hm + hm1) / (hm * hm1) * y[n - 2] +
                      hm / (hm1 * (hm + hm1)) * y[n - 3];
  }
  auto dtail = [](const std::optional<PowerTail>& t) -> std::optional<PowerTail> {
    if (!t) return std::nullopt;
    return PowerTail{t->exponent - 1.0, t->coefficient * t->exponent};
  };
  g.zero_tail = dtail(f.zero_tail);
  g.inf_tail = dtail(f.inf_tail);
  return g;
}

RadialField radial_laplacian(const RadialField& f, int N) {
  const auto& r = f.grid->nodes;
  const std::size_t n = r.size();
  if (n < 3) throw std::invalid_argument("laplacian needs >= 3 nodes");
  if (r.front() == 0.0 && f.zero_tail && f.zero_tail->exponent < 0.0 &&
      f.zero_tail->coefficient != 0.0)
    throw std::domain_error("singular-origin: grid contains r=0 but field is singular there");
  RadialField g;
  g.grid = f.grid;
  g.values.resize(n);
  const auto& y = f.values;
  std::size_t start = 0;
  if (r.front() == 0.0) {
    // regular limit Delta_N f(0) = N f''(0), even extension f(-h) = f(h)
    const double h = r[1];
    g.values[0] = double(N) * 2.0 * (y[1] - y[0]) / (h * h);
    start = 1;
  }
  for (std::size_t i = std::max<std::size_t>(start, 1); i + 1 < n; ++i) {
    const double hl = r[i] - r[i - 1], hr = r[i + 1] - r[i];
    const double d2 = 2.0 * (hl * y[i + 1] - (hl + hr) * y[i] + hr * y[i - 1]) /
                      (hl * hr * (hl + hr));
    const double d1 = (-hr / (hl * (hl + hr))) * y[i - 1] +
                      ((hr - hl) / (hl * hr)) * y[i] +
                      (hl / (hr * (hl + hr))) * y[i + 1];
    g.values[i] = d2 + double(N - 1) / r[i] * d1;
  }
  if (start == 0) {
    // one-sided copy at the first node when r_0 > 0
    g.values[0] = g.values[1];
  }
  g.values[n - 1] = g.values[n - 2];
  auto ltail = [N](const std::optional<PowerTail>& t) -> std::optional<PowerTail> {
    if (!t) return std::nullopt;
    const double e = t->exponent;
    return PowerTail{e - 2.0, t->coefficient * e * (e + double(N) - 2.0)};
  };
  g.zero_tail = ltail(f.zero_tail);
  g.inf_tail = ltail(f.inf_tail);
  return g;
}

PowerFit fit_power_law(const RadialField& f, FitEnd end, double decades) {
  const auto& r = f.grid->nodes;
  const std::size_t n = r.size();
  std::vector<double> lx, ly;
  double sign = 0.0;
  const double rlo = r.front() > 0 ? r.front() : r[1];
  if (std::log10(r.back() / rlo) < decades - 1e-9)
    throw std::invalid_argument("grid spans fewer decades than requested");
  double lim_lo, lim_hi;
  if (end == FitEnd::Infinity) {
    lim_hi = r.back();
    lim_lo = lim_hi / std::pow(10.0, decades);
  } else {
    lim_lo = rlo;
    lim_hi = lim_lo * std::pow(10.0, decades);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (r[i] < lim_lo || r[i] > lim_hi || r[i] == 0.0) continue;
    const double v = f.values[i];
    if (v == 0.0) throw std::domain_error("zero value inside power-law fit window");
    const double s = v > 0 ? 1.0 : -1.0;
    if (sign == 0.0) sign = s;
    if (s != sign) throw std::domain_error("sign change inside power-law fit window");
    lx.push_back(std::log(r[i]));
    ly.push_back(std::log(std::abs(v)));
  }
  if (lx.size() < 4)
    throw std::invalid_argument("too few nodes inside power-law fit window");
  const std::size_t m = lx.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < m; ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  const double det = double(m) * sxx - sx * sx;
  const double slope = (double(m) * sxy - sx * sy) / det;
  const double icpt = (sy * sxx - sx * sxy) / det;
  double rss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double e = ly[i] - (slope * lx[i] + icpt);
    rss += e * e;
  }
  PowerFit fit;
  fit.exponent = slope;
  fit.coefficient = sign * std::exp(icpt);
  fit.residual = std::sqrt(rss / double(m));
  return fit;
}

RadialField resample(const RadialField& f, GridPtr grid) {
  RadialField g;
  g.grid = std::move(grid);
  g.values.reserve(g.grid->size());
  const auto& x = f.grid->nodes;
  auto d = pchip_slopes(x, f.values);
  for (double r : g.grid->nodes) {
    if (r < x.front()) {
      g.values.push_back(f.zero_tail ? tail_value(*f.zero_tail, r)
                                     : f.values.front());
    } else if (r > x.back()) {
      g.values.push_back(f.inf_tail ? tail_value(*f.inf_tail, r) : 0.0);
    } else {
      g.values.push_back(pchip_eval(x, f.values, d, r));
    }
  }
  g.zero_tail = f.zero_tail;
  g.inf_tail = f.inf_tail;
  return g;
}

RadialField linear_combination(const std::vector<const RadialField*>& fields,
                               const std::vector<double>& coeffs) {
  if (fields.empty() || fields.size() != coeffs.size())
    throw std::invalid_argument("linear_combination: size mismatch");
  RadialField out;
  out.grid = fields.front()->grid;
  out.values.assign(out.grid->size(), 0.0);
  for (std::size_t k = 0; k < fields.size(); ++k) {
    if (fields[k]->grid != out.grid)
      throw std::invalid_argument("linear_combination: shared grid required");
    for (std::size_t i = 0; i < out.values.size(); ++i)
      out.values[i] += coeffs[k] * fields[k]->values[i];
  }
  auto pick = [&](bool at_zero) -> std::optional<PowerTail> {
    std::vector<PowerTail> terms;
    for (std::size_t k = 0; k < fields.size(); ++k) {
      const auto& t = at_zero ? fields[k]->zero_tail : fields[k]->inf_tail;
      if (!t) return std::nullopt;
      if (coeffs[k] == 0.0 || t->coefficient == 0.0) continue;
      bool merged = false;
      for (auto& tt : terms)
        if (std::abs(tt.exponent - t->exponent) < 1e-9) {
          tt.coefficient += coeffs[k] * t->coefficient;
          merged = true;
          break;
        }
      if (!merged) terms.push_back({t->exponent, coeffs[k] * t->coefficient});
    }
    if (terms.empty()) return PowerTail{at_zero ? 0.0 : -1000.0, 0.0};
    PowerTail dom = terms.front();
    for (const auto& tt : terms) {
      const bool better = at_zero ? tt.exponent < dom.exponent
                                  : tt.exponent > dom.exponent;
      if (better && tt.coefficient != 0.0) dom = tt;
    }
    return dom;
  };
  out.zero_tail = pick(true);
  out.inf_tail = pick(false);
  return out;
}

void fit_and_store_tails(RadialField& f) {
  try {
    auto fit = fit_power_law(f, FitEnd::Infinity, 1.0);
    f.inf_tail = PowerTail{fit.exponent, fit.coefficient};
  } catch (const std::exception&) {
    f.inf_tail.reset();
  }
  try {
    auto fit = fit_power_law(f, FitEnd::Origin, 1.0);
    f.zero_tail = PowerTail{fit.exponent, fit.coefficient};
  } catch (const std::exception&) {
    f.zero_tail.reset();
  }
}

}  // namespace chanlab
