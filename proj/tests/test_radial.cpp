// Grid, quadrature, differentiation and fitting primitives, checked against
// closed-form oracles.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "chanlab/radial.hpp"

using namespace chanlab;

namespace {

RadialField power_field(GridPtr grid, double e, double c) {
  RadialField f = field_from(grid, [e, c](double r) {
    return r > 0.0 ? c * std::pow(r, e) : (e > 0.0 ? 0.0 : c);
  });
  f.zero_tail = PowerTail{e, c};
  f.inf_tail = PowerTail{e, c};
  return f;
}

}  // namespace

TEST_CASE("make_grid uniform and graded-log") {
  GridPtr u = make_grid(0.0, 10.0, 101, GridPolicy::Uniform);
  CHECK(u->size() == 101);
  CHECK(u->front() == 0.0);
  CHECK(u->back() == doctest::Approx(10.0));
  CHECK(u->spacing() == doctest::Approx(0.1));

  GridPtr g = make_grid(1.0, 100.0, 3, GridPolicy::GradedLog);
  REQUIRE(g->size() == 3);
  CHECK(g->nodes[0] == doctest::Approx(1.0));
  CHECK(g->nodes[1] == doctest::Approx(10.0));
  CHECK(g->nodes[2] == doctest::Approx(100.0));

  CHECK_THROWS(make_grid(10.0, 1.0, 50, GridPolicy::Uniform));
}

TEST_CASE("integrate_radial with analytic tail closures") {
  GridPtr g = make_grid(1e-3, 1e3, 3001, GridPolicy::GradedLog);
  const int N = 8;

  // int_0^1 r^2 r^7 dr = 1/10
  RadialField f2 = power_field(g, 2.0, 1.0);
  CHECK(integrate_radial(f2, N, 0.0, 1.0) ==
        doctest::Approx(0.1).epsilon(5e-4));

  // int_1^inf r^-10 r^7 dr = 1/2
  RadialField fm10 = power_field(g, -10.0, 1.0);
  CHECK(integrate_radial(fm10, N, 1.0, kInf) ==
        doctest::Approx(0.5).epsilon(5e-4));

  // divergent tail must throw
  RadialField fm2 = power_field(g, -2.0, 1.0);
  CHECK_THROWS(integrate_radial(fm2, N, 1.0, kInf));

  // product closure: int_0^inf r^-4 * r^-6 r^7 dr diverges at 0 -> throw;
  // on (1, inf) it is int_1^inf r^-3 = 1/2
  RadialField a = power_field(g, -4.0, 1.0);
  RadialField b = power_field(g, -6.0, 1.0);
  CHECK(integrate_product(a, b, N, 1.0, kInf) ==
        doctest::Approx(0.5).epsilon(5e-4));
  CHECK_THROWS(integrate_product(a, b, N, 0.0, kInf));
}

TEST_CASE("integrate_radial respects finite bounds inside the grid") {
  GridPtr g = make_grid(0.0, 4.0, 4001, GridPolicy::Uniform);
  RadialField f = field_from(g, [](double r) { return std::exp(-r); });
  // int_1^2 e^-r r dr (N = 2) = [-(r+1)e^-r]_1^2 = 2e^-1 - 3e^-2
  const double expect = 2.0 * std::exp(-1.0) - 3.0 * std::exp(-2.0);
  CHECK(integrate_radial(f, 2, 1.0, 2.0) ==
        doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("differentiate is second order") {
  auto err_for = [](std::size_t n) {
    GridPtr g = make_grid(0.0, 2.0, n, GridPolicy::Uniform);
    RadialField f = field_from(g, [](double r) { return std::sin(r); });
    RadialField d = differentiate(f);
    double worst = 0.0;
    for (std::size_t i = 0; i < g->size(); ++i)
      worst = std::max(worst, std::abs(d.values[i] - std::cos(g->nodes[i])));
    return worst;
  };
  const double e1 = err_for(101), e2 = err_for(201);
  CHECK(e1 / e2 > 3.5);  // ~4x improvement per halving
  CHECK(e2 < 1e-3);
}

TEST_CASE("differentiate handles analytic tails") {
  GridPtr g = make_grid(1e-2, 1e2, 2001, GridPolicy::GradedLog);
  RadialField f = power_field(g, -3.0, 2.0);
  RadialField d = differentiate(f);
  REQUIRE(d.inf_tail.has_value());
  CHECK(d.inf_tail->exponent == doctest::Approx(-4.0));
  CHECK(d.inf_tail->coefficient == doctest::Approx(-6.0));
}

TEST_CASE("radial_laplacian on a Gaussian: Delta_N f = (4r^2 - 2N) e^{-r^2}") {
  const int N = 8;
  auto err_for = [&](std::size_t n) {
    GridPtr g = make_grid(0.0, 6.0, n, GridPolicy::Uniform);
    RadialField f = field_from(g, [](double r) { return std::exp(-r * r); });
    RadialField lap = radial_laplacian(f, N);
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < g->size(); ++i) {
      const double r = g->nodes[i];
      const double expect = (4.0 * r * r - 2.0 * N) * std::exp(-r * r);
      worst = std::max(worst, std::abs(lap.values[i] - expect));
    }
    return worst;
  };
  const double e1 = err_for(401), e2 = err_for(801);
  CHECK(e2 < 2e-3);
  CHECK(e1 / e2 > 3.0);
}

TEST_CASE("fit_power_law recovers exponent and coefficient") {
  GridPtr g = make_grid(1e-3, 1e3, 2001, GridPolicy::GradedLog);
  RadialField f = field_from(g, [](double r) { return 3.0 * std::pow(r, -5.0); });
  PowerFit fit = fit_power_law(f, FitEnd::Infinity, 2.0);
  CHECK(fit.exponent == doctest::Approx(-5.0).epsilon(1e-6));
  CHECK(fit.coefficient == doctest::Approx(3.0).epsilon(1e-4));

  RadialField h = field_from(g, [](double r) { return 0.5 * r * r; });
  PowerFit fit0 = fit_power_law(h, FitEnd::Origin, 2.0);
  CHECK(fit0.exponent == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(fit0.coefficient == doctest::Approx(0.5).epsilon(1e-4));
}

TEST_CASE("value_at interpolates inside and extends by tails outside") {
  GridPtr g = make_grid(1e-2, 1e2, 2001, GridPolicy::GradedLog);
  RadialField f = power_field(g, -2.0, 1.0);
  CHECK(value_at(f, 3.7) == doctest::Approx(std::pow(3.7, -2.0)).epsilon(1e-6));
  CHECK(value_at(f, 1e3) == doctest::Approx(1e-6).epsilon(1e-12));
  CHECK(value_at(f, 1e-3) == doctest::Approx(1e6).epsilon(1e-12));
}

TEST_CASE("resample preserves smooth fields") {
  GridPtr g1 = make_grid(0.0, 5.0, 501, GridPolicy::Uniform);
  GridPtr g2 = make_grid(0.0, 5.0, 777, GridPolicy::Uniform);
  RadialField f = field_from(g1, [](double r) { return std::exp(-r); });
  RadialField h = resample(f, g2);
  double worst = 0.0;
  for (std::size_t i = 0; i < g2->size(); ++i)
    worst = std::max(worst, std::abs(h.values[i] - std::exp(-g2->nodes[i])));
  CHECK(worst < 1e-5);
}

TEST_CASE("linear_combination tail bookkeeping") {
  GridPtr g = make_grid(1e-2, 1e2, 1001, GridPolicy::GradedLog);
  RadialField a = power_field(g, -2.0, 1.0);
  RadialField b = power_field(g, -4.0, 3.0);
  RadialField s = linear_combination({&a, &b}, {2.0, 1.0});
  REQUIRE(s.inf_tail.has_value());
  REQUIRE(s.zero_tail.has_value());
  // dominant at infinity: larger exponent (-2); at the origin: smaller (-4)
  CHECK(s.inf_tail->exponent == doctest::Approx(-2.0));
  CHECK(s.inf_tail->coefficient == doctest::Approx(2.0));
  CHECK(s.zero_tail->exponent == doctest::Approx(-4.0));
  CHECK(s.zero_tail->coefficient == doctest::Approx(3.0));

  // exact cancellation merges equal exponents
  RadialField z = linear_combination({&a, &a}, {1.0, -1.0});
  REQUIRE(z.inf_tail.has_value());
  CHECK(z.inf_tail->coefficient == doctest::Approx(0.0));
}

TEST_CASE("DimensionProfile bookkeeping") {
  DimensionProfile p8 = DimensionProfile::make(8);
  CHECK(p8.sigma == 0);
  CHECK(p8.ladder_top_even == 1);
  CHECK(p8.power_span_count == 2);
  DimensionProfile p10 = DimensionProfile::make(10);
  CHECK(p10.sigma == 1);
  CHECK(p10.ladder_top_even == 2);
  CHECK(p10.ladder_top_odd == 1);
  CHECK(p10.power_span_count == 2);
}
