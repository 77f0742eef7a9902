// Acceptance suite: twelve end-to-end checks of the channel laboratory, one
// pass/fail line each. Exit status is the number of failed checks.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "chanlab/experiments.hpp"
#include "chanlab/ground_state.hpp"
#include "chanlab/ladder.hpp"
#include "chanlab/norms.hpp"
#include "chanlab/radial.hpp"
#include "chanlab/wave.hpp"

using namespace chanlab;
using nlohmann::json;

namespace {

int failures = 0;

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void report(int index, const char* name, bool ok, const std::string& detail) {
  std::printf("[%s] %02d %-28s %s\n", ok ? "PASS" : "FAIL", index, name,
              detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

GridPtr wide_ladder_grid(std::size_t n = 7201) {
  return make_grid(1e-4, 1e8, n, GridPolicy::GradedLog);
}

// Interior weighted-L2 residual of (-Delta + V) u = rhs, normalized by the
// separate operator pieces (they cancel on harmonic power-law heads).
double operator_residual(const RadialField& u, const RadialField& V,
                         const RadialField& rhs, int N) {
  const auto& r = u.grid->nodes;
  const RadialField d1 = differentiate(u);
  const RadialField d2 = differentiate(d1);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 3; i + 4 < r.size(); ++i) {
    const double lap = d2.values[i] + (N - 1) * d1.values[i] / r[i];
    const double res =
        -lap + V.values[i] * u.values[i] - rhs.values[i];
    const double scale = std::abs(d2.values[i]) +
                         std::abs((N - 1) * d1.values[i] / r[i]) +
                         std::abs(V.values[i] * u.values[i]) +
                         std::abs(rhs.values[i]);
    const double w = std::pow(r[i], N - 1) * (r[i + 1] - r[i - 1]);
    num += w * res * res;
    den += w * scale * scale;
  }
  return std::sqrt(num / den);
}

RadialField subtract(const RadialField& a, const RadialField& b) {
  RadialField out = a;
  for (std::size_t i = 0; i < out.values.size(); ++i)
    out.values[i] -= b.values[i];
  // differences of projection residues: even at the origin, negligible mass
  // beyond the outer grid edge (1e8) for every norm used here
  out.zero_tail = PowerTail{0.0, out.values.front()};
  out.inf_tail = PowerTail{-1000.0, 0.0};
  return out;
}

// Quadratic head excision below r_reg (causally invisible on exterior cones).
void excise_head(RadialField& f, double r_reg) {
  const auto& r = f.grid->nodes;
  std::size_t j = 0;
  while (j + 1 < r.size() && r[j] < r_reg) ++j;
  const double slope = (f.values[j + 1] - f.values[j]) / (r[j + 1] - r[j]);
  const double b = slope / (2.0 * r[j]);
  const double a = f.values[j] - b * r[j] * r[j];
  for (std::size_t i = 0; i < j; ++i) f.values[i] = a + b * r[i] * r[i];
  f.zero_tail = PowerTail{0.0, a};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// ---- criteria -------------------------------------------------------------

void c01_wronskian() {
  Timer t;
  double worst = 0.0;
  for (int N : {8, 10}) {
    GammaSolution sol = build_gamma_full(N, wide_ladder_grid(4001));
    worst = std::max(worst, sol.max_wronskian_rel_error);
  }
  const double sec = t.seconds();
  report(1, "wronskian-identity", worst < 1e-5 && sec < 5.0,
         "max rel err " + fmt(worst) + ", " + fmt(sec) + " s");
}

void c02_static_kernel() {
  const int N = 8;
  auto resid = [&](std::size_t n) {
    GridPtr g = make_grid(1e-3, 1e3, n, GridPolicy::GradedLog);
    RadialField lw = make_lambda_W_field(N, g);
    RadialField V = make_V_field(N, g);
    return operator_residual(lw, V, zero_field(g), N);
  };
  const double e1 = resid(2000), e2 = resid(4000);
  report(2, "static-kernel", e1 <= 1e-3 && e1 / e2 > 3.0,
         "residual " + fmt(e1) + " at 2000 nodes, refinement ratio " +
             fmt(e1 / e2));
}

void c03_ladder_exponents() {
  bool ok = true;
  std::string detail;
  for (int N : {8, 10, 12}) {
    Timer t;
    LadderFamily fam = build_ladder(N, wide_ladder_grid());
    double worst_dev = 0.0, worst_res = 0.0;
    for (int k = 0; k <= fam.top_level(); ++k) {
      const std::size_t uk = static_cast<std::size_t>(k);
      const double az = k == 0 ? -(N - 2.0) : -N + 2.0 + 2.0 * k;
      const double bz = k == 0 ? 0.0 : 2.0 * k;
      const double ai = k == 0 ? 0.0 : -(N - 2.0);
      const double bi = -N + 2.0 + 2.0 * k;
      worst_dev = std::max(
          {worst_dev, std::abs(fam.exponents_zero[uk].first - az),
           std::abs(fam.exponents_zero[uk].second - bz),
           std::abs(fam.exponents_inf[uk].first - ai),
           std::abs(fam.exponents_inf[uk].second - bi)});
      if (k > 0)
        worst_res = std::max(
            {worst_res, fam.residual_zero[uk], fam.residual_inf[uk]});
    }
    const double sec = t.seconds();
    if (!(worst_dev <= 0.1 && worst_res <= 1e-3 && sec < 30.0)) ok = false;
    detail += "N=" + std::to_string(N) + ": dev " + fmt(worst_dev) +
              ", res " + fmt(worst_res) + ", " + fmt(sec) + " s; ";
  }
  report(3, "ladder-exponent-table", ok, detail);
}

void c04_regularization() {
  const int N = 8;
  LadderFamily coarse = build_ladder(N, wide_ladder_grid(3601));
  regularize_T0(coarse);
  LadderFamily fine = build_ladder(N, wide_ladder_grid(14401));
  regularize_T0(fine);
  double worst_exp = 0.0;
  for (int k = 0; k <= coarse.top_level(); ++k)
    worst_exp = std::max(worst_exp,
                         std::abs(coarse.reg_origin_exponents[k] - 2.0));
  const double e10_c = coarse.e_coeffs[0][1], e10_f = fine.e_coeffs[0][1];
  const double rel = std::abs(e10_c - e10_f) / std::abs(e10_f);
  report(4, "regularization", worst_exp <= 0.1 && rel <= 0.01,
         "origin exponent dev " + fmt(worst_exp) + ", e_1^0 vs 4x oracle " +
             fmt(rel));
}

void c05_conjugation() {
  const int N = 12;
  auto err = [&](std::size_t n) {
    GridPtr g = make_grid(0.0, 8.0, n, GridPolicy::Uniform);
    RadialField f = field_from(g, [](double r) { return std::exp(-r * r); });
    f.zero_tail = PowerTail{0.0, 1.0};
    f.inf_tail = PowerTail{-1000.0, 0.0};
    const RadialField lhs = radial_laplacian(f, N);
    const RadialField af = averaging_transform(f, AveragingDirection::Forward);
    const RadialField mid = radial_laplacian(af, N - 2);
    const RadialField rhs =
        averaging_transform(mid, AveragingDirection::Inverse);
    double worst = 0.0;
    for (std::size_t i = 0; i < g->size(); ++i) {
      if (g->nodes[i] < 0.05 || g->nodes[i] > 6.0) continue;
      worst = std::max(worst, std::abs(lhs.values[i] - rhs.values[i]));
    }
    return worst;
  };
  const double e1 = err(2001), e2 = err(4001);
  report(5, "averaging-conjugation", e1 < 5e-3 && e1 / e2 > 3.0,
         "error " + fmt(e1) + ", refinement ratio " + fmt(e1 / e2));
}

void c06_solver_validation() {
  const int N = 8;
  LadderFamily fam = build_ladder(N, wide_ladder_grid());
  regularize_T0(fam);
  const int k = fam.top_level();

  // exterior-cone match of the evolved top rung against the closed form
  const double t_short = 1.5;
  auto worst_for = [&](std::size_t n) {
    GridPtr grid = make_grid(0.0, 12.0, n, GridPolicy::Uniform);
    NonradiativeProfile prof0 = eval_nonradiative_profile(fam, k, 0, 0.0);
    WaveState init;
    init.t = 0.0;
    init.u = resample(prof0.u, grid);
    init.v = resample(prof0.v, grid);
    excise_head(init.u, 0.4);
    excise_head(init.v, 0.4);
    RadialField V = make_V_field(N, grid);
    ProbeConfig probes;
    probes.radii = {0.5};
    probes.snapshot_stride = 1;
    EvolutionProbe p = evolve(init, V, Forcing{}, t_short, 0.9, probes, N);
    NonradiativeProfile ref =
        eval_nonradiative_profile(fam, k, 0, p.final_state.t);
    RadialField ref_u = resample(ref.u, grid);
    double err = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < grid->size(); ++i) {
      const double r = grid->nodes[i];
      if (r < 0.5 + t_short + 0.2 || r > grid->back() - t_short - 0.2)
        continue;
      err = std::max(err, std::abs(p.final_state.u.values[i] - ref_u.values[i]));
      scale = std::max(scale, std::abs(ref_u.values[i]));
    }
    return err / scale;
  };
  const double e1 = worst_for(801), e2 = worst_for(1601);

  // conserved-energy drift over a long horizon
  GridPtr grid = make_grid(0.0, 45.0, 2251, GridPolicy::Uniform);
  NonradiativeProfile prof0 = eval_nonradiative_profile(fam, k, 0, 0.0);
  WaveState init;
  init.t = 0.0;
  init.u = resample(prof0.u, grid);
  init.v = resample(prof0.v, grid);
  excise_head(init.u, 0.4);
  excise_head(init.v, 0.4);
  ProbeConfig probes;
  probes.radii = {0.5};
  EvolutionProbe p = evolve(init, make_V_field(N, grid), Forcing{}, 20.0, 0.9,
                            probes, N);
  report(6, "solver-validation", e1 / e2 >= 3.5 && p.energy_drift < 1e-4,
         "exterior error ratio " + fmt(e1 / e2) + " (err " + fmt(e1) +
             "), drift " + fmt(p.energy_drift) + " over t=20");
}

void c07_nonradiativity() {
  Timer t;
  json j = {{"dimension", 8},
            {"potential", {{"kind", "single"}, {"lambda", 1.0}}},
            {"grid", {{"r_max", 61.0}, {"points", 3051}}},
            {"time", {{"t_max", 20.0}, {"cfl", 0.9}, {"snapshot_stride", 4}}},
            {"probes", {{"radii", {1.0}}}},
            {"experiment", "nonradiative"}};
  const ExperimentConfig cfg = parse_config(j);
  bool ok = true;
  std::string detail;
  // the parity-relevant family for N = 0 mod 4 is the even-in-time slot;
  // the odd member t Lambda W decays too slowly (t^-4) to pass a fixed-time
  // threshold and belongs to the N = 2 mod 4 classification
  const std::pair<int, int> members[] = {{0, 0}, {1, 0}};
  for (auto [k, sigma] : members) {
    nlohmann::ordered_json rep = nonradiative_experiment(cfg, k, sigma);
    // entry index 1 is the R = 1 probe
    const auto& entry = rep["exterior_energy"][1];
    const double frac = entry["final_over_initial"].get<double>();
    const bool mono = entry["monotone_last_half"].get<bool>();
    if (!(frac < 0.10 && mono)) ok = false;
    detail += "(k=" + std::to_string(k) + ",s=" + std::to_string(sigma) +
              "): " + fmt(frac) + (mono ? " mono; " : " NOT-mono; ");
  }
  const double sec = t.seconds();
  ok = ok && sec < 120.0;
  report(7, "non-radiativity", ok, detail + fmt(sec) + " s");
}

void c08_channel_stability() {
  Timer t;
  auto base_config = [](bool multi) {
    json j = {{"dimension", 8},
              {"grid", {{"r_max", 24.0}, {"points", 1201}}},
              {"time", {{"t_max", 10.0}, {"cfl", 0.9}}},
              {"ensemble",
               {{"count", 50}, {"seed", 7}, {"support", {1.0, 3.0}}}},
              {"probes", {{"radii", {0.0}}}},
              {"experiment", "channel"}};
    if (multi) {
      j["potential"] = {{"kind", "multisoliton"}, {"lambdas", {1.0, 0.01}}};
      j["norm"] = {{"z_variant", "multi"}};
    } else {
      j["potential"] = {{"kind", "single"}, {"lambda", 1.0}};
    }
    return j;
  };
  bool ok = true;
  std::string detail;
  for (bool multi : {false, true}) {
    json jb = base_config(multi);
    json jr = base_config(multi);
    jr["grid"]["points"] = 2401;  // Delta r halved
    jr["time"]["t_max"] = 20.0;   // t_max doubled
    ChannelReport base = channel_experiment(parse_config(jb), 1);
    ChannelReport refined = channel_experiment(parse_config(jr), 1);
    const double mb = base.summary["max_ratio"].get<double>();
    const double mr = refined.summary["max_ratio"].get<double>();
    const bool finite = std::isfinite(mb) && mb > 0.0 && std::isfinite(mr);
    const double rel = std::abs(mb - mr) / mb;
    const bool lw_flagged = !base.records.back().flags.empty();
    if (!(finite && rel <= 0.10 && lw_flagged)) ok = false;
    detail += std::string(multi ? "multi" : "single") + ": max " + fmt(mb) +
              " vs " + fmt(mr) + " (rel " + fmt(rel) + ")" +
              (lw_flagged ? ", LW flagged; " : ", LW NOT flagged; ");
  }
  const double sec = t.seconds();
  ok = ok && sec < 900.0;
  report(8, "channel-ratio-stability", ok, detail + fmt(sec) + " s");
}

void c09_drift() {
  auto drift_config = [](std::vector<double> lambdas) {
    json j = {{"dimension", 8},
              {"potential", {{"kind", "multisoliton"}, {"lambdas", lambdas}}},
              {"grid", {{"r_max", 30.0}, {"points", 1501}}},
              {"time", {{"t_max", 6.0}, {"cfl", 0.9}}},
              {"experiment", "drift"}};
    return parse_config(j);
  };
  auto max_drift = [](const nlohmann::ordered_json& rep) {
    double worst = 0.0;
    for (const auto& entry : rep["scales"])
      worst = std::max({worst, entry["drift_phi_rel"].get<double>(),
                        entry["drift_psi_rel"].get<double>()});
    return worst;
  };
  // J = 1: both references are exact solutions, drift is pure solver error
  json j1 = {{"dimension", 8},
             {"potential", {{"kind", "multisoliton"}, {"lambdas", {1.0}}}},
             {"grid", {{"r_max", 16.0}, {"points", 1601}}},
             {"time", {{"t_max", 6.0}, {"cfl", 0.9}}},
             {"experiment", "drift"}};
  const double d1 = max_drift(drift_experiment(parse_config(j1)));
  // J = 2: halving gamma must not increase the drift
  const double dg = max_drift(drift_experiment(drift_config({1.0, 0.1})));
  const double dh = max_drift(drift_experiment(drift_config({1.0, 0.05})));
  report(9, "drift", d1 <= 1e-4 && dh <= dg * 1.02,
         "J=1 " + fmt(d1) + "; J=2 gamma, gamma/2: " + fmt(dg) + ", " +
             fmt(dh));
}

void c10_radii_identity() {
  auto [gamma, geo] = separation_gamma({1.0, 0.01}, 1);
  bool ok = !geo.r_plus.empty() && gamma > 0.0;
  double worst = 0.0;
  for (std::size_t jx = 0; jx < geo.r_plus.size(); ++jx) {
    const double lhs = geo.r_minus[jx];
    const double rhs = std::pow(gamma, 0.25) * geo.r_plus[jx];
    worst = std::max(worst, std::abs(lhs - rhs) / rhs);
  }
  ok = ok && worst <= 1e-12;
  report(10, "separation-radii-identity", ok,
         "max rel deviation " + fmt(worst));
}

void c11_projection_algebra() {
  LadderFamily fam8 = build_ladder(8, wide_ladder_grid());
  regularize_T0(fam8);
  LadderFamily fam10 = build_ladder(10, wide_ladder_grid());
  regularize_T0(fam10);

  auto test_field = [](GridPtr g) {
    RadialField f = field_from(g, [](double r) {
      return r * r * std::exp(-0.8 * r);
    });
    f.zero_tail = PowerTail{2.0, 1.0};
    f.inf_tail = PowerTail{-1000.0, 0.0};
    return f;
  };

  struct Variant {
    std::string name;
    SpanBasis basis;
    RadialField field;
  };
  std::vector<Variant> variants;
  variants.push_back({"pi0", power_span_basis(8, 1.0, fam8.grid),
                      test_field(fam8.grid)});
  variants.push_back({"pi1", power_span_basis(10, 1.0, fam10.grid),
                      test_field(fam10.grid)});
  for (double R : {0.0, 0.5, 1.0, 3.0})
    variants.push_back({"PiPerp(R=" + fmt(R) + ")", pi_perp_basis(fam8, R),
                        test_field(fam8.grid)});
  variants.push_back({"Pbar(mu=2,R=1)", pbar_basis(fam8, 2.0, 1.0),
                      test_field(fam8.grid)});

  bool ok = true;
  std::string bad;
  for (const auto& v : variants) {
    const SpanBasis& b = v.basis;
    const RadialField& f = v.field;
    const double fn = space_norm(f, b.space, b.N, b.R);
    const ProjectionResult p = project_onto_span(f, b);
    // idempotence
    const ProjectionResult q = project_onto_span(p.remainder, b);
    const double idem =
        space_norm(subtract(q.remainder, p.remainder), b.space, b.N, b.R) / fn;
    // remainder orthogonality
    double orth = 0.0;
    for (const auto& bf : b.fields) {
      const double bn = space_norm(bf, b.space, b.N, b.R);
      orth = std::max(orth, std::abs(inner_product(p.remainder, bf, b.space,
                                                   b.N, b.R)) /
                                (fn * bn));
    }
    // Pythagoras
    const RadialField proj_part = subtract(f, p.remainder);
    const double pn = space_norm(proj_part, b.space, b.N, b.R);
    const double rn = space_norm(p.remainder, b.space, b.N, b.R);
    const double pyth = std::abs(fn * fn - pn * pn - rn * rn) / (fn * fn);
    if (!(idem <= 1e-8 && orth <= 1e-8 && pyth <= 1e-8)) {
      ok = false;
      bad += v.name + " (idem " + fmt(idem) + ", orth " + fmt(orth) +
             ", pyth " + fmt(pyth) + "); ";
    }
  }
  report(11, "projection-algebra", ok,
         ok ? std::string("all variants at 1e-8") : bad);
}

void c12_determinism() {
  json j = {{"dimension", 8},
            {"potential", {{"kind", "single"}, {"lambda", 1.0}}},
            {"grid", {{"r_max", 16.0}, {"points", 801}}},
            {"time", {{"t_max", 6.0}, {"cfl", 0.9}}},
            {"ensemble", {{"count", 3}, {"seed", 42}, {"support", {1.0, 3.0}}}},
            {"probes", {{"radii", {0.0, 1.0}}}},
            {"experiment", "channel"}};
  const ExperimentConfig cfg = parse_config(j);
  namespace fs = std::filesystem;
  const fs::path base = fs::temp_directory_path() / "chanlab_acceptance";
  fs::remove_all(base);
  const std::string d1 = (base / "a").string(), d2 = (base / "b").string(),
                    d3 = (base / "c").string();
  run_config(cfg, d1, 1);
  run_config(cfg, d2, 4);
  run_config(cfg, d3, 1);  // repeat run, same worker count
  const std::string r1 = slurp(d1 + "/report.json");
  const bool ok = !r1.empty() && r1 == slurp(d2 + "/report.json") &&
                  r1 == slurp(d3 + "/report.json") &&
                  slurp(d1 + "/records.csv") == slurp(d2 + "/records.csv");
  fs::remove_all(base);
  report(12, "determinism", ok,
         ok ? "byte-identical reports across runs and worker counts"
            : "report bytes differ");
}

}  // namespace

int main() {
  c01_wronskian();
  c02_static_kernel();
  c03_ladder_exponents();
  c04_regularization();
  c05_conjugation();
  c06_solver_validation();
  c07_nonradiativity();
  c08_channel_stability();
  c09_drift();
  c10_radii_identity();
  c11_projection_algebra();
  c12_determinism();
  std::printf("%d/12 criteria passed\n", 12 - failures);
  return failures == 0 ? 0 : 1;
}
