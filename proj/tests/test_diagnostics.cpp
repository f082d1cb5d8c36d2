#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "ohflux/diagnostics.hpp"
#include "ohflux/experiments.hpp"
#include "oracles.hpp"

using namespace ohflux;

namespace {

FluxModel const& model() {
  static FluxModel const m = builtin_oh_flux();
  return m;
}

NumericalFlux eo() { return engquist_osher(model()); }

double stable_dt(State const& s) {
  return 0.9 * s.dx() / std::max(1e-12, 1.1 * linf_norm(s) * std::numbers::e);
}

Trajectory every_step(InitialProfile const& p, std::size_t n, double t_end) {
  StepControl ctrl;
  ctrl.t_end = t_end;
  ctrl.record_every_step = true;
  return evolve_to(cell_average_init(p, Grid(n)), ctrl, eo());
}

}  // namespace

TEST(Entropy, ZeroState) {
  State const s(Grid(8));
  State const next = step(s, 0.1, eo());
  std::vector<double> const ks = {-1.0, 0.0, 0.5};
  auto const r = entropy_residual(s, next, 0.1, eo(), model(), ks);
  EXPECT_LE(r.worst_residual, 0.0);
  // k = 0: every term vanishes.
  std::vector<double> const k0 = {0.0};
  EXPECT_EQ(entropy_residual(s, next, 0.1, eo(), model(), k0).worst_residual, 0.0);
}

TEST(Entropy, RandomStatesSatisfyInequality) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    State s{Grid(32)};
    s.u = oracle::random_zero_mean(32, rng, 0.3);
    double const dt = stable_dt(s);
    State const next = step(s, dt, eo());
    auto const r = entropy_residual(s, next, dt, eo(), model());
    EXPECT_TRUE(r.pass()) << "trial " << trial << " residual " << r.worst_residual;
  }
}

TEST(Entropy, LevelBelowMinimumIsConservativeIdentity) {
  std::mt19937_64 rng(43);
  State s{Grid(32)};
  s.u = oracle::random_zero_mean(32, rng, 0.3);
  double const dt = stable_dt(s);
  State const next = step(s, dt, eo());
  std::vector<double> const ks = {-5.0};
  auto const r = entropy_residual(s, next, dt, eo(), model(), ks);
  // Both sides reduce to the update itself; the residual is pure rounding.
  EXPECT_LE(std::abs(r.worst_residual), 1e-13);
}

TEST(Entropy, DetectsWrongSourceSign) {
  std::mt19937_64 rng(47);
  State s{Grid(32)};
  s.u = oracle::random_zero_mean(32, rng, 0.3);
  double const dt = stable_dt(s);
  StepWorkspace ws;
  State const bad = step(s, dt, eo().bind(s.grid), ws, -1.0);
  auto const r = entropy_residual(s, bad, dt, eo(), model());
  EXPECT_FALSE(r.pass());
}

TEST(Entropy, StandardKSet) {
  State const a(Grid(2), 0.0, {0.1, -0.1});
  State const b(Grid(2), 0.1, {0.05, -0.05});
  auto const ks = standard_k_set(a, b);
  EXPECT_EQ(ks.front(), -1.1);
  EXPECT_EQ(ks.back(), 1.1);
  EXPECT_EQ(ks.size(), 4u + 5u - 0u);  // no duplicates among 4 cells and 5 levels
}

TEST(LinfBound, ZeroData) {
  auto const tr = every_step(zero_profile(), 16, 0.5);
  auto const r = check_linf_bound(tr);
  EXPECT_TRUE(r.pass());
  EXPECT_LE(r.worst_residual, 0.0);
}

TEST(LinfBound, CornerWaveLongRun) {
  ExperimentConfig cfg;
  cfg.profile = "corner";
  auto const tr = run_profile(cfg, 128, {}, {1.0, 6.0, 18.0});
  EXPECT_TRUE(check_linf_bound(tr).pass());
  EXPECT_EQ(tr.final().t, 36.0);
}

TEST(LinfBound, PerStepGrowth) {
  auto const tr = every_step(cosine_profile(), 64, 1.0);
  auto const r = check_linf_step(tr);
  EXPECT_TRUE(r.pass()) << r.worst_residual;
  State const& u0 = tr.snapshots[0];
  State const& u1 = tr.snapshots[1];
  EXPECT_LE(linf_norm(u1), (1.0 + 2.0 * (u1.t - u0.t)) * linf_norm(u0) * (1 + 1e-12));
}

TEST(BvBound, ConstantState) {
  Trajectory tr;
  tr.snapshots.push_back(State(Grid(8)));
  tr.snapshots.push_back(State(Grid(8), 1.0));
  EXPECT_TRUE(check_bv_bound(tr, model()).pass());
}

TEST(BvBound, CosineShortRun) {
  auto const tr = every_step(cosine_profile(), 128, 1.0);
  auto const r = check_bv_bound(tr, model());
  EXPECT_TRUE(r.pass()) << r.worst_residual;
  auto const s = check_bv_step(tr, model());
  EXPECT_TRUE(s.pass()) << s.worst_residual;
}

TEST(BvBound, ConstantsFromSecondPartials) {
  double const box = 0.1;
  auto const c = assemble_bound_constants(model(), box);
  // f_xu = 2 pi cos(2 pi x) u g(x) with 1/e <= g <= e, so the sup lies between its
  // value at x = 0 and the crude product bound.
  EXPECT_LE(c.f_xu_sup, 2 * std::numbers::pi * box * std::numbers::e);
  EXPECT_GE(c.f_xu_sup, 2 * std::numbers::pi * box);  // value at x = 0
  EXPECT_GE(c.c_f_bv, c.f_xu_sup);
  EXPECT_GE(c.c_f_bv * c.f_xu_sup, c.f_xx_sup + box - 1e-15);
}

TEST(TimeContinuity, ZeroData) {
  auto const tr = every_step(zero_profile(), 16, 0.5);
  auto const r = check_time_continuity(tr);
  EXPECT_TRUE(r.pass());
}

TEST(TimeContinuity, CornerWaveHundredSteps) {
  StepControl ctrl;
  ctrl.record_every_step = true;
  State const s0 = cell_average_init(corner_wave(), Grid(64));
  ctrl.t_end = 1e9;
  double const dt = cfl_dt(eo(), s0, ctrl);
  ctrl.t_end = 120.0 * dt;
  auto const tr = evolve_to(s0, ctrl, eo());
  EXPECT_GE(tr.steps, 100u);
  auto const r = check_time_continuity(tr);
  EXPECT_TRUE(r.pass()) << r.worst_residual;
}

TEST(TimeContinuity, LinearModulusIsFinite) {
  auto const tr = every_step(cosine_profile(), 64, 2.0);
  double const c = time_modulus_constant(tr);
  EXPECT_TRUE(std::isfinite(c));
  EXPECT_GT(c, 0.0);
  // Below the first-step variation plus the growth allowance at T = 2.
  double const tv0 = time_variation(tr.snapshots[0], tr.snapshots[1]);
  EXPECT_LE(c, tv0 + 2.0 * (std::exp(4.0) - 1.0) * linf_norm(tr.initial()));
}

TEST(L1Stability, IdenticalData) {
  StepControl ctrl;
  ctrl.t_end = 1.0;
  State const a = cell_average_init(cosine_profile(), Grid(32));
  auto const [ta, tb] = evolve_lockstep(a, a, ctrl, eo());
  auto const r = check_l1_stability(ta, tb);
  EXPECT_TRUE(r.pass());
  EXPECT_LE(r.worst_residual, 0.0);
}

TEST(L1Stability, SmoothPerturbation) {
  constexpr double two_pi = 2 * std::numbers::pi;
  InitialProfile pert = cosine_profile();
  pert.eval = [](double x) { return cosine_profile().eval(x) + 1e-3 * std::sin(2 * two_pi * x); };
  pert.exact_cell_average = [](double a, double b) {
    double const c = -0.05 * (std::sin(two_pi * b) - std::sin(two_pi * a)) / (two_pi * (b - a));
    double const s = -1e-3 * (std::cos(2 * two_pi * b) - std::cos(2 * two_pi * a)) / (2 * two_pi * (b - a));
    return c + s;
  };
  StepControl ctrl;
  ctrl.t_end = 1.0;
  auto const [ta, tb] = evolve_lockstep(cell_average_init(cosine_profile(), Grid(128)),
                                        cell_average_init(pert, Grid(128)), ctrl, eo());
  auto const r = check_l1_stability(ta, tb);
  EXPECT_TRUE(r.pass()) << r.worst_residual;
}

TEST(L1Stability, CellPairPerturbation) {
  StepControl ctrl;
  ctrl.t_end = 1.0;
  State const a = cell_average_init(cosine_profile(), Grid(64));
  State b = a;
  b.u[10] += 1e-3;
  b.u[11] -= 1e-3;
  auto const [ta, tb] = evolve_lockstep(a, b, ctrl, eo());
  EXPECT_TRUE(check_l1_stability(ta, tb).pass());
}

TEST(L1Stability, MismatchedInputs) {
  StepControl ctrl;
  ctrl.t_end = 0.5;
  State const a = cell_average_init(cosine_profile(), Grid(32));
  auto const [ta, tb] = evolve_lockstep(a, a, ctrl, eo());
  Trajectory shorter = tb;
  shorter.snapshots.pop_back();
  EXPECT_THROW(check_l1_stability(ta, shorter), InputError);
}

TEST(StepDiagnostics, AllChecksPassOnCosine) {
  StepDiagnostics diag(eo(), model());
  StepControl ctrl;
  ctrl.t_end = 1.0;
  evolve_to(cell_average_init(cosine_profile(), Grid(64)), ctrl, eo(), {}, {diag.observer()});
  auto const rep = diag.report();
  for (auto const& c : rep.checks) EXPECT_TRUE(c.pass()) << c.name << ' ' << c.worst_residual;
  EXPECT_TRUE(rep.passed());
  ASSERT_NE(rep.find("entropy"), nullptr);
  EXPECT_GT(rep.find("entropy")->evaluations, 0u);
}

TEST(StepDiagnostics, ReportCsv) {
  DiagnosticsReport rep;
  CheckResult c{.name = "entropy", .tolerance = 1e-12};
  c.offer(-0.5, 3, 7, 0.25);
  rep.checks.push_back(c);
  rep.checks.push_back(CheckResult{.name = "l1_stability"});
  auto const path = std::filesystem::temp_directory_path() / "ohflux_report.csv";
  write_report_csv(rep, path);
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  EXPECT_EQ(buf.str(), "check,worst_residual,n,j,k,pass\nentropy,-0.5,3,7,0.25,true\nl1_stability,,,,,true\n");
}
