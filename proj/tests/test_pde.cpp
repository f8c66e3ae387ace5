#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "dctrain/datagen.hpp"
#include "dctrain/dataset_io.hpp"
#include "dctrain/rng.hpp"
#include "doctest.h"

using namespace dctrain;

TEST_CASE("rescale constant: worked examples") {
  CHECK(rescale_constant({-406737.28}).C == 1e6);
  CHECK(rescale_constant({0.3, -0.7}).C == 1.0);
  CHECK(rescale_constant({1000.0}).C == 1000.0);
  CHECK(rescale_constant({0.0, 0.0}).C == 1.0);
  CHECK(rescale_constant({0.05}).C == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(rescale_constant({-406737.28}).max_abs_label == 406737.28);
  CHECK_THROWS_AS(rescale_constant({}), DataError);
  CHECK_THROWS_AS(rescale_constant({1.0, std::nan("")}), DataError);
}

TEST_CASE("rescale constant: power-of-ten bracketing property") {
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> ls(1 + static_cast<std::size_t>(rng.uniform_int(0, 5)));
    for (double& l : ls) l = rng.normal() * std::pow(10.0, rng.uniform(-6.0, 6.0));
    RescaleInfo info = rescale_constant(ls);
    double m = 0.0;
    for (double l : ls) m = std::max(m, std::fabs(l));
    CHECK(info.C >= m);
    if (m > 0.0) CHECK(info.C / 10.0 < m);
    double e = std::log10(info.C);
    CHECK(std::fabs(e - std::round(e)) < 1e-12);
  }
}

TEST_CASE("quadratic PES: identity matrix at (1,2)") {
  PESParams p;
  p.kind = PESKind::Quadratic;
  p.dim = 2;
  p.quad_diag = {1.0, 1.0};
  CHECK(pes_energy(p, {1.0, 2.0}) == 2.5);
  auto f = pes_force(p, {1.0, 2.0});
  CHECK(f[0] == -1.0);
  CHECK(f[1] == -2.0);
}

static void check_fd_force(const PESParams& p, Rng& rng) {
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(p.dim);
    for (double& xi : x) xi = rng.uniform(p.box_lo, p.box_hi);
    auto f = pes_force(p, x);
    const double h = 1e-6;
    for (std::size_t j = 0; j < p.dim; ++j) {
      std::vector<double> xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      double fd = -(pes_energy(p, xp) - pes_energy(p, xm)) / (2.0 * h);
      CHECK(std::fabs(f[j] - fd) / std::max({std::fabs(f[j]), std::fabs(fd), 1.0}) < 1e-6);
    }
  }
}

TEST_CASE("analytic PES forces match central differences") {
  Rng rng(11);
  PESParams q;
  q.kind = PESKind::Quadratic;
  q.dim = 3;
  q.quad_diag = {0.5, 2.0, 1.3};
  check_fd_force(q, rng);

  PESParams w;
  w.kind = PESKind::DoubleWell;
  w.dim = 2;
  w.dw_a = 1.5;
  w.dw_b = 0.8;
  w.dw_c = 0.6;
  check_fd_force(w, rng);

  PESParams g;
  g.kind = PESKind::GaussianMix;
  g.dim = 2;
  g.gm_weights = {1.0, 0.7};
  g.gm_centers = {{0.5, -0.5}, {-1.0, 1.0}};
  g.gm_widths = {0.8, 1.2};
  check_fd_force(g, rng);
}

TEST_CASE("PES generation: determinism, shape, label scale") {
  PESParams p;
  p.kind = PESKind::DoubleWell;
  p.dim = 2;
  PESDataset a = gen_pes(p, 16, 42);
  PESDataset b = gen_pes(p, 16, 42);
  PESDataset c = gen_pes(p, 16, 43);
  REQUIRE(a.samples.size() == 16);
  bool same = true, diff = false;
  for (std::size_t i = 0; i < 16; ++i) {
    same = same && a.samples[i].x == b.samples[i].x && a.samples[i].E == b.samples[i].E &&
           a.samples[i].F == b.samples[i].F;
    diff = diff || a.samples[i].x != c.samples[i].x;
  }
  CHECK(same);
  CHECK(diff);
  CHECK(a.X().shape == Shape{16, 2});
  CHECK(a.E().shape == Shape{16, 1});
  CHECK(a.F().shape == Shape{16, 2});

  PESParams ps = p;
  ps.label_scale = 1000.0;
  PESDataset s = gen_pes(ps, 16, 42);
  for (std::size_t i = 0; i < 16; ++i) {
    CHECK(s.samples[i].x == a.samples[i].x);
    CHECK(s.samples[i].E == 1000.0 * a.samples[i].E);
    CHECK(s.samples[i].F[0] == 1000.0 * a.samples[i].F[0]);
  }
}

TEST_CASE("PES generation rejects bad parameters") {
  PESParams p;
  p.kind = PESKind::Quadratic;
  p.dim = 2;
  p.quad_diag = {1.0, -1.0};
  CHECK_THROWS_AS(gen_pes(p, 4, 0), DataError);
  PESParams g;
  g.kind = PESKind::GaussianMix;
  g.dim = 2;
  g.gm_weights = {1.0};
  g.gm_centers = {{0.0, 0.0}};
  g.gm_widths = {0.0};
  CHECK_THROWS_AS(gen_pes(g, 4, 0), DataError);
  CHECK_THROWS_AS(gen_pes(PESParams{.dim = 0}, 4, 0), DataError);
}

TEST_CASE("advection handle satisfies its PDE") {
  PDEConstants consts;
  auto [ps, sol] = gen_advection(consts, 8, 8, 8, 5);
  Rng rng(9);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    double x = rng.uniform(0.0, sol.length);
    double t = rng.uniform(0.0, 2.0);
    worst = std::max(worst, std::fabs(sol.psi_t(x, t) + sol.beta * sol.psi_x(x, t)));
  }
  CHECK(worst < 1e-12);
  // Cross-check the analytic partials against central differences.
  for (int i = 0; i < 50; ++i) {
    double x = rng.uniform(0.0, sol.length);
    double t = rng.uniform(0.0, 2.0);
    const double h = 1e-6;
    CHECK(std::fabs(sol.psi_x(x, t) - (sol(x + h, t) - sol(x - h, t)) / (2 * h)) < 1e-6);
    CHECK(std::fabs(sol.psi_t(x, t) - (sol(x, t + h) - sol(x, t - h)) / (2 * h)) < 1e-6);
  }
}

TEST_CASE("advection point sets: IC/BC structure and periodicity") {
  PDEConstants consts;
  auto [ps, sol] = gen_advection(consts, 32, 16, 10, 123);
  CHECK(ps.Xf.shape == Shape{32, 2});
  const Tensor& xic = ps.get("Xic");
  const Tensor& yic = ps.get("Yic");
  for (std::size_t i = 0; i < 16; ++i) {
    CHECK(xic.at2(i, 1) == 0.0);
    CHECK(yic.data[i] == sol.initial(xic.at2(i, 0)));
  }
  const Tensor& xbc = ps.get("Xbc");
  const Tensor& ybc = ps.get("Ybc");
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(xbc.at2(2 * i, 0) == 0.0);
    CHECK(xbc.at2(2 * i + 1, 0) == sol.length);
    CHECK(xbc.at2(2 * i, 1) == xbc.at2(2 * i + 1, 1));
    // The IC is periodic with the domain length, so the pair shares a value.
    CHECK(std::fabs(ybc.data[2 * i] - ybc.data[2 * i + 1]) < 1e-12);
  }
  CHECK_THROWS_AS(gen_advection(consts, 8, 8, 7, 1), DataError);

  auto [ps2, sol2] = gen_advection(consts, 32, 16, 10, 123);
  CHECK(ps2.Xf.data == ps.Xf.data);
  CHECK(sol2.k1 == sol.k1);
  CHECK(sol2.phi2 == sol.phi2);
}

// RK4 on the cell ODE du/dt = u - u^3 - k - v, dv/dt = u - v.
static void rk4_cell(double& u, double& v, double k, double dt, std::size_t steps) {
  auto fu = [k](double uu, double vv) { return uu - uu * uu * uu - k - vv; };
  auto fv = [](double uu, double vv) { return uu - vv; };
  for (std::size_t s = 0; s < steps; ++s) {
    double k1u = fu(u, v), k1v = fv(u, v);
    double k2u = fu(u + 0.5 * dt * k1u, v + 0.5 * dt * k1v);
    double k2v = fv(u + 0.5 * dt * k1u, v + 0.5 * dt * k1v);
    double k3u = fu(u + 0.5 * dt * k2u, v + 0.5 * dt * k2v);
    double k3v = fv(u + 0.5 * dt * k2u, v + 0.5 * dt * k2v);
    double k4u = fu(u + dt * k3u, v + dt * k3v);
    double k4v = fv(u + dt * k3u, v + dt * k3v);
    u += dt / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u);
    v += dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
  }
}

TEST_CASE("diffusion-reaction solver: ODE limit matches RK4") {
  // With D_u = D_v = 0 the cells decouple into independent ODEs.
  PDEConstants consts;
  consts.D_u = 0.0;
  consts.D_v = 0.0;
  DiffReactGrid grid;
  grid.nx = 2;
  grid.ny = 2;
  grid.dt = 1e-4;
  grid.t_max = 0.2;
  std::vector<double> u0 = {0.3, -0.5, 1.1, 0.0};
  std::vector<double> v0 = {0.1, 0.4, -0.2, 0.9};
  DiffReactField f = solve_diffreact_from(consts, grid, u0, v0);
  REQUIRE(f.steps == 2000);
  for (std::size_t i = 0; i < 4; ++i) {
    double u = u0[i], v = v0[i];
    rk4_cell(u, v, consts.k, grid.dt / 100.0, f.steps * 100);
    CHECK(std::fabs(f.u.back()[i] - u) < 1e-4);
    CHECK(std::fabs(f.v.back()[i] - v) < 1e-4);
  }
}

TEST_CASE("diffusion-reaction solver: zero is a fixed point when k = 0") {
  PDEConstants consts;
  consts.k = 0.0;
  DiffReactGrid grid;
  grid.nx = 8;
  grid.ny = 8;
  grid.t_max = 0.5;
  DiffReactField f =
      solve_diffreact_from(consts, grid, std::vector<double>(64, 0.0), std::vector<double>(64, 0.0));
  for (double x : f.u.back()) CHECK(x == 0.0);
  for (double x : f.v.back()) CHECK(x == 0.0);
}

TEST_CASE("diffusion-reaction solver: reflective diffusion conserves mass") {
  PDEConstants consts;
  DiffReactGrid grid;
  grid.nx = 16;
  grid.ny = 16;
  grid.t_max = 1.0;
  grid.reaction = false;
  std::vector<double> u0(256), v0(256);
  Rng rng(4);
  for (std::size_t i = 0; i < 256; ++i) {
    u0[i] = rng.normal();
    v0[i] = rng.normal();
  }
  double su0 = std::accumulate(u0.begin(), u0.end(), 0.0);
  double sv0 = std::accumulate(v0.begin(), v0.end(), 0.0);
  DiffReactField f = solve_diffreact_from(consts, grid, u0, v0);
  double su = std::accumulate(f.u.back().begin(), f.u.back().end(), 0.0);
  double sv = std::accumulate(f.v.back().begin(), f.v.back().end(), 0.0);
  CHECK(std::fabs(su - su0) < 1e-10);
  CHECK(std::fabs(sv - sv0) < 1e-10);
}

TEST_CASE("diffusion-reaction solver: rejects unstable dt") {
  PDEConstants consts;
  DiffReactGrid grid;
  grid.nx = 32;
  grid.ny = 32;
  grid.dt = 1.0;  // far above h^2/(4 D)
  CHECK_THROWS_AS(solve_diffreact(consts, grid, 0), DataError);
  CHECK_THROWS_AS(solve_diffreact_from(consts, grid, std::vector<double>(3, 0.0),
                                       std::vector<double>(3, 0.0)),
                  DataError);
}

TEST_CASE("diffusion-reaction generator: labels come from the solver field") {
  PDEConstants consts;
  DiffReactGrid grid;
  grid.nx = 12;
  grid.ny = 12;
  grid.t_max = 0.05;
  auto [ps, field] = gen_diffreact(consts, grid, 20, 10, 10, 7);
  CHECK(ps.Xf.shape == Shape{20, 3});
  const Tensor& xic = ps.get("Xic_u");
  const Tensor& yic = ps.get("Yic_u");
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(xic.at2(i, 2) == 0.0);
    // Recover the grid node and compare the label with the stored field.
    auto gi = static_cast<std::size_t>((xic.at2(i, 0) - grid.lo) / (grid.hi - grid.lo) * 12 - 0.5 + 0.25);
    auto gj = static_cast<std::size_t>((xic.at2(i, 1) - grid.lo) / (grid.hi - grid.lo) * 12 - 0.5 + 0.25);
    CHECK(yic.data[i] == field.u[0][gj * 12 + gi]);
  }
  auto [ps2, field2] = gen_diffreact(consts, grid, 20, 10, 10, 7);
  CHECK(ps2.Xf.data == ps.Xf.data);
  CHECK(field2.u.back() == field.u.back());
}

TEST_CASE("PES dataset JSONL round trip") {
  PESParams p;
  p.kind = PESKind::GaussianMix;
  p.dim = 2;
  p.gm_weights = {1.0, 0.5};
  p.gm_centers = {{0.1, 0.2}, {-0.7, 0.9}};
  p.gm_widths = {0.9, 1.1};
  p.label_scale = 1e5;
  PESDataset ds = gen_pes(p, 25, 99);
  const std::string path = "pes_roundtrip.jsonl";
  save_pes(path, ds);
  PESDataset back = load_pes(path);
  REQUIRE(back.samples.size() == ds.samples.size());
  CHECK(back.seed == ds.seed);
  CHECK(back.params.kind == ds.params.kind);
  CHECK(back.params.label_scale == ds.params.label_scale);
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    CHECK(back.samples[i].x == ds.samples[i].x);
    CHECK(back.samples[i].E == ds.samples[i].E);
    CHECK(back.samples[i].F == ds.samples[i].F);
  }
  // Canonical formatting: load-then-save is byte identical.
  const std::string path2 = "pes_roundtrip2.jsonl";
  save_pes(path2, back);
  CHECK(read_file(path) == read_file(path2));
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("PES load errors name the offending line") {
  const std::string path = "pes_bad.jsonl";
  PESParams p;
  p.dim = 2;
  save_pes(path, gen_pes(p, 4, 1));
  std::string text = read_file(path);
  // Corrupt the record on line 3 (header is line 1) by renaming its F field.
  std::size_t pos = 0;
  for (int nl = 0; nl < 2; ++nl) pos = text.find('\n', pos) + 1;
  std::size_t fpos = text.find("\"F\"", pos);
  REQUIRE(fpos != std::string::npos);
  text[fpos + 1] = 'G';
  write_file(path, text);
  CHECK_THROWS_WITH_AS(load_pes(path), doctest::Contains(":3:"), IOError);

  write_file(path, "");
  CHECK_THROWS_AS(load_pes(path), IOError);
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_pes(path), IOError);
}

TEST_CASE("PINN point-set JSON round trip preserves order and metadata") {
  PDEConstants consts;
  auto [ps, sol] = gen_advection(consts, 12, 6, 6, 31, 2.0, 3.0);
  const std::string path = "points_roundtrip.json";
  save_pointsets(path, ps);
  PINNPointSets back = load_pointsets(path);
  CHECK(back.Xf.shape == ps.Xf.shape);
  CHECK(back.Xf.data == ps.Xf.data);
  CHECK(back.domain_lo == ps.domain_lo);
  CHECK(back.domain_hi == ps.domain_hi);
  CHECK(back.t_max == ps.t_max);
  REQUIRE(back.labelled.size() == ps.labelled.size());
  for (std::size_t i = 0; i < ps.labelled.size(); ++i) {
    CHECK(back.labelled[i].first == ps.labelled[i].first);
    CHECK(back.labelled[i].second.shape == ps.labelled[i].second.shape);
    CHECK(back.labelled[i].second.data == ps.labelled[i].second.data);
  }
  std::remove(path.c_str());
}
