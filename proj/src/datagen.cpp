#include "dctrain/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dctrain/rng.hpp"

namespace dctrain {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace

RescaleInfo rescale_constant(const std::vector<double>& labels) {
  if (labels.empty()) throw DataError("rescale_constant: empty label list");
  double m = 0.0;
  for (double l : labels) {
    if (!std::isfinite(l)) throw DataError("rescale_constant: non-finite label");
    m = std::max(m, std::fabs(l));
  }
  RescaleInfo info;
  info.max_abs_label = m;
  if (m == 0.0) return info;
  int e = static_cast<int>(std::ceil(std::log10(m)));
  while (std::pow(10.0, e) < m) ++e;
  while (e > std::numeric_limits<int>::min() && std::pow(10.0, e - 1) >= m) --e;
  info.C = std::pow(10.0, e);
  return info;
}

// ---- PES ----

const char* pes_kind_name(PESKind k) {
  switch (k) {
    case PESKind::Quadratic: return "quadratic";
    case PESKind::DoubleWell: return "double_well";
    case PESKind::GaussianMix: return "gaussian_mix";
  }
  return "?";
}

static void validate_pes(const PESParams& p) {
  if (p.dim == 0) throw DataError("pes: dim must be positive");
  if (p.kind == PESKind::Quadratic) {
    if (!p.quad_diag.empty()) {
      if (p.quad_diag.size() != p.dim) throw DataError("pes: quad_diag size != dim");
      for (double a : p.quad_diag)
        if (a <= 0.0) throw DataError("pes: quadratic A must be positive definite");
    }
  } else if (p.kind == PESKind::GaussianMix) {
    if (p.gm_weights.empty()) throw DataError("pes: gaussian_mix needs at least one component");
    if (p.gm_centers.size() != p.gm_weights.size() || p.gm_widths.size() != p.gm_weights.size())
      throw DataError("pes: gaussian_mix component lists disagree");
    for (double s : p.gm_widths)
      if (s <= 0.0) throw DataError("pes: gaussian width must be positive");
  }
  if (!(p.box_hi > p.box_lo)) throw DataError("pes: empty domain box");
}

double pes_energy(const PESParams& p, const std::vector<double>& x) {
  double e = 0.0;
  switch (p.kind) {
    case PESKind::Quadratic:
      for (std::size_t j = 0; j < x.size(); ++j) {
        double a = p.quad_diag.empty() ? 1.0 : p.quad_diag[j];
        e += 0.5 * a * x[j] * x[j];
      }
      break;
    case PESKind::DoubleWell: {
      double w = x[0] * x[0] - p.dw_b;
      e = p.dw_a * w * w;
      for (std::size_t j = 1; j < x.size(); ++j) e += p.dw_c * x[j] * x[j];
      break;
    }
    case PESKind::GaussianMix:
      for (std::size_t k = 0; k < p.gm_weights.size(); ++k) {
        double r2 = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
          double d = x[j] - p.gm_centers[k][j];
          r2 += d * d;
        }
        e -= p.gm_weights[k] * std::exp(-r2 / (2.0 * p.gm_widths[k] * p.gm_widths[k]));
      }
      break;
  }
  return e * p.label_scale;
}

std::vector<double> pes_force(const PESParams& p, const std::vector<double>& x) {
  std::vector<double> f(x.size(), 0.0);
  switch (p.kind) {
    case PESKind::Quadratic:
      for (std::size_t j = 0; j < x.size(); ++j) {
        double a = p.quad_diag.empty() ? 1.0 : p.quad_diag[j];
        f[j] = -a * x[j];
      }
      break;
    case PESKind::DoubleWell: {
      f[0] = -4.0 * p.dw_a * x[0] * (x[0] * x[0] - p.dw_b);
      for (std::size_t j = 1; j < x.size(); ++j) f[j] = -2.0 * p.dw_c * x[j];
      break;
    }
    case PESKind::GaussianMix:
      for (std::size_t k = 0; k < p.gm_weights.size(); ++k) {
        double s2 = p.gm_widths[k] * p.gm_widths[k];
        double r2 = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
          double d = x[j] - p.gm_centers[k][j];
          r2 += d * d;
        }
        double w = p.gm_weights[k] * std::exp(-r2 / (2.0 * s2)) / s2;
        for (std::size_t j = 0; j < x.size(); ++j) f[j] -= w * (x[j] - p.gm_centers[k][j]);
      }
      break;
  }
  for (double& v : f) v *= p.label_scale;
  return f;
}

PESDataset gen_pes(const PESParams& params, std::size_t n, std::uint64_t seed) {
  validate_pes(params);
  if (n == 0) throw DataError("gen_pes: n must be positive");
  PESDataset ds;
  ds.params = params;
  ds.seed = seed;
  ds.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng::stream(seed, i);
    PESSample& s = ds.samples[i];
    s.x.resize(params.dim);
    for (auto& c : s.x) c = rng.uniform(params.box_lo, params.box_hi);
    s.E = pes_energy(params, s.x);
    s.F = pes_force(params, s.x);
    // Generation-time check: force against central differences of U.
    const double h = 1e-6;
    std::vector<double> xp = s.x;
    for (std::size_t j = 0; j < params.dim; ++j) {
      xp[j] = s.x[j] + h;
      double up = pes_energy(params, xp);
      xp[j] = s.x[j] - h;
      double um = pes_energy(params, xp);
      xp[j] = s.x[j];
      double fd = -(up - um) / (2.0 * h);
      double denom = std::max({std::fabs(s.F[j]), std::fabs(fd), 1e-8 * params.label_scale});
      if (std::fabs(fd - s.F[j]) / denom > 1e-6)
        throw DataError("gen_pes: analytic force failed the finite-difference check");
    }
  }
  return ds;
}

Tensor PESDataset::X() const {
  Tensor t({samples.size(), dim()});
  for (std::size_t i = 0; i < samples.size(); ++i)
    for (std::size_t j = 0; j < dim(); ++j) t.at2(i, j) = samples[i].x[j];
  return t;
}

Tensor PESDataset::E() const {
  Tensor t({samples.size(), 1});
  for (std::size_t i = 0; i < samples.size(); ++i) t.data[i] = samples[i].E;
  return t;
}

Tensor PESDataset::F() const {
  Tensor t({samples.size(), dim()});
  for (std::size_t i = 0; i < samples.size(); ++i)
    for (std::size_t j = 0; j < dim(); ++j) t.at2(i, j) = samples[i].F[j];
  return t;
}

double PESDataset::force_variance() const {
  double mean = 0.0, n = 0.0;
  for (const auto& s : samples)
    for (double f : s.F) {
      mean += f;
      n += 1.0;
    }
  mean /= n;
  double var = 0.0;
  for (const auto& s : samples)
    for (double f : s.F) var += (f - mean) * (f - mean);
  return var / n;
}

// ---- PINN point sets ----

const Tensor& PINNPointSets::get(const std::string& name) const {
  for (const auto& [k, v] : labelled)
    if (k == name) return v;
  throw DataError("point set has no entry named " + name);
}

double AdvectionSolution::initial(double x) const {
  return std::sin(k1 * x + phi1) + std::sin(k2 * x + phi2);
}

double AdvectionSolution::initial_deriv(double x) const {
  return k1 * std::cos(k1 * x + phi1) + k2 * std::cos(k2 * x + phi2);
}

std::pair<PINNPointSets, AdvectionSolution> gen_advection(const PDEConstants& consts,
                                                          std::size_t n_f, std::size_t n_ic,
                                                          std::size_t n_bc, std::uint64_t seed,
                                                          double length, double t_max) {
  if (n_f == 0 || n_ic == 0 || n_bc == 0) throw DataError("gen_advection: counts must be positive");
  AdvectionSolution sol;
  sol.beta = consts.beta_adv;
  sol.length = length;
  Rng rng(seed);
  sol.k1 = static_cast<double>(rng.uniform_int(1, 4)) * kTwoPi / length;
  sol.k2 = static_cast<double>(rng.uniform_int(1, 4)) * kTwoPi / length;
  sol.phi1 = rng.uniform(0.0, kTwoPi);
  sol.phi2 = rng.uniform(0.0, kTwoPi);

  PINNPointSets ps;
  ps.domain_lo = 0.0;
  ps.domain_hi = length;
  ps.t_max = t_max;

  ps.Xf = Tensor({n_f, 2});
  for (std::size_t i = 0; i < n_f; ++i) {
    Rng r = Rng::stream(seed, i);
    ps.Xf.at2(i, 0) = r.uniform(0.0, length);
    ps.Xf.at2(i, 1) = r.uniform(0.0, t_max);
  }

  Tensor xic({n_ic, 2}), yic({n_ic, 1});
  for (std::size_t i = 0; i < n_ic; ++i) {
    Rng r = Rng::stream(seed, 1000000 + i);
    double x = r.uniform(0.0, length);
    xic.at2(i, 0) = x;
    xic.at2(i, 1) = 0.0;
    yic.data[i] = sol.initial(x);
  }

  // Periodic pairs: consecutive rows (x=0, t) and (x=L, t) share a target.
  if (n_bc % 2 != 0) throw DataError("gen_advection: n_bc must be even (periodic pairs)");
  Tensor xbc({n_bc, 2}), ybc({n_bc, 1});
  for (std::size_t i = 0; i < n_bc / 2; ++i) {
    Rng r = Rng::stream(seed, 2000000 + i);
    double t = r.uniform(0.0, t_max);
    xbc.at2(2 * i, 0) = 0.0;
    xbc.at2(2 * i, 1) = t;
    xbc.at2(2 * i + 1, 0) = length;
    xbc.at2(2 * i + 1, 1) = t;
    ybc.data[2 * i] = sol(0.0, t);
    ybc.data[2 * i + 1] = sol(length, t);
  }
  ps.labelled = {{"Xic", std::move(xic)},
                 {"Yic", std::move(yic)},
                 {"Xbc", std::move(xbc)},
                 {"Ybc", std::move(ybc)}};
  return {std::move(ps), sol};
}

// ---- diffusion-reaction ----

double DiffReactField::x_of(std::size_t i) const {
  return grid.lo + (grid.hi - grid.lo) * (static_cast<double>(i) + 0.5) / static_cast<double>(grid.nx);
}
double DiffReactField::y_of(std::size_t j) const {
  return grid.lo + (grid.hi - grid.lo) * (static_cast<double>(j) + 0.5) / static_cast<double>(grid.ny);
}
double DiffReactField::t_of(std::size_t s) const { return dt * static_cast<double>(s); }

namespace {

// 5-point Laplacian with reflective (zero-flux) boundaries.
void laplacian(const std::vector<double>& f, std::size_t nx, std::size_t ny, double inv_h2,
               std::vector<double>& out) {
  auto idx = [nx](std::size_t i, std::size_t j) { return j * nx + i; };
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t i = 0; i < nx; ++i) {
      double c = f[idx(i, j)];
      double xm = f[idx(i == 0 ? 0 : i - 1, j)];
      double xp = f[idx(i + 1 >= nx ? nx - 1 : i + 1, j)];
      double ym = f[idx(i, j == 0 ? 0 : j - 1)];
      double yp = f[idx(i, j + 1 >= ny ? ny - 1 : j + 1)];
      out[idx(i, j)] = (xm + xp + ym + yp - 4.0 * c) * inv_h2;
    }
}

}  // namespace

DiffReactField solve_diffreact_from(const PDEConstants& consts, const DiffReactGrid& grid,
                                    std::vector<double> u, std::vector<double> v) {
  DiffReactField f;
  f.grid = grid;
  const std::size_t nx = grid.nx, ny = grid.ny, n = nx * ny;
  if (u.size() != n || v.size() != n)
    throw DataError("solve_diffreact_from: initial fields must have nx*ny entries");
  const double h = (grid.hi - grid.lo) / static_cast<double>(nx);
  const double dmax = std::max(consts.D_u, consts.D_v);
  const double dt_stable = dmax > 0.0 ? h * h / (4.0 * dmax) : grid.t_max;
  f.dt = grid.dt > 0.0 ? grid.dt : 0.9 * dt_stable;
  if (dmax > 0.0 && f.dt > dt_stable + 1e-15)
    throw DataError("solve_diffreact: dt violates the explicit stability bound dt <= h^2/(4 D)");
  f.steps = static_cast<std::size_t>(std::ceil(grid.t_max / f.dt));

  std::vector<double> lap(n), u2(n), v2(n);
  const double inv_h2 = 1.0 / (h * h);
  f.u.reserve(f.steps + 1);
  f.v.reserve(f.steps + 1);
  f.u.push_back(u);
  f.v.push_back(v);
  const double react = grid.reaction ? 1.0 : 0.0;
  for (std::size_t s = 0; s < f.steps; ++s) {
    laplacian(u, nx, ny, inv_h2, lap);
    for (std::size_t i = 0; i < n; ++i)
      u2[i] = u[i] + f.dt * (consts.D_u * lap[i] +
                             react * (u[i] - u[i] * u[i] * u[i] - consts.k - v[i]));
    laplacian(v, nx, ny, inv_h2, lap);
    for (std::size_t i = 0; i < n; ++i)
      v2[i] = v[i] + f.dt * (consts.D_v * lap[i] + react * (u[i] - v[i]));
    u.swap(u2);
    v.swap(v2);
    f.u.push_back(u);
    f.v.push_back(v);
  }
  return f;
}

DiffReactField solve_diffreact(const PDEConstants& consts, const DiffReactGrid& grid,
                               std::uint64_t seed) {
  const std::size_t nx = grid.nx, ny = grid.ny, n = nx * ny;
  const double h = (grid.hi - grid.lo) / static_cast<double>(nx);
  std::vector<double> u(n), v(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng r = Rng::stream(seed, i);
    u[i] = r.normal();
    v[i] = r.normal();
  }
  // One diffusion step of smoothing so the IC is grid-resolvable.
  const double dmax = std::max(consts.D_u, consts.D_v);
  const double dt_stable = dmax > 0.0 ? h * h / (4.0 * dmax) : grid.t_max;
  const double dt = grid.dt > 0.0 ? grid.dt : 0.9 * dt_stable;
  std::vector<double> lap(n);
  const double inv_h2 = 1.0 / (h * h);
  laplacian(u, nx, ny, inv_h2, lap);
  for (std::size_t i = 0; i < n; ++i) u[i] += dt * consts.D_u * lap[i];
  laplacian(v, nx, ny, inv_h2, lap);
  for (std::size_t i = 0; i < n; ++i) v[i] += dt * consts.D_v * lap[i];
  return solve_diffreact_from(consts, grid, std::move(u), std::move(v));
}

std::pair<PINNPointSets, DiffReactField> gen_diffreact(const PDEConstants& consts,
                                                       const DiffReactGrid& grid, std::size_t n_f,
                                                       std::size_t n_ic, std::size_t n_bc,
                                                       std::uint64_t seed) {
  if (n_f == 0 || n_ic == 0 || n_bc == 0) throw DataError("gen_diffreact: counts must be positive");
  DiffReactField field = solve_diffreact(consts, grid, seed);
  const std::size_t nx = grid.nx, ny = grid.ny;

  PINNPointSets ps;
  ps.domain_lo = grid.lo;
  ps.domain_hi = grid.hi;
  ps.t_max = grid.t_max;

  ps.Xf = Tensor({n_f, 3});
  for (std::size_t i = 0; i < n_f; ++i) {
    Rng r = Rng::stream(seed ^ 0xD1FFu, i);
    std::size_t gi = static_cast<std::size_t>(r.uniform_int(0, static_cast<std::int64_t>(nx) - 1));
    std::size_t gj = static_cast<std::size_t>(r.uniform_int(0, static_cast<std::int64_t>(ny) - 1));
    std::size_t gs = static_cast<std::size_t>(r.uniform_int(0, static_cast<std::int64_t>(field.steps)));
    ps.Xf.at2(i, 0) = field.x_of(gi);
    ps.Xf.at2(i, 1) = field.y_of(gj);
    ps.Xf.at2(i, 2) = field.t_of(gs);
  }

  Tensor xic_u({n_ic, 3}), yic_u({n_ic, 1}), xic_v({n_ic, 3}), yic_v({n_ic, 1});
  for (std::size_t i = 0; i < n_ic; ++i) {
    Rng r = Rng::stream(seed ^ 0x1C0u, i);
    std::size_t gi = static_cast<std::size_t>(r.uniform_int(0, static_cast<std::int64_t>(nx) - 1));
    std::size_t gj = static_cast<std::size_t>(r.uniform_int(0, static_cast<std::int64_t>(ny) - 1));
    double x = field.x_of(gi), y = field.y_of(gj);
    xic_u.at2(i, 0) = x; xic_u.at2(i, 1) = y; xic_u.at2(i, 2) = 0.0;
    xic_v.at2(i, 0) = x; xic_v.at2(i, 1) = y; xic_v.at2(i, 2) = 0.0;
    yic_u.data[i] = field.u[0][gj * nx + gi];
    yic_v.data[i] = field.v[0][gj * nx + gi];
  }

  Tensor xbc_d({n_bc, 3}), xbc_u({n_bc, 3}), ybc_u({n_bc, 1}), xbc_v({n_bc, 3}), ybc_v({n_bc, 1});
  for (std::size_t i = 0; i < n_bc; ++i) {
    Rng r = Rng::stream(seed ^ 0xBC0u, i);
    // A random node on one of the four edges.
    std::size_t edge = static_cast<std::size_t>(r.uniform_int(0, 3));
    std::size_t gi = static_cast<std::size_t>(r.uniform_int(0, static_cast<std::int64_t>(nx) - 1));
    std::size_t gj = static_cast<std::size_t>(r.uniform_int(0, static_cast<std::int64_t>(ny) - 1));
    if (edge == 0) gi = 0;
    else if (edge == 1) gi = nx - 1;
    else if (edge == 2) gj = 0;
    else gj = ny - 1;
    std::size_t gs = static_cast<std::size_t>(r.uniform_int(0, static_cast<std::int64_t>(field.steps)));
    double x = field.x_of(gi), y = field.y_of(gj), t = field.t_of(gs);
    for (Tensor* tt : {&xbc_d, &xbc_u, &xbc_v}) {
      tt->at2(i, 0) = x;
      tt->at2(i, 1) = y;
      tt->at2(i, 2) = t;
    }
    ybc_u.data[i] = field.u[gs][gj * nx + gi];
    ybc_v.data[i] = field.v[gs][gj * nx + gi];
  }
  ps.labelled = {{"Xic_u", std::move(xic_u)}, {"Yic_u", std::move(yic_u)},
                 {"Xic_v", std::move(xic_v)}, {"Yic_v", std::move(yic_v)},
                 {"Xbc_d", std::move(xbc_d)}, {"Xbc_u", std::move(xbc_u)},
                 {"Ybc_u", std::move(ybc_u)}, {"Xbc_v", std::move(xbc_v)},
                 {"Ybc_v", std::move(ybc_v)}};
  return {std::move(ps), std::move(field)};
}

// ---- CFD point sets ----

PINNPointSets gen_cfd(const PDEConstants& consts, std::size_t n_f, std::size_t n_ic,
                      std::size_t n_bc, std::uint64_t seed, double length, double t_max) {
  (void)consts;
  if (n_f == 0 || n_ic == 0 || n_bc == 0) throw DataError("gen_cfd: counts must be positive");
  // Four-wave superposition ICs per field, offset so density and pressure
  // stay positive.
  struct Waves {
    double k[4], phi[4], w[4], offset;
    double operator()(double x) const {
      double s = offset;
      for (int i = 0; i < 4; ++i) s += w[i] * std::sin(k[i] * x + phi[i]);
      return s;
    }
  };
  Rng rng(seed);
  auto make_waves = [&](double offset) {
    Waves w{};
    for (int i = 0; i < 4; ++i) {
      w.k[i] = static_cast<double>(rng.uniform_int(1, 4)) * kTwoPi / length;
      w.phi[i] = rng.uniform(0.0, kTwoPi);
      w.w[i] = rng.uniform(0.05, 0.25);
    }
    w.offset = offset;
    return w;
  };
  Waves rho0 = make_waves(1.5), v0 = make_waves(0.0), p0 = make_waves(1.5);

  PINNPointSets ps;
  ps.domain_lo = 0.0;
  ps.domain_hi = length;
  ps.t_max = t_max;
  ps.Xf = Tensor({n_f, 2});
  for (std::size_t i = 0; i < n_f; ++i) {
    Rng r = Rng::stream(seed, i);
    ps.Xf.at2(i, 0) = r.uniform(0.0, length);
    ps.Xf.at2(i, 1) = r.uniform(0.0, t_max);
  }

  const char* fields[] = {"p", "d", "v"};
  const Waves* ic[] = {&p0, &rho0, &v0};
  for (int fi = 0; fi < 3; ++fi) {
    Tensor xic({n_ic, 2}), yic({n_ic, 1});
    for (std::size_t i = 0; i < n_ic; ++i) {
      Rng r = Rng::stream(seed ^ (0x1C0u + static_cast<unsigned>(fi)), i);
      double x = r.uniform(0.0, length);
      xic.at2(i, 0) = x;
      xic.at2(i, 1) = 0.0;
      yic.data[i] = (*ic[fi])(x);
    }
    // Periodic boundary pairs; targets known only at t=0, later boundary
    // rows reuse the IC value of the matching endpoint.
    Tensor xbc({n_bc, 2}), ybc({n_bc, 1});
    for (std::size_t i = 0; i < n_bc; ++i) {
      Rng r = Rng::stream(seed ^ (0xBC0u + static_cast<unsigned>(fi)), i);
      bool right = r.uniform() < 0.5;
      xbc.at2(i, 0) = right ? length : 0.0;
      xbc.at2(i, 1) = r.uniform(0.0, t_max);
      ybc.data[i] = (*ic[fi])(right ? length : 0.0);
    }
    ps.labelled.emplace_back(std::string("Xic_") + fields[fi], std::move(xic));
    ps.labelled.emplace_back(std::string("Yic_") + fields[fi], std::move(yic));
    ps.labelled.emplace_back(std::string("Xbc_") + fields[fi], std::move(xbc));
    ps.labelled.emplace_back(std::string("Ybc_") + fields[fi], std::move(ybc));
  }
  return ps;
}

}  // namespace dctrain
