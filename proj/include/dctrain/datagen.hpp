#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dctrain/dcloss.hpp"
#include "dctrain/tensor.hpp"

namespace dctrain {

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- label rescaling ----

struct RescaleInfo {
  double C = 1.0;  // positive power of ten
  double max_abs_label = 0.0;
};

// Smallest power of ten C with max|label| <= C; C = 1 when all labels are 0.
RescaleInfo rescale_constant(const std::vector<double>& labels);

// ---- potential-energy-surface datasets ----

enum class PESKind { Quadratic, DoubleWell, GaussianMix };
const char* pes_kind_name(PESKind k);

struct PESParams {
  PESKind kind = PESKind::Quadratic;
  std::size_t dim = 2;
  // quadratic U = 0.5 x^T A x; A diagonal entries (length dim, positive).
  std::vector<double> quad_diag;
  // double well U = a*(x1^2 - b)^2 + sum_{j>1} c*x_j^2
  double dw_a = 1.0, dw_b = 1.0, dw_c = 1.0;
  // gaussian mix U = -sum_k w_k exp(-|x - mu_k|^2 / (2 s_k^2))
  std::vector<double> gm_weights;
  std::vector<std::vector<double>> gm_centers;
  std::vector<double> gm_widths;
  double box_lo = -2.0, box_hi = 2.0;
  // scales E and F after generation; stands in for "labels with units".
  double label_scale = 1.0;
};

struct PESSample {
  std::vector<double> x;
  double E;
  std::vector<double> F;
};

struct PESDataset {
  PESParams params;
  std::uint64_t seed = 0;
  std::vector<PESSample> samples;

  std::size_t dim() const { return params.dim; }
  // Copies samples into (n,d)/(n,1)/(n,d) tensors for graph binding.
  Tensor X() const;
  Tensor E() const;
  Tensor F() const;
  double force_variance() const;
};

// Analytic energy and force (F = -grad U), used by the generator and tests.
double pes_energy(const PESParams& p, const std::vector<double>& x);
std::vector<double> pes_force(const PESParams& p, const std::vector<double>& x);

// Samples x uniformly in the box; every sample's force is verified against
// central differences of U at generation time (1e-6 relative).
PESDataset gen_pes(const PESParams& params, std::size_t n, std::uint64_t seed);

// ---- PINN point sets ----

struct PINNPointSets {
  // Rows of coords are (x,t) or (x,y,t); targets are column vectors.
  Tensor Xf;
  std::vector<std::pair<std::string, Tensor>> labelled;  // name -> tensor (Xic, Yic, ...)
  double domain_lo = 0.0, domain_hi = 1.0, t_max = 2.0;

  const Tensor& get(const std::string& name) const;
};

struct AdvectionSolution {
  double beta = 0.1, length = 1.0;
  double k1, phi1, k2, phi2;  // wave numbers and phases of the IC

  double initial(double x) const;
  double initial_deriv(double x) const;
  double operator()(double x, double t) const { return initial(x - beta * t); }
  double psi_x(double x, double t) const { return initial_deriv(x - beta * t); }
  double psi_t(double x, double t) const { return -beta * initial_deriv(x - beta * t); }
};

// Random two-wave periodic initial condition; exact solution handle is the
// transported IC. Point sets: Xf uniform in [0,L]x[0,T]; Xic/Yic at t=0;
// Xbc/Ybc periodic pairs at x=0 and x=L (consecutive rows are a pair).
std::pair<PINNPointSets, AdvectionSolution> gen_advection(const PDEConstants& consts,
                                                          std::size_t n_f, std::size_t n_ic,
                                                          std::size_t n_bc, std::uint64_t seed,
                                                          double length = 1.0, double t_max = 2.0);

// ---- diffusion-reaction reference solver ----

struct DiffReactGrid {
  std::size_t nx = 32, ny = 32;
  double lo = -1.0, hi = 1.0;
  double dt = 0.0;  // 0 = auto from the stability bound
  double t_max = 1.0;
  bool reaction = true;  // false = pure diffusion (conservation checks)
};

// Explicit forward-Euler, 5-point Laplacian, reflective boundaries. Fields
// u/v stored per step, row-major (ny rows of nx). The [DERIVED] oracle for
// diffusion-reaction test MSE.
struct DiffReactField {
  DiffReactGrid grid;
  double dt = 0.0;
  std::size_t steps = 0;
  std::vector<std::vector<double>> u, v;  // per recorded step, size nx*ny

  double x_of(std::size_t i) const;
  double y_of(std::size_t j) const;
  double t_of(std::size_t s) const;
};

// IC: i.i.d. N(0,1) per cell, then smoothed by one diffusion step.
DiffReactField solve_diffreact(const PDEConstants& consts, const DiffReactGrid& grid,
                               std::uint64_t seed);

// Same solver from explicit initial fields (nx*ny each, row-major).
DiffReactField solve_diffreact_from(const PDEConstants& consts, const DiffReactGrid& grid,
                                    std::vector<double> u0, std::vector<double> v0);

// Point sets sampled from the reference grid; Xbc_d carries boundary nodes
// for the derivative BC. Also returns the field for test-MSE evaluation.
std::pair<PINNPointSets, DiffReactField> gen_diffreact(const PDEConstants& consts,
                                                       const DiffReactGrid& grid, std::size_t n_f,
                                                       std::size_t n_ic, std::size_t n_bc,
                                                       std::uint64_t seed);

// CFD training point sets: four-wave random IC fields for rho/v/p on [0,L],
// periodic boundary pairs. No reference solver exists; these are used for
// training-term experiments only.
PINNPointSets gen_cfd(const PDEConstants& consts, std::size_t n_f, std::size_t n_ic,
                      std::size_t n_bc, std::uint64_t seed, double length = 1.0,
                      double t_max = 1.0);

}  // namespace dctrain
