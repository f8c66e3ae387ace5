#pragma once

#include <string>
#include <vector>

#include "dctrain/grad.hpp"
#include "dctrain/mlp.hpp"

namespace dctrain {

// Weights of the energy/force loss: total = alpha*pred + beta*force, with
// labels divided by rescale_C inside the graph (1 = no rescaling).
struct DCWeights {
  double alpha = 1.0;
  double beta = 1.0;
  double rescale_C = 1.0;
};

struct PDEConstants {
  double beta_adv = 0.1;            // advection transport speed
  double gamma = 5.0 / 3.0;         // CFD adiabatic index
  double eta = 1e-8, zeta = 1e-8;   // CFD viscosities; stored, not in the residual
  double k = 0.005;                 // FitzHugh-Nagumo constant
  double D_u = 1e-3, D_v = 5e-3;    // diffusion coefficients
};

struct LossFlags {
  // CFD: conventional mean(|f1|^2+|f2|^2+|f3|^2) instead of the printed
  // summed-residual mean|f1+f2+f3|^2.
  bool per_residual_norm = false;
  // CFD momentum residual: rho*(v_t + v*v_x) + p_x instead of the printed
  // minus sign.
  bool corrected_momentum_sign = false;
  // Diffusion-reaction derivative BC: substitute v_y for the duplicated u_y.
  bool corrected_bc = false;
};

// A loss graph with named scalar term outputs and their unweighted or
// weighted sum under "total". Data and model parameters are Vars; bind them
// at evaluation time.
struct LossTerms {
  Graph graph;
  std::vector<std::string> term_names;  // outputs, excluding "total"
  std::vector<std::string> data_vars;   // Vars the caller must bind with data
};

// Eq-style energy/force loss over a batch of n samples in d dimensions:
//   pred  = sum_i |f(x_i) - E_i/C|^2
//   force = sum_i |-grad_x f(x_i) - F_i/C|^2
//   total = alpha*pred + beta*force
// Data Vars: X (n,d), E (n,1), F (n,d). The force node is the exact
// negative input-gradient of the energy output ("energy", "force_pred").
LossTerms energy_force_loss(const MLPConfig& model, std::size_t n, std::size_t d,
                            const DCWeights& w);

// Advection residual psi_t + beta*psi_x with value IC/BC terms; all terms
// are means over their point sets, total is their unit-weighted sum.
// Data Vars: Xf (n_f,2), Xic (n_ic,2), Yic (n_ic,1), Xbc (n_bc,2), Ybc (n_bc,1).
LossTerms advection_loss(const MLPConfig& model, std::size_t n_f, std::size_t n_ic,
                         std::size_t n_bc, const PDEConstants& consts);

// 1D compressible-flow loss with heads rho/v/p over (x,t). Terms f, IC_p,
// IC_d, IC_v, BC_p, BC_d, BC_v. Head parameters use prefixes rho_, v_, p_.
// Data Vars: Xf, and X/Y pairs Xic_p, Yic_p, ... Xbc_v, Ybc_v.
LossTerms cfd_loss(const MLPConfig& model, std::size_t n_f, std::size_t n_ic, std::size_t n_bc,
                   const PDEConstants& consts, const LossFlags& flags);

// FitzHugh-Nagumo diffusion-reaction loss with heads u/v over (x,y,t).
// Terms f, IC_u, IC_v, BC (derivative), BC_u, BC_v. The f term contains
// u_xx/u_yy, so parameter gradients of "total" exercise third-order
// differentiation. Data Vars: Xf, Xic_u, Yic_u, Xic_v, Yic_v, Xbc_d,
// Xbc_u, Ybc_u, Xbc_v, Ybc_v.
LossTerms diffreact_loss(const MLPConfig& model, std::size_t n_f, std::size_t n_ic,
                         std::size_t n_bc, const PDEConstants& consts, const LossFlags& flags);

}  // namespace dctrain
