#include "dctrain/dcloss.hpp"

namespace dctrain {

namespace {

// mean |a - b|^2 over n rows.
NodeId mse(Graph& g, NodeId a, NodeId b, std::size_t n) {
  return g.scale(g.sum_all(g.square(g.sub(a, b))), 1.0 / static_cast<double>(n));
}

// One-hot (d,1) column selector.
NodeId selector(Graph& g, std::size_t d, std::size_t col) {
  Tensor e({d, 1});
  e.data[col] = 1.0;
  return g.constant(std::move(e));
}

// Per-sample partial of the summed field w.r.t. input column `col`. The
// field must already be marked as scalar output `sum_name`; returns the
// (n,1) column of the input gradient. `g` is replaced by its extension.
NodeId input_partial(Graph& g, const std::string& sum_name, const std::string& xvar,
                     std::size_t col) {
  g = grad(g, sum_name, {xvar});
  NodeId full = g.output("d" + sum_name + "/d" + xvar);
  return g.matmul(full, selector(g, g.node(full).shape[1], col));
}

NodeId scalar_sum_marked(Graph& g, NodeId field, const std::string& name) {
  NodeId s = g.sum_all(field);
  g.mark_output(name, s);
  return s;
}

}  // namespace

LossTerms energy_force_loss(const MLPConfig& model, std::size_t n, std::size_t d,
                            const DCWeights& w) {
  if (!(w.rescale_C > 0.0)) throw GraphError("energy_force_loss: rescale_C must be positive");
  if (w.alpha == 0.0 && w.beta == 0.0)
    throw GraphError("energy_force_loss: alpha and beta cannot both be zero");
  const double inv_c = 1.0 / w.rescale_C;

  LossTerms lt;
  Graph& g = lt.graph;
  NodeId x = g.var("X", {n, d});
  NodeId e = g.var("E", {n, 1});
  NodeId f = g.var("F", {n, d});
  NodeId pred_e = mlp_forward(g, model, x, "");
  g.mark_output("energy", pred_e);
  scalar_sum_marked(g, pred_e, "_energy_sum");

  NodeId pred_term = g.sum_all(g.square(g.sub(pred_e, g.scale(e, inv_c))));
  g.mark_output("pred", pred_term);

  // Predicted force is the exact negative input-gradient of the energy.
  g = grad(g, "_energy_sum", {"X"});
  NodeId force_pred = g.neg(g.output("d_energy_sum/dX"));
  g.mark_output("force_pred", force_pred);
  NodeId force_term = g.sum_all(g.square(g.sub(force_pred, g.scale(g.variable("F"), inv_c))));
  g.mark_output("force", force_term);

  NodeId total = g.add(g.scale(g.output("pred"), w.alpha), g.scale(force_term, w.beta));
  g.mark_output("total", total);
  (void)e;
  (void)f;
  lt.term_names = {"pred", "force"};
  lt.data_vars = {"X", "E", "F"};
  return lt;
}

LossTerms advection_loss(const MLPConfig& model, std::size_t n_f, std::size_t n_ic,
                         std::size_t n_bc, const PDEConstants& consts) {
  if (n_f == 0 || n_ic == 0 || n_bc == 0) throw GraphError("advection_loss: empty point set");
  LossTerms lt;
  Graph& g = lt.graph;
  NodeId xf = g.var("Xf", {n_f, 2});
  NodeId xic = g.var("Xic", {n_ic, 2});
  NodeId yic = g.var("Yic", {n_ic, 1});
  NodeId xbc = g.var("Xbc", {n_bc, 2});
  NodeId ybc = g.var("Ybc", {n_bc, 1});

  NodeId psi_f = mlp_forward(g, model, xf, "");
  scalar_sum_marked(g, psi_f, "_psi_f_sum");
  NodeId psi_x = input_partial(g, "_psi_f_sum", "Xf", 0);
  // input_partial replaced g with an extension; node ids remain valid.
  NodeId psi_t = g.matmul(g.output("d_psi_f_sum/dXf"), selector(g, 2, 1));
  NodeId residual = g.add(psi_t, g.scale(psi_x, consts.beta_adv));
  NodeId f_term = g.scale(g.sum_all(g.square(residual)), 1.0 / static_cast<double>(n_f));
  g.mark_output("f", f_term);

  NodeId ic_term = mse(g, mlp_forward(g, model, xic, ""), yic, n_ic);
  g.mark_output("IC", ic_term);
  NodeId bc_term = mse(g, mlp_forward(g, model, xbc, ""), ybc, n_bc);
  g.mark_output("BC", bc_term);

  g.mark_output("total", g.add(g.add(f_term, ic_term), bc_term));
  lt.term_names = {"f", "IC", "BC"};
  lt.data_vars = {"Xf", "Xic", "Yic", "Xbc", "Ybc"};
  return lt;
}

LossTerms cfd_loss(const MLPConfig& model, std::size_t n_f, std::size_t n_ic, std::size_t n_bc,
                   const PDEConstants& consts, const LossFlags& flags) {
  if (n_f == 0 || n_ic == 0 || n_bc == 0) throw GraphError("cfd_loss: empty point set");
  LossTerms lt;
  Graph& g = lt.graph;
  NodeId xf = g.var("Xf", {n_f, 2});
  const char* fields[] = {"p", "d", "v"};
  for (const char* fld : fields) {
    g.var(std::string("Xic_") + fld, {n_ic, 2});
    g.var(std::string("Yic_") + fld, {n_ic, 1});
    g.var(std::string("Xbc_") + fld, {n_bc, 2});
    g.var(std::string("Ybc_") + fld, {n_bc, 1});
  }

  NodeId rho = mlp_forward(g, model, xf, "rho_");
  NodeId v = mlp_forward(g, model, xf, "v_");
  NodeId p = mlp_forward(g, model, xf, "p_");

  // f1 = rho_t + (rho v)_x
  scalar_sum_marked(g, rho, "_rho_sum");
  NodeId rho_t = input_partial(g, "_rho_sum", "Xf", 1);
  scalar_sum_marked(g, g.mul(rho, v), "_rhov_sum");
  NodeId rhov_x = input_partial(g, "_rhov_sum", "Xf", 0);
  NodeId f1 = g.add(rho_t, rhov_x);

  // f2 = rho*(v_t + v*v_x) -/+ p_x
  scalar_sum_marked(g, v, "_v_sum");
  NodeId v_x = input_partial(g, "_v_sum", "Xf", 0);
  NodeId v_t = g.matmul(g.output("d_v_sum/dXf"), selector(g, 2, 1));
  scalar_sum_marked(g, p, "_p_sum");
  NodeId p_x = input_partial(g, "_p_sum", "Xf", 0);
  NodeId momentum = g.mul(rho, g.add(v_t, g.mul(v, v_x)));
  NodeId f2 = flags.corrected_momentum_sign ? g.add(momentum, p_x) : g.sub(momentum, p_x);

  // f3 = [p/(gamma-1) + 0.5*rho*v^2]_t + [v*(p/(gamma-1) + 0.5*rho*v^2 + p)]_x
  // (the printed h and u are read as rho and v).
  NodeId energy_density =
      g.add(g.scale(p, 1.0 / (consts.gamma - 1.0)), g.scale(g.mul(rho, g.square(v)), 0.5));
  scalar_sum_marked(g, energy_density, "_ed_sum");
  NodeId ed_t = input_partial(g, "_ed_sum", "Xf", 1);
  scalar_sum_marked(g, g.mul(v, g.add(energy_density, p)), "_flux_sum");
  NodeId flux_x = input_partial(g, "_flux_sum", "Xf", 0);
  NodeId f3 = g.add(ed_t, flux_x);

  const double inv_nf = 1.0 / static_cast<double>(n_f);
  NodeId f_term;
  if (flags.per_residual_norm) {
    NodeId ss = g.add(g.add(g.square(f1), g.square(f2)), g.square(f3));
    f_term = g.scale(g.sum_all(ss), inv_nf);
  } else {
    f_term = g.scale(g.sum_all(g.square(g.add(g.add(f1, f2), f3))), inv_nf);
  }
  g.mark_output("f", f_term);

  const char* prefixes[] = {"p_", "rho_", "v_"};
  const char* terms[] = {"p", "d", "v"};
  NodeId total = f_term;
  for (int i = 0; i < 3; ++i) {
    NodeId ic = mse(g, mlp_forward(g, model, g.variable(std::string("Xic_") + terms[i]), prefixes[i]),
                    g.variable(std::string("Yic_") + terms[i]), n_ic);
    g.mark_output(std::string("IC_") + terms[i], ic);
    total = g.add(total, ic);
    NodeId bc = mse(g, mlp_forward(g, model, g.variable(std::string("Xbc_") + terms[i]), prefixes[i]),
                    g.variable(std::string("Ybc_") + terms[i]), n_bc);
    g.mark_output(std::string("BC_") + terms[i], bc);
    total = g.add(total, bc);
  }
  g.mark_output("total", total);
  lt.term_names = {"f", "IC_p", "IC_d", "IC_v", "BC_p", "BC_d", "BC_v"};
  lt.data_vars = {"Xf"};
  for (const char* fld : fields) {
    lt.data_vars.push_back(std::string("Xic_") + fld);
    lt.data_vars.push_back(std::string("Yic_") + fld);
    lt.data_vars.push_back(std::string("Xbc_") + fld);
    lt.data_vars.push_back(std::string("Ybc_") + fld);
  }
  return lt;
}

LossTerms diffreact_loss(const MLPConfig& model, std::size_t n_f, std::size_t n_ic,
                         std::size_t n_bc, const PDEConstants& consts, const LossFlags& flags) {
  if (n_f == 0 || n_ic == 0 || n_bc == 0) throw GraphError("diffreact_loss: empty point set");
  LossTerms lt;
  Graph& g = lt.graph;
  NodeId xf = g.var("Xf", {n_f, 3});
  g.var("Xic_u", {n_ic, 3});
  g.var("Yic_u", {n_ic, 1});
  g.var("Xic_v", {n_ic, 3});
  g.var("Yic_v", {n_ic, 1});
  g.var("Xbc_d", {n_bc, 3});
  g.var("Xbc_u", {n_bc, 3});
  g.var("Ybc_u", {n_bc, 1});
  g.var("Xbc_v", {n_bc, 3});
  g.var("Ybc_v", {n_bc, 1});

  NodeId u = mlp_forward(g, model, xf, "u_");
  NodeId v = mlp_forward(g, model, xf, "v_");

  scalar_sum_marked(g, u, "_u_sum");
  NodeId u_x = input_partial(g, "_u_sum", "Xf", 0);
  NodeId gu = g.output("d_u_sum/dXf");
  NodeId u_y = g.matmul(gu, selector(g, 3, 1));
  NodeId u_t = g.matmul(gu, selector(g, 3, 2));
  scalar_sum_marked(g, u_x, "_u_x_sum");
  NodeId u_xx = input_partial(g, "_u_x_sum", "Xf", 0);
  scalar_sum_marked(g, u_y, "_u_y_sum");
  NodeId u_yy = input_partial(g, "_u_y_sum", "Xf", 1);

  scalar_sum_marked(g, v, "_v_sum");
  NodeId v_x = input_partial(g, "_v_sum", "Xf", 0);
  NodeId gv = g.output("d_v_sum/dXf");
  NodeId v_y = g.matmul(gv, selector(g, 3, 1));
  NodeId v_t = g.matmul(gv, selector(g, 3, 2));
  scalar_sum_marked(g, v_x, "_v_x_sum");
  NodeId v_xx = input_partial(g, "_v_x_sum", "Xf", 0);
  scalar_sum_marked(g, v_y, "_v_y_sum");
  NodeId v_yy = input_partial(g, "_v_y_sum", "Xf", 1);

  // f1 = u_t - D_u*(u_xx + u_yy) - u + u^3 + k + v
  NodeId u3 = g.mul(u, g.square(u));
  NodeId f1 = g.add(
      g.add(g.sub(g.sub(u_t, g.scale(g.add(u_xx, u_yy), consts.D_u)), u), g.add(u3, v)),
      g.scalar(consts.k));
  // f2 = v_t - D_v*(v_xx + v_yy) - u + v
  NodeId f2 = g.add(g.sub(g.sub(v_t, g.scale(g.add(v_xx, v_yy), consts.D_v)), u), v);

  NodeId f_term =
      g.scale(g.sum_all(g.square(g.add(f1, f2))), 1.0 / static_cast<double>(n_f));
  g.mark_output("f", f_term);

  NodeId ic_u = mse(g, mlp_forward(g, model, g.variable("Xic_u"), "u_"), g.variable("Yic_u"), n_ic);
  g.mark_output("IC_u", ic_u);
  NodeId ic_v = mse(g, mlp_forward(g, model, g.variable("Xic_v"), "v_"), g.variable("Yic_v"), n_ic);
  g.mark_output("IC_v", ic_v);

  // Derivative BC, as printed: |u_x + v_x + u_y + u_y|^2 (u_y twice); the
  // corrected_bc flag substitutes v_y for the duplicate.
  NodeId ub = mlp_forward(g, model, g.variable("Xbc_d"), "u_");
  NodeId vb = mlp_forward(g, model, g.variable("Xbc_d"), "v_");
  scalar_sum_marked(g, ub, "_ub_sum");
  NodeId ub_x = input_partial(g, "_ub_sum", "Xbc_d", 0);
  NodeId ub_y = g.matmul(g.output("d_ub_sum/dXbc_d"), selector(g, 3, 1));
  scalar_sum_marked(g, vb, "_vb_sum");
  NodeId vb_x = input_partial(g, "_vb_sum", "Xbc_d", 0);
  NodeId vb_y = g.matmul(g.output("d_vb_sum/dXbc_d"), selector(g, 3, 1));
  NodeId last = flags.corrected_bc ? vb_y : ub_y;
  NodeId bc_res = g.add(g.add(ub_x, vb_x), g.add(ub_y, last));
  NodeId bc_term = g.scale(g.sum_all(g.square(bc_res)), 1.0 / static_cast<double>(n_bc));
  g.mark_output("BC", bc_term);

  NodeId bc_u = mse(g, mlp_forward(g, model, g.variable("Xbc_u"), "u_"), g.variable("Ybc_u"), n_bc);
  g.mark_output("BC_u", bc_u);
  NodeId bc_v = mse(g, mlp_forward(g, model, g.variable("Xbc_v"), "v_"), g.variable("Ybc_v"), n_bc);
  g.mark_output("BC_v", bc_v);

  NodeId total = g.add(g.add(g.add(f_term, ic_u), g.add(ic_v, bc_term)), g.add(bc_u, bc_v));
  g.mark_output("total", total);
  lt.term_names = {"f", "IC_u", "IC_v", "BC", "BC_u", "BC_v"};
  lt.data_vars = {"Xf",    "Xic_u", "Yic_u", "Xic_v", "Yic_v",
                  "Xbc_d", "Xbc_u", "Ybc_u", "Xbc_v", "Ybc_v"};
  return lt;
}

}  // namespace dctrain
