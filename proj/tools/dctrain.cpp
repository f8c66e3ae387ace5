// Experiment driver: dataset generation, training, beta sweeps, ablations,
// and report aggregation over JSON configs.
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dctrain/dataset_io.hpp"
#include "dctrain/rng.hpp"
#include "dctrain/trainer.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dctrain;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitDiverged = 4;

struct CliExit {
  int code;
  std::string msg;
};

[[noreturn]] void fail(int code, const std::string& msg) { throw CliExit{code, msg}; }

// ---- config schema ----

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& ctx) {
  if (!j.is_object()) fail(kExitConfig, ctx + ": expected a JSON object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) fail(kExitConfig, ctx + ": unknown key '" + k + "'");
}

template <typename T>
T get_or(const json& j, const std::string& key, T dflt) {
  if (!j.contains(key)) return dflt;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(kExitConfig, "bad value for key '" + key + "'");
  }
}

struct ExperimentConfig {
  std::string task;  // pes | advection | cfd | diffreact
  // data
  PESParams pes;
  std::size_t n = 1000, n_eval = 200;
  std::size_t n_f = 1000, n_ic = 100, n_bc = 100;
  DiffReactGrid grid;
  double length = 1.0, t_max = 2.0;
  std::uint64_t data_seed = 0;
  // model / training / loss
  MLPConfig model;
  TrainConfig train;
  DCWeights weights;
  bool auto_rescale = true;
  LossFlags flags;
  PDEConstants consts;
  // protocol extras
  std::vector<double> betas;
  std::size_t n_seeds = 5;
  std::string out;
};

std::size_t task_input_dim(const ExperimentConfig& c) {
  if (c.task == "pes") return c.pes.dim;
  if (c.task == "diffreact") return 3;
  return 2;
}

ExperimentConfig parse_config(const json& j) {
  check_keys(j, {"task", "data", "model", "train", "loss", "sweep", "ablate", "out"}, "config");
  ExperimentConfig c;
  c.task = get_or<std::string>(j, "task", "");
  if (c.task != "pes" && c.task != "advection" && c.task != "cfd" && c.task != "diffreact")
    fail(kExitConfig, "task must be one of pes/advection/cfd/diffreact");
  c.out = get_or<std::string>(j, "out", "");

  json d = j.value("data", json::object());
  if (c.task == "pes") {
    check_keys(d,
               {"kind", "dim", "n", "n_eval", "seed", "label_scale", "quad_diag", "dw_a", "dw_b",
                "dw_c", "gm_weights", "gm_centers", "gm_widths", "box_lo", "box_hi"},
               "data");
    std::string kind = get_or<std::string>(d, "kind", "quadratic");
    if (kind == "quadratic") c.pes.kind = PESKind::Quadratic;
    else if (kind == "double_well") c.pes.kind = PESKind::DoubleWell;
    else if (kind == "gaussian_mix") c.pes.kind = PESKind::GaussianMix;
    else fail(kExitConfig, "data.kind must be quadratic/double_well/gaussian_mix");
    c.pes.dim = get_or<std::size_t>(d, "dim", 2);
    c.pes.label_scale = get_or<double>(d, "label_scale", 1.0);
    c.pes.quad_diag = get_or<std::vector<double>>(d, "quad_diag", {});
    c.pes.dw_a = get_or<double>(d, "dw_a", 1.0);
    c.pes.dw_b = get_or<double>(d, "dw_b", 1.0);
    c.pes.dw_c = get_or<double>(d, "dw_c", 1.0);
    c.pes.gm_weights = get_or<std::vector<double>>(d, "gm_weights", {});
    c.pes.gm_centers = get_or<std::vector<std::vector<double>>>(d, "gm_centers", {});
    c.pes.gm_widths = get_or<std::vector<double>>(d, "gm_widths", {});
    c.pes.box_lo = get_or<double>(d, "box_lo", -2.0);
    c.pes.box_hi = get_or<double>(d, "box_hi", 2.0);
    c.n = get_or<std::size_t>(d, "n", 1000);
    c.n_eval = get_or<std::size_t>(d, "n_eval", 200);
  } else {
    std::set<std::string> keys = {"n_f", "n_ic", "n_bc", "n_eval", "seed"};
    if (c.task == "advection") {
      keys.insert("length");
      keys.insert("t_max");
    }
    if (c.task == "diffreact") {
      keys.insert("nx");
      keys.insert("ny");
      keys.insert("t_max");
    }
    check_keys(d, keys, "data");
    c.n_f = get_or<std::size_t>(d, "n_f", 1000);
    c.n_ic = get_or<std::size_t>(d, "n_ic", 100);
    c.n_bc = get_or<std::size_t>(d, "n_bc", 100);
    c.n_eval = get_or<std::size_t>(d, "n_eval", 200);
    c.length = get_or<double>(d, "length", 1.0);
    c.t_max = get_or<double>(d, "t_max", c.task == "diffreact" ? 1.0 : 2.0);
    c.grid.nx = get_or<std::size_t>(d, "nx", 32);
    c.grid.ny = get_or<std::size_t>(d, "ny", 32);
    c.grid.t_max = c.t_max;
  }
  c.data_seed = get_or<std::uint64_t>(d, "seed", 0);

  json m = j.value("model", json::object());
  check_keys(m, {"hidden", "activation", "batchnorm", "seed"}, "model");
  c.model.input_dim = task_input_dim(c);
  c.model.output_dim = 1;
  c.model.hidden = get_or<std::vector<std::size_t>>(m, "hidden", {40, 40});
  std::string act = get_or<std::string>(m, "activation", "tanh");
  std::string act_lc = act;
  for (char& ch : act_lc) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  bool found = false;
  for (Activation a : {Activation::Tanh, Activation::Relu, Activation::IRelu,
                       Activation::Softplus, Activation::ShiftedSoftplus, Activation::Silu}) {
    std::string name = activation_name(a);
    for (char& ch : name) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (name == act_lc) {
      c.model.activation = a;
      found = true;
    }
  }
  if (!found) fail(kExitConfig, "unknown activation '" + act + "'");
  c.model.use_batchnorm = get_or<bool>(m, "batchnorm", false);
  c.model.seed = get_or<std::uint64_t>(m, "seed", 0);

  json t = j.value("train", json::object());
  check_keys(t, {"epochs", "batch_size", "seed", "lr", "beta1", "beta2", "eps", "eval_every"},
             "train");
  c.train.epochs = get_or<std::size_t>(t, "epochs", 100);
  c.train.batch_size = get_or<std::size_t>(t, "batch_size", 0);
  c.train.seed = get_or<std::uint64_t>(t, "seed", 0);
  c.train.adam.lr = get_or<double>(t, "lr", 1e-3);
  c.train.adam.beta1 = get_or<double>(t, "beta1", 0.9);
  c.train.adam.beta2 = get_or<double>(t, "beta2", 0.999);
  c.train.adam.eps = get_or<double>(t, "eps", 1e-8);
  c.train.eval_every = get_or<std::size_t>(t, "eval_every", 10);
  if (c.train.eval_every == 0) fail(kExitConfig, "train.eval_every must be positive");

  json l = j.value("loss", json::object());
  check_keys(l,
             {"alpha", "beta", "rescale", "rescale_C", "per_residual_norm",
              "corrected_momentum_sign", "corrected_bc"},
             "loss");
  c.weights.alpha = get_or<double>(l, "alpha", 1.0);
  c.weights.beta = get_or<double>(l, "beta", 1.0);
  c.auto_rescale = get_or<bool>(l, "rescale", c.task == "pes");
  c.weights.rescale_C = get_or<double>(l, "rescale_C", 1.0);
  c.flags.per_residual_norm = get_or<bool>(l, "per_residual_norm", false);
  c.flags.corrected_momentum_sign = get_or<bool>(l, "corrected_momentum_sign", false);
  c.flags.corrected_bc = get_or<bool>(l, "corrected_bc", false);

  json s = j.value("sweep", json::object());
  check_keys(s, {"betas"}, "sweep");
  c.betas = get_or<std::vector<double>>(s, "betas", {});
  json a = j.value("ablate", json::object());
  check_keys(a, {"n_seeds"}, "ablate");
  c.n_seeds = get_or<std::size_t>(a, "n_seeds", 5);
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json d;
  d["seed"] = c.data_seed;
  if (c.task == "pes") {
    d["kind"] = pes_kind_name(c.pes.kind);
    d["dim"] = c.pes.dim;
    d["n"] = c.n;
    d["n_eval"] = c.n_eval;
    d["label_scale"] = c.pes.label_scale;
    d["box_lo"] = c.pes.box_lo;
    d["box_hi"] = c.pes.box_hi;
    if (!c.pes.quad_diag.empty()) d["quad_diag"] = c.pes.quad_diag;
    if (c.pes.kind == PESKind::DoubleWell) {
      d["dw_a"] = c.pes.dw_a;
      d["dw_b"] = c.pes.dw_b;
      d["dw_c"] = c.pes.dw_c;
    }
    if (c.pes.kind == PESKind::GaussianMix) {
      d["gm_weights"] = c.pes.gm_weights;
      d["gm_centers"] = c.pes.gm_centers;
      d["gm_widths"] = c.pes.gm_widths;
    }
  } else {
    d["n_f"] = c.n_f;
    d["n_ic"] = c.n_ic;
    d["n_bc"] = c.n_bc;
    d["n_eval"] = c.n_eval;
    if (c.task == "advection") d["length"] = c.length;
    if (c.task != "cfd") d["t_max"] = c.t_max;
    if (c.task == "diffreact") {
      d["nx"] = c.grid.nx;
      d["ny"] = c.grid.ny;
    }
  }
  json out = {
      {"task", c.task},
      {"out", c.out},
      {"data", d},
      {"model",
       {{"hidden", c.model.hidden},
        {"activation", activation_name(c.model.activation)},
        {"batchnorm", c.model.use_batchnorm},
        {"seed", c.model.seed}}},
      {"train",
       {{"epochs", c.train.epochs},
        {"batch_size", c.train.batch_size},
        {"seed", c.train.seed},
        {"lr", c.train.adam.lr},
        {"beta1", c.train.adam.beta1},
        {"beta2", c.train.adam.beta2},
        {"eps", c.train.adam.eps},
        {"eval_every", c.train.eval_every}}},
      {"loss",
       {{"alpha", c.weights.alpha},
        {"beta", c.weights.beta},
        {"rescale", c.auto_rescale},
        {"rescale_C", c.weights.rescale_C},
        {"per_residual_norm", c.flags.per_residual_norm},
        {"corrected_momentum_sign", c.flags.corrected_momentum_sign},
        {"corrected_bc", c.flags.corrected_bc}}},
      {"ablate", {{"n_seeds", c.n_seeds}}},
  };
  if (!c.betas.empty()) out["sweep"] = {{"betas", c.betas}};
  return out;
}

ExperimentConfig load_config(const std::string& path, const std::string& out_override,
                             long long seed_override, bool for_gen) {
  if (path.empty()) fail(kExitConfig, "--config is required");
  std::ifstream in(path);
  if (!in) fail(kExitConfig, "cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(kExitConfig, std::string("config parse error: ") + e.what());
  }
  ExperimentConfig c = parse_config(j);
  if (!out_override.empty()) c.out = out_override;
  if (c.out.empty()) fail(kExitConfig, "no output directory (config 'out' or --out)");
  if (seed_override >= 0) {
    if (for_gen) {
      c.data_seed = static_cast<std::uint64_t>(seed_override);
    } else {
      c.train.seed = static_cast<std::uint64_t>(seed_override);
      c.model.seed = static_cast<std::uint64_t>(seed_override);
    }
  }
  return c;
}

// ---- file helpers ----

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) fail(kExitIo, "cannot create directory " + p.string());
}

void refuse_existing(const std::vector<fs::path>& paths, bool force) {
  if (force) return;
  for (const auto& p : paths)
    if (fs::exists(p)) fail(kExitIo, p.string() + " exists; pass --force to overwrite");
}

void write_text(const fs::path& p, const std::string& text) {
  try {
    write_file(p.string(), text);
  } catch (const IOError& e) {
    fail(kExitIo, e.what());
  }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---- gen ----

// Probe sets with reference labels, stored next to the training points so
// training needs no analytic handle.
void append_advection_eval(PINNPointSets& ps, const AdvectionSolution& sol, std::size_t n_eval,
                           std::uint64_t seed) {
  if (n_eval == 0) return;
  Tensor X({n_eval, 2}), Y({n_eval, 1});
  for (std::size_t i = 0; i < n_eval; ++i) {
    Rng r = Rng::stream(seed ^ 0xE7A1u, i);
    double x = r.uniform(0.0, sol.length);
    double t = r.uniform(0.0, ps.t_max);
    X.at2(i, 0) = x;
    X.at2(i, 1) = t;
    Y.data[i] = sol(x, t);
  }
  ps.labelled.emplace_back("Xeval", std::move(X));
  ps.labelled.emplace_back("Yeval", std::move(Y));
}

void append_diffreact_eval(PINNPointSets& ps, const DiffReactField& f, std::size_t n_eval,
                           std::uint64_t seed) {
  if (n_eval == 0) return;
  Tensor X({n_eval, 3}), Yu({n_eval, 1}), Yv({n_eval, 1});
  const std::size_t nx = f.grid.nx, ny = f.grid.ny;
  for (std::size_t i = 0; i < n_eval; ++i) {
    Rng r = Rng::stream(seed ^ 0xE7A1u, i);
    auto gi = static_cast<std::size_t>(r.uniform_int(0, static_cast<std::int64_t>(nx) - 1));
    auto gj = static_cast<std::size_t>(r.uniform_int(0, static_cast<std::int64_t>(ny) - 1));
    auto gs = static_cast<std::size_t>(r.uniform_int(0, static_cast<std::int64_t>(f.steps)));
    X.at2(i, 0) = f.x_of(gi);
    X.at2(i, 1) = f.y_of(gj);
    X.at2(i, 2) = f.t_of(gs);
    Yu.data[i] = f.u[gs][gj * nx + gi];
    Yv.data[i] = f.v[gs][gj * nx + gi];
  }
  ps.labelled.emplace_back("Xeval", std::move(X));
  ps.labelled.emplace_back("Yeval_u", std::move(Yu));
  ps.labelled.emplace_back("Yeval_v", std::move(Yv));
}

int cmd_gen(const ExperimentConfig& c, bool force) {
  ensure_dir(c.out);
  const fs::path out(c.out);
  json info;
  info["task"] = c.task;
  info["seed"] = c.data_seed;
  if (c.task == "pes") {
    refuse_existing({out / "data.jsonl", out / "eval.jsonl", out / "info.json"}, force);
    PESDataset ds = gen_pes(c.pes, c.n, c.data_seed);
    save_pes((out / "data.jsonl").string(), ds);
    if (c.n_eval > 0) save_pes((out / "eval.jsonl").string(), gen_pes(c.pes, c.n_eval, c.data_seed + 1));
    std::vector<double> labels;
    double emin = ds.samples[0].E, emax = emin, esum = 0.0;
    for (const auto& s : ds.samples) {
      labels.push_back(s.E);
      labels.insert(labels.end(), s.F.begin(), s.F.end());
      emin = std::min(emin, s.E);
      emax = std::max(emax, s.E);
      esum += s.E;
    }
    RescaleInfo ri = rescale_constant(labels);
    info["C"] = ri.C;
    info["max_abs_label"] = ri.max_abs_label;
    info["energy_mean"] = esum / static_cast<double>(ds.samples.size());
    info["energy_min"] = emin;
    info["energy_max"] = emax;
    info["force_variance"] = ds.force_variance();
    std::printf("wrote %zu samples; rescale constant C = %g (max |label| %g)\n",
                ds.samples.size(), ri.C, ri.max_abs_label);
    std::printf("energy mean %g, min %g, max %g; force variance %g\n", esum / c.n, emin, emax,
                ds.force_variance());
  } else {
    refuse_existing({out / "points.json", out / "info.json"}, force);
    PINNPointSets ps;
    if (c.task == "advection") {
      auto [points, sol] = gen_advection(c.consts, c.n_f, c.n_ic, c.n_bc, c.data_seed, c.length,
                                         c.t_max);
      ps = std::move(points);
      append_advection_eval(ps, sol, c.n_eval, c.data_seed);
      info["k1"] = sol.k1;
      info["k2"] = sol.k2;
      info["phi1"] = sol.phi1;
      info["phi2"] = sol.phi2;
    } else if (c.task == "cfd") {
      ps = gen_cfd(c.consts, c.n_f, c.n_ic, c.n_bc, c.data_seed);
    } else {
      auto [points, field] = gen_diffreact(c.consts, c.grid, c.n_f, c.n_ic, c.n_bc, c.data_seed);
      ps = std::move(points);
      append_diffreact_eval(ps, field, c.n_eval, c.data_seed);
      info["dt"] = field.dt;
      info["steps"] = field.steps;
    }
    save_pointsets((out / "points.json").string(), ps);
    std::printf("wrote %zu collocation, %zu labelled sets\n", ps.Xf.shape[0], ps.labelled.size());
  }
  write_text(out / "info.json", dump(info));
  return 0;
}

// ---- train ----

struct RunOutput {
  TrainResult result;
  double used_C = 1.0;
};

Bindings pinn_bindings(const PINNPointSets& ps) {
  Bindings b;
  b["Xf"] = ps.Xf;
  for (const auto& [name, t] : ps.labelled)
    if (name.rfind("Xeval", 0) != 0 && name.rfind("Yeval", 0) != 0) b[name] = t;
  return b;
}

RunOutput run_training(const ExperimentConfig& c) {
  RunOutput ro;
  if (c.task == "pes") {
    PESDataset ds;
    try {
      ds = load_pes((fs::path(c.out) / "data.jsonl").string());
    } catch (const IOError& e) {
      fail(kExitConfig, std::string("dataset missing or unreadable: ") + e.what());
    }
    PESTrainSpec spec;
    spec.model = c.model;
    spec.weights = c.weights;
    spec.auto_rescale = c.auto_rescale;
    spec.train = c.train;
    // Resolve C up front so evaluation sees the training scale.
    if (spec.auto_rescale) {
      std::vector<double> labels;
      for (const auto& s : ds.samples) {
        labels.push_back(s.E);
        labels.insert(labels.end(), s.F.begin(), s.F.end());
      }
      spec.weights.rescale_C = rescale_constant(labels).C;
      spec.auto_rescale = false;
    }
    ro.used_C = spec.weights.rescale_C;
    EvalSpec ev;
    fs::path evalp = fs::path(c.out) / "eval.jsonl";
    if (fs::exists(evalp)) ev = pes_eval(c.model, load_pes(evalp.string()), ro.used_C);
    ro.result = train_pes(spec, ds, ev);
    return ro;
  }

  PINNPointSets ps;
  try {
    ps = load_pointsets((fs::path(c.out) / "points.json").string());
  } catch (const IOError& e) {
    fail(kExitConfig, std::string("point sets missing or unreadable: ") + e.what());
  }
  const std::size_t n_f = ps.Xf.shape[0];
  Bindings data = pinn_bindings(ps);
  LossTerms lt;
  Heads heads;
  EvalSpec ev;
  if (c.task == "advection") {
    lt = advection_loss(c.model, n_f, ps.get("Xic").shape[0], ps.get("Xbc").shape[0], c.consts);
    heads.emplace_back("", build_mlp(c.model));
    for (const auto& [name, t] : ps.labelled)
      if (name == "Xeval") ev = field_eval(c.model, "", ps.get("Xeval"), ps.get("Yeval"));
  } else if (c.task == "cfd") {
    lt = cfd_loss(c.model, n_f, ps.get("Xic_p").shape[0], ps.get("Xbc_p").shape[0], c.consts,
                  c.flags);
    int off = 0;
    for (const char* pre : {"rho_", "v_", "p_"}) {
      MLPConfig hc = c.model;
      hc.seed = c.model.seed + static_cast<std::uint64_t>(off++);
      heads.emplace_back(pre, build_mlp(hc));
    }
  } else {
    lt = diffreact_loss(c.model, n_f, ps.get("Xic_u").shape[0], ps.get("Xbc_d").shape[0],
                        c.consts, c.flags);
    int off = 0;
    for (const char* pre : {"u_", "v_"}) {
      MLPConfig hc = c.model;
      hc.seed = c.model.seed + static_cast<std::uint64_t>(off++);
      heads.emplace_back(pre, build_mlp(hc));
    }
    for (const auto& [name, t] : ps.labelled)
      if (name == "Xeval") {
        MLPConfig uc = c.model, vc = c.model;
        vc.seed = c.model.seed + 1;
        ev = joint_eval({field_eval(uc, "u_", ps.get("Xeval"), ps.get("Yeval_u")),
                         field_eval(vc, "v_", ps.get("Xeval"), ps.get("Yeval_v"))});
      }
  }
  ro.result = train_full(lt, std::move(heads), data, ev, c.train);
  return ro;
}

json summary_json(const ExperimentConfig& c, const RunOutput& ro) {
  const TrainResult& r = ro.result;
  json s;
  s["task"] = c.task;
  s["seed"] = c.train.seed;
  s["label"] = c.task + "/" + activation_name(c.model.activation) +
               (c.model.use_batchnorm ? "+bn" : "") + (c.auto_rescale ? "+rescale" : "");
  s["C"] = ro.used_C;
  s["epochs_run"] = r.history.size();
  s["diverged"] = r.diverged;
  if (r.diverged) {
    s["diverged_epoch"] = r.diverged_epoch;
    s["diverged_detail"] = r.diverged_detail;
  }
  json results;
  for (const auto& t : r.term_names) {
    double v = r.history.empty() ? std::numeric_limits<double>::quiet_NaN() : r.final_term(t);
    if (std::isnan(v)) results[t] = "NaN";
    else results[t] = v;
  }
  for (const auto& e : r.eval_names) {
    double v = r.history.empty() ? std::numeric_limits<double>::quiet_NaN() : r.final_metric(e);
    if (std::isnan(v)) results[e] = "NaN";
    else results[e] = v;
  }
  // Flatten the result keys to the top level as well: tables index
  // summaries by these names directly.
  for (const auto& [k, v] : results.items()) s[k] = v;
  s["results"] = results;
  s["config"] = config_to_json(c);
  return s;
}

int cmd_train(const ExperimentConfig& c, bool force) {
  ensure_dir(c.out);
  const fs::path out(c.out);
  refuse_existing({out / "history.csv", out / "checkpoint.json", out / "summary.json"}, force);
  RunOutput ro = run_training(c);
  write_text(out / "history.csv", history_csv(ro.result));
  json ckpt;
  for (const auto& [prefix, model] : ro.result.heads)
    ckpt[prefix.empty() ? "model" : prefix] = json::parse(mlp_to_json(model));
  write_text(out / "checkpoint.json", dump(ckpt));
  write_text(out / "summary.json", dump(summary_json(c, ro)));
  if (ro.result.diverged) {
    std::fprintf(stderr, "diverged at epoch %zu: %s\n", ro.result.diverged_epoch,
                 ro.result.diverged_detail.c_str());
    return kExitDiverged;
  }
  std::printf("trained %zu epochs; summary written to %s\n", ro.result.history.size(),
              (out / "summary.json").string().c_str());
  return 0;
}

// ---- sweep ----

int cmd_sweep(const ExperimentConfig& c, bool force) {
  if (c.task != "pes") fail(kExitConfig, "sweep requires task = pes");
  ensure_dir(c.out);
  const fs::path out(c.out);
  refuse_existing({out / "sweep.csv", out / "sweep.txt"}, force);
  PESDataset ds;
  try {
    ds = load_pes((out / "data.jsonl").string());
  } catch (const IOError& e) {
    fail(kExitConfig, std::string("dataset missing or unreadable: ") + e.what());
  }
  PESTrainSpec base;
  base.model = c.model;
  base.weights = c.weights;
  base.auto_rescale = c.auto_rescale;
  base.train = c.train;
  std::vector<SweepRow> rows = beta_sweep(base, ds, EvalSpec{}, c.betas);

  std::string csv = "beta,pred,force,diverged\n";
  std::string txt = "beta       final pred     final force\n";
  char line[160];
  for (const auto& row : rows) {
    json cells = {row.beta, row.pred, row.force};  // shortest round-trip formatting
    csv += cells[0].dump() + "," + (row.diverged ? "NaN" : cells[1].dump()) + "," +
           (row.diverged ? "NaN" : cells[2].dump()) + "," + (row.diverged ? "1" : "0") + "\n";
    std::snprintf(line, sizeof(line), "%-10g %-14.6g %-14.6g%s\n", row.beta, row.pred, row.force,
                  row.diverged ? "  (diverged)" : "");
    txt += line;
  }
  write_text(out / "sweep.csv", csv);
  write_text(out / "sweep.txt", txt);
  std::printf("%s", txt.c_str());
  return 0;
}

// ---- ablate ----

std::vector<AblationVariant> default_variants(const ExperimentConfig& c) {
  if (c.task == "pes") {
    // Appendix-style PES set: original recipe, then each fix, then both.
    std::string base = activation_name(c.model.activation);
    return {
        {base + "+bn", c.model.activation, true, false},
        {"irelu+bn", Activation::IRelu, true, false},
        {base + "+rescale", c.model.activation, false, true},
        {"irelu+rescale", Activation::IRelu, false, true},
    };
  }
  // PINN set mirrors the four-row comparison tables.
  return {
      {"tanh+bn", Activation::Tanh, true, false},
      {"irelu+bn", Activation::IRelu, true, false},
      {"tanh", Activation::Tanh, false, false},
      {"irelu", Activation::IRelu, false, false},
  };
}

int cmd_ablate(const ExperimentConfig& c, bool force) {
  if (c.n_seeds == 0) fail(kExitConfig, "ablate.n_seeds must be positive");
  ensure_dir(c.out);
  const fs::path out(c.out);
  refuse_existing({out / "ablation.csv", out / "ablation.txt"}, force);

  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < c.n_seeds; ++i) seeds.push_back(c.train.seed + i);
  auto run = [&](const AblationVariant& v, std::uint64_t seed) {
    ExperimentConfig vc = c;
    vc.model.activation = v.activation;
    vc.model.use_batchnorm = v.batchnorm;
    vc.auto_rescale = c.task == "pes" ? v.rescale : false;
    vc.model.seed = seed;
    vc.train.seed = seed;
    return run_training(vc).result;
  };
  std::vector<std::string> metric_names;
  std::vector<AblationRow> rows = ablate(default_variants(c), seeds, run, &metric_names);

  std::string csv = "variant";
  for (const auto& m : metric_names) csv += "," + m + "_median," + m + "_min," + m + "_max";
  csv += ",n_diverged\n";
  std::string txt;
  for (const auto& row : rows) {
    csv += row.variant;
    std::string t = row.variant;
    t.resize(18, ' ');
    for (std::size_t i = 0; i < metric_names.size(); ++i) {
      for (double v : {row.median[i], row.lo[i], row.hi[i]})
        csv += "," + (std::isnan(v) ? std::string("NaN") : json(v).dump());
      char cell[64];
      if (std::isnan(row.median[i]))
        std::snprintf(cell, sizeof(cell), " %s=NaN", metric_names[i].c_str());
      else
        std::snprintf(cell, sizeof(cell), " %s=%.4g", metric_names[i].c_str(), row.median[i]);
      t += cell;
    }
    csv += "," + std::to_string(row.n_diverged) + "\n";
    t += " diverged=" + std::to_string(row.n_diverged) + "\n";
    txt += t;
  }
  write_text(out / "ablation.csv", csv);
  write_text(out / "ablation.txt", txt);
  std::printf("%s", txt.c_str());
  return 0;
}

// ---- report ----

int cmd_report(const std::vector<std::string>& dirs, const std::string& out_dir) {
  struct Group {
    std::vector<json> finished;
    std::size_t n_diverged = 0;
  };
  std::map<std::string, Group> groups;
  std::set<std::string> metric_keys;
  for (const auto& dir : dirs) {
    fs::path p = fs::path(dir) / "summary.json";
    if (!fs::exists(p)) continue;
    json s;
    try {
      s = json::parse(read_file(p.string()));
    } catch (const std::exception&) {
      continue;
    }
    std::string label = s.value("label", dir);
    if (s.value("diverged", false)) {
      groups[label].n_diverged += 1;
      continue;
    }
    json results = s.value("results", json::object());
    for (const auto& [k, v] : results.items())
      if (v.is_number()) metric_keys.insert(k);
    groups[label].finished.push_back(s);
  }
  if (groups.empty()) fail(kExitConfig, "no valid summaries among the given run directories");

  std::vector<std::string> cols(metric_keys.begin(), metric_keys.end());
  // Median per group and column; track the best (smallest) cell per column.
  std::map<std::string, std::vector<double>> med;
  for (const auto& [label, g] : groups) {
    std::vector<double>& m = med[label];
    for (const auto& col : cols) {
      std::vector<double> vals;
      for (const auto& s : g.finished)
        if (s["results"].contains(col) && s["results"][col].is_number())
          vals.push_back(s["results"][col].get<double>());
      if (vals.empty()) {
        m.push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      std::sort(vals.begin(), vals.end());
      std::size_t k = vals.size();
      m.push_back(k % 2 == 1 ? vals[k / 2] : 0.5 * (vals[k / 2 - 1] + vals[k / 2]));
    }
  }
  std::vector<double> best(cols.size(), std::numeric_limits<double>::infinity());
  for (const auto& [label, m] : med)
    for (std::size_t i = 0; i < cols.size(); ++i)
      if (!std::isnan(m[i])) best[i] = std::min(best[i], m[i]);

  std::string csv = "label";
  for (const auto& cname : cols) csv += "," + cname + "_median";
  csv += ",n_runs,n_diverged\n";
  std::string md = "| label |";
  for (const auto& cname : cols) md += " " + cname + " |";
  md += " n_runs | n_diverged |\n|---|";
  for (std::size_t i = 0; i < cols.size() + 2; ++i) md += "---|";
  md += "\n";
  for (const auto& [label, g] : groups) {
    csv += label;
    md += "| " + label + " |";
    const auto& m = med[label];
    for (std::size_t i = 0; i < cols.size(); ++i) {
      std::string cell = std::isnan(m[i]) ? std::string("NaN") : json(m[i]).dump();
      csv += "," + cell;
      // The best cell per column is starred, standing in for boldface.
      md += " " + cell + (!std::isnan(m[i]) && m[i] == best[i] ? "*" : "") + " |";
    }
    csv += "," + std::to_string(g.finished.size()) + "," + std::to_string(g.n_diverged) + "\n";
    md += " " + std::to_string(g.finished.size()) + " | " + std::to_string(g.n_diverged) + " |\n";
  }
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    write_text(fs::path(out_dir) / "report.csv", csv);
    write_text(fs::path(out_dir) / "report.md", md);
  }
  std::printf("%s", md.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"derivative-constrained training experiments"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir;
  long long seed_override = -1;
  int jobs = 1;
  bool force = false;
  app.add_option("--config", config_path, "JSON experiment config")->envname("DCTRAIN_CONFIG");
  app.add_option("--out", out_dir, "output directory (overrides config)");
  app.add_option("--seed", seed_override, "seed override");
  app.add_option("--jobs", jobs, "job-parallelism cap for sweep/ablate (runs are independent)");
  app.add_flag("--force", force, "overwrite existing outputs");

  auto* gen = app.add_subcommand("gen", "generate datasets");
  auto* train = app.add_subcommand("train", "train one model");
  auto* sweep = app.add_subcommand("sweep", "beta sweep on a PES dataset");
  auto* ablate_cmd = app.add_subcommand("ablate", "activation/normalization/rescale ablation");
  auto* report = app.add_subcommand("report", "aggregate run summaries");
  std::vector<std::string> run_dirs;
  report->add_option("dirs", run_dirs, "run directories containing summary.json");

  CLI11_PARSE(app, argc, argv);
  try {
    if (report->parsed()) {
      if (run_dirs.empty()) fail(kExitConfig, "report needs at least one run directory");
      return cmd_report(run_dirs, out_dir);
    }
    ExperimentConfig c = load_config(config_path, out_dir, seed_override, gen->parsed());
    if (gen->parsed()) return cmd_gen(c, force);
    if (train->parsed()) return cmd_train(c, force);
    if (sweep->parsed()) return cmd_sweep(c, force);
    if (ablate_cmd->parsed()) return cmd_ablate(c, force);
  } catch (const CliExit& e) {
    std::fprintf(stderr, "error: %s\n", e.msg.c_str());
    return e.code;
  } catch (const IOError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
  return 0;
}
