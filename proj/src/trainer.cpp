#include "dctrain/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>

#include "dctrain/grad.hpp"
#include "dctrain/rng.hpp"

namespace dctrain {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void validate(const AdamConfig& cfg) {
  if (!(cfg.lr > 0.0)) throw TrainError("adam: lr must be positive");
  if (cfg.beta1 < 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 < 0.0 || cfg.beta2 >= 1.0)
    throw TrainError("adam: betas must lie in [0, 1)");
}

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

// Shortest round-trip decimal form, shared with the JSON writers so CSVs
// are bit-reproducible.
std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

struct ParamSet {
  std::vector<std::string> names;
  std::vector<Tensor*> params;       // into the bindings map
  std::vector<std::string> grad_outputs;
};

ParamSet bind_heads(const Heads& heads, Bindings& bind) {
  ParamSet ps;
  for (const auto& [prefix, model] : heads) {
    mlp_bind(model, bind, prefix);
    for (auto& n : mlp_param_names(model.config, prefix)) ps.names.push_back(std::move(n));
  }
  for (const auto& n : ps.names) {
    ps.params.push_back(&bind.at(n));
    ps.grad_outputs.push_back("dtotal/d" + n);
  }
  return ps;
}

// Running-statistics update from the batch statistics the training-mode
// graph exposes, for every norm block of every head.
void update_running_stats(Heads& heads, const std::map<std::string, Tensor>& out) {
  for (auto& [prefix, model] : heads) {
    if (!model.config.use_batchnorm) continue;
    for (std::size_t l = 0; l < model.bn.size(); ++l) {
      std::string bp = prefix + "bn" + std::to_string(l);
      const Tensor& mean = out.at(bp + "_batch_mean");
      const Tensor& var = out.at(bp + "_batch_var");
      BatchNormBlock& b = model.bn[l];
      for (std::size_t i = 0; i < mean.data.size(); ++i) {
        b.running_mean.data[i] =
            (1.0 - b.momentum) * b.running_mean.data[i] + b.momentum * mean.data[i];
        b.running_var.data[i] =
            (1.0 - b.momentum) * b.running_var.data[i] + b.momentum * var.data[i];
      }
    }
  }
}

std::vector<std::string> batch_stat_outputs(const Heads& heads) {
  std::vector<std::string> v;
  for (const auto& [prefix, model] : heads) {
    if (!model.config.use_batchnorm) continue;
    for (std::size_t l = 0; l < model.config.hidden.size(); ++l) {
      std::string bp = prefix + "bn" + std::to_string(l);
      v.push_back(bp + "_batch_mean");
      v.push_back(bp + "_batch_var");
    }
  }
  return v;
}

}  // namespace

AdamState adam_init(const std::vector<Tensor*>& params) {
  AdamState s;
  for (const Tensor* p : params) {
    s.m.push_back(Tensor(p->shape));
    s.v.push_back(Tensor(p->shape));
  }
  return s;
}

void adam_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
               AdamState& state, const AdamConfig& cfg) {
  validate(cfg);
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw TrainError("adam_step: mismatched parameter/gradient/state counts");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    const Tensor& g = *grads[k];
    if (g.shape != p.shape) throw TrainError("adam_step: gradient shape mismatch");
    Tensor& m = state.m[k];
    Tensor& v = state.v[k];
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * g.data[i];
      v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * g.data[i] * g.data[i];
      double mhat = m.data[i] / bc1;
      double vhat = v.data[i] / bc2;
      p.data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

const MLP& TrainResult::head(const std::string& prefix) const {
  for (const auto& [p, m] : heads)
    if (p == prefix) return m;
  throw TrainError("no head with prefix '" + prefix + "'");
}

namespace {

double final_by_name(const std::vector<std::string>& names,
                     const std::vector<MetricsRecord>& history, const std::string& name,
                     bool eval_side) {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw TrainError("no recorded quantity named '" + name + "'");
  std::size_t col = static_cast<std::size_t>(it - names.begin());
  for (auto r = history.rbegin(); r != history.rend(); ++r) {
    double v = eval_side ? r->eval_metrics[col] : r->terms[col];
    if (!eval_side || !std::isnan(v)) return v;
  }
  return kNaN;
}

}  // namespace

double TrainResult::final_term(const std::string& name) const {
  return final_by_name(term_names, history, name, false);
}
double TrainResult::final_metric(const std::string& name) const {
  return final_by_name(eval_names, history, name, true);
}

TrainResult train_full(const LossTerms& lt, Heads heads, const Bindings& data,
                       const EvalSpec& eval_spec, const TrainConfig& cfg) {
  validate(cfg.adam);
  TrainResult res;
  res.term_names = lt.term_names;
  res.eval_names = eval_spec.names;

  Bindings bind = data;
  ParamSet ps = bind_heads(heads, bind);
  AdamState state = adam_init(ps.params);

  Graph gg = grad(lt.graph, "total", ps.names);
  std::vector<std::string> wanted = lt.term_names;
  wanted.push_back("total");
  for (const auto& n : ps.grad_outputs) wanted.push_back(n);
  for (auto& n : batch_stat_outputs(heads)) wanted.push_back(std::move(n));
  Evaluator ev(gg, wanted);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double t0 = now_seconds();
    std::map<std::string, Tensor> out;
    try {
      out = ev.run(bind);
    } catch (const NonFiniteError& e) {
      res.diverged = true;
      res.diverged_epoch = epoch;
      res.diverged_detail = e.what();
      break;
    }
    std::vector<const Tensor*> grads;
    for (const auto& n : ps.grad_outputs) grads.push_back(&out.at(n));
    adam_step(ps.params, grads, state, cfg.adam);
    update_running_stats(heads, out);

    MetricsRecord rec;
    rec.epoch = epoch;
    for (const auto& t : lt.term_names) rec.terms.push_back(out.at(t).data[0]);
    rec.eval_metrics.assign(res.eval_names.size(), kNaN);
    if (eval_spec.fn && (epoch % cfg.eval_every == 0 || epoch == cfg.epochs)) {
      for (auto& [prefix, model] : heads) mlp_unbind(model, bind, prefix);
      rec.eval_metrics = eval_spec.fn(heads);
    }
    rec.seconds = now_seconds() - t0;
    res.history.push_back(std::move(rec));
  }
  for (auto& [prefix, model] : heads) mlp_unbind(model, bind, prefix);
  res.heads = std::move(heads);
  return res;
}

TrainResult train_pes(const PESTrainSpec& spec, const PESDataset& ds, const EvalSpec& eval_spec,
                      double* used_C) {
  validate(spec.train.adam);
  const std::size_t n = ds.samples.size(), d = ds.dim();
  if (n == 0) throw TrainError("train_pes: empty dataset");

  DCWeights w = spec.weights;
  if (spec.auto_rescale) {
    std::vector<double> labels;
    for (const auto& s : ds.samples) {
      labels.push_back(s.E);
      labels.insert(labels.end(), s.F.begin(), s.F.end());
    }
    w.rescale_C = rescale_constant(labels).C;
  }
  if (used_C) *used_C = w.rescale_C;

  const std::size_t bs = spec.train.batch_size == 0 ? n : std::min(spec.train.batch_size, n);
  const std::size_t rem = n % bs;

  Heads heads{{"", build_mlp(spec.model)}};
  Bindings bind;
  bind["X"] = Tensor({bs, d});
  bind["E"] = Tensor({bs, 1});
  bind["F"] = Tensor({bs, d});
  ParamSet ps = bind_heads(heads, bind);
  AdamState state = adam_init(ps.params);

  struct BatchGraph {
    Graph gg;
    std::vector<std::string> wanted;
  };
  auto make_bg = [&](std::size_t nb) {
    LossTerms lt = energy_force_loss(spec.model, nb, d, w);
    BatchGraph bg{grad(lt.graph, "total", ps.names), lt.term_names};
    bg.wanted.push_back("total");
    for (const auto& o : ps.grad_outputs) bg.wanted.push_back(o);
    for (auto& o : batch_stat_outputs(heads)) bg.wanted.push_back(std::move(o));
    return bg;
  };
  BatchGraph main_bg = make_bg(bs);
  Evaluator main_ev(main_bg.gg, main_bg.wanted);
  std::unique_ptr<BatchGraph> rem_bg;
  std::unique_ptr<Evaluator> rem_ev;
  if (rem != 0) {
    rem_bg = std::make_unique<BatchGraph>(make_bg(rem));
    rem_ev = std::make_unique<Evaluator>(rem_bg->gg, rem_bg->wanted);
  }

  TrainResult res;
  res.term_names = {"pred", "force"};
  res.eval_names = eval_spec.names;

  Tensor X = ds.X(), E = ds.E(), F = ds.F();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= spec.train.epochs; ++epoch) {
    double t0 = now_seconds();
    Rng shuffle_rng = Rng::stream(spec.train.seed, epoch);
    for (std::size_t i = n - 1; i > 0; --i)
      std::swap(order[i],
                order[static_cast<std::size_t>(shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i)))]);

    double pred_sum = 0.0, force_sum = 0.0;
    bool aborted = false;
    for (std::size_t start = 0; start < n && !aborted; start += bs) {
      const std::size_t nb = std::min(bs, n - start);
      bind["X"] = Tensor({nb, d});
      bind["E"] = Tensor({nb, 1});
      bind["F"] = Tensor({nb, d});
      for (std::size_t i = 0; i < nb; ++i) {
        std::size_t src = order[start + i];
        for (std::size_t j = 0; j < d; ++j) {
          bind["X"].at2(i, j) = X.at2(src, j);
          bind["F"].at2(i, j) = F.at2(src, j);
        }
        bind["E"].data[i] = E.data[src];
      }
      Evaluator& ev = nb == bs ? main_ev : *rem_ev;
      std::map<std::string, Tensor> out;
      try {
        out = ev.run(bind);
      } catch (const NonFiniteError& e) {
        res.diverged = true;
        res.diverged_epoch = epoch;
        res.diverged_detail = e.what();
        aborted = true;
        break;
      }
      std::vector<const Tensor*> grads;
      for (const auto& o : ps.grad_outputs) grads.push_back(&out.at(o));
      adam_step(ps.params, grads, state, spec.train.adam);
      update_running_stats(heads, out);
      pred_sum += out.at("pred").data[0];
      force_sum += out.at("force").data[0];
    }
    if (aborted) break;

    MetricsRecord rec;
    rec.epoch = epoch;
    rec.terms = {pred_sum / static_cast<double>(n), force_sum / static_cast<double>(n)};
    rec.eval_metrics.assign(res.eval_names.size(), kNaN);
    if (eval_spec.fn && (epoch % spec.train.eval_every == 0 || epoch == spec.train.epochs)) {
      for (auto& [prefix, model] : heads) mlp_unbind(model, bind, prefix);
      rec.eval_metrics = eval_spec.fn(heads);
    }
    rec.seconds = now_seconds() - t0;
    res.history.push_back(std::move(rec));
  }
  for (auto& [prefix, model] : heads) mlp_unbind(model, bind, prefix);
  res.heads = std::move(heads);
  return res;
}

EvalSpec pes_eval(const MLPConfig& model, const PESDataset& eval_ds, double rescale_C) {
  const std::size_t n = eval_ds.samples.size(), d = eval_ds.dim();
  // Eval-mode graph: energy head plus its exact negative input-gradient.
  Graph g;
  NodeId x = g.var("X", {n, d});
  NodeId e = mlp_forward(g, model, x, "", /*training=*/false);
  g.mark_output("energy", e);
  g.mark_output("_sum", g.sum_all(e));
  auto shared = std::make_shared<Graph>(grad(g, "_sum", {"X"}));
  shared->mark_output("force_pred", shared->neg(shared->output("d_sum/dX")));

  Tensor X = eval_ds.X(), E = eval_ds.E(), F = eval_ds.F();
  const double inv_c = 1.0 / rescale_C;
  EvalSpec spec;
  spec.names = {"energy_MSE", "energy_MAE", "force_MSE", "force_MAE"};
  spec.fn = [=](const Heads& heads) {
    Bindings b;
    b["X"] = X;
    mlp_bind(heads.front().second, b, heads.front().first, /*training=*/false);
    Evaluator ev(*shared, {"energy", "force_pred"});
    auto out = ev.run(b);
    double emse = 0, emae = 0, fmse = 0, fmae = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double r = out["energy"].data[i] - E.data[i] * inv_c;
      emse += r * r;
      emae += std::fabs(r);
      for (std::size_t j = 0; j < d; ++j) {
        double rf = out["force_pred"].at2(i, j) - F.at2(i, j) * inv_c;
        fmse += rf * rf;
        fmae += std::fabs(rf);
      }
    }
    double nn = static_cast<double>(n), nd = static_cast<double>(n * d);
    return std::vector<double>{emse / nn, emae / nn, fmse / nd, fmae / nd};
  };
  return spec;
}

EvalSpec field_eval(const MLPConfig& model, const std::string& prefix, Tensor X, Tensor Y) {
  const std::size_t n = X.shape[0];
  auto g = std::make_shared<Graph>();
  NodeId x = g->var("X", {n, X.shape[1]});
  g->mark_output("y", mlp_forward(*g, model, x, prefix, /*training=*/false));
  EvalSpec spec;
  spec.names = {prefix + "MSE", prefix + "MAE"};
  spec.fn = [=, X = std::move(X), Y = std::move(Y)](const Heads& heads) {
    Bindings b;
    b["X"] = X;
    for (const auto& [p, m] : heads)
      if (p == prefix) mlp_bind(m, b, p, /*training=*/false);
    Evaluator ev(*g, {"y"});
    Tensor pred = ev.run(b).at("y");
    double mse = 0, mae = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double r = pred.data[i] - Y.data[i];
      mse += r * r;
      mae += std::fabs(r);
    }
    double nn = static_cast<double>(n);
    return std::vector<double>{mse / nn, mae / nn};
  };
  return spec;
}

EvalSpec joint_eval(std::vector<EvalSpec> parts) {
  EvalSpec spec;
  for (const auto& p : parts)
    spec.names.insert(spec.names.end(), p.names.begin(), p.names.end());
  spec.fn = [parts = std::move(parts)](const Heads& heads) {
    std::vector<double> out;
    for (const auto& p : parts) {
      auto v = p.fn(heads);
      out.insert(out.end(), v.begin(), v.end());
    }
    return out;
  };
  return spec;
}

std::vector<double> default_sweep_betas() { return {0.01, 0.1, 1.0, 10.0, 30.0, 50.0, 100.0, 200.0}; }

std::vector<SweepRow> beta_sweep(const PESTrainSpec& base, const PESDataset& ds,
                                 const EvalSpec& eval_spec, std::vector<double> betas) {
  if (betas.empty()) betas = default_sweep_betas();
  std::vector<SweepRow> rows;
  for (double beta : betas) {
    PESTrainSpec spec = base;
    spec.weights.alpha = 1.0;
    spec.weights.beta = beta;
    TrainResult r = train_pes(spec, ds, eval_spec);
    SweepRow row;
    row.beta = beta;
    row.diverged = r.diverged;
    row.pred = r.diverged ? kNaN : r.final_term("pred");
    row.force = r.diverged ? kNaN : r.final_term("force");
    rows.push_back(row);
  }
  return rows;
}

std::vector<AblationRow> ablate(
    const std::vector<AblationVariant>& variants, const std::vector<std::uint64_t>& seeds,
    const std::function<TrainResult(const AblationVariant&, std::uint64_t)>& run,
    std::vector<std::string>* metric_names) {
  if (variants.empty() || seeds.empty()) throw TrainError("ablate: need >= 1 variant and seed");
  std::vector<AblationRow> rows;
  for (const auto& variant : variants) {
    std::vector<std::vector<double>> finished;  // per finished seed: metrics
    AblationRow row;
    row.variant = variant.name;
    std::size_t n_metrics = 0;
    for (std::uint64_t seed : seeds) {
      TrainResult r = run(variant, seed);
      std::vector<std::string> names = r.eval_names;
      names.insert(names.end(), r.term_names.begin(), r.term_names.end());
      n_metrics = names.size();
      if (metric_names && metric_names->empty()) *metric_names = names;
      if (r.diverged) {
        row.n_diverged += 1;
        continue;
      }
      std::vector<double> m;
      for (const auto& e : r.eval_names) m.push_back(r.final_metric(e));
      for (const auto& t : r.term_names) m.push_back(r.final_term(t));
      finished.push_back(std::move(m));
    }
    row.median.assign(n_metrics, kNaN);
    row.lo.assign(n_metrics, kNaN);
    row.hi.assign(n_metrics, kNaN);
    for (std::size_t c = 0; c < n_metrics && !finished.empty(); ++c) {
      std::vector<double> col;
      for (const auto& m : finished) col.push_back(m[c]);
      std::sort(col.begin(), col.end());
      std::size_t k = col.size();
      row.median[c] = k % 2 == 1 ? col[k / 2] : 0.5 * (col[k / 2 - 1] + col[k / 2]);
      row.lo[c] = col.front();
      row.hi[c] = col.back();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string history_csv(const TrainResult& r) {
  std::string s = "epoch";
  for (const auto& t : r.term_names) s += "," + t;
  for (const auto& e : r.eval_names) s += "," + e;
  s += ",seconds\n";
  for (const auto& rec : r.history) {
    s += std::to_string(rec.epoch);
    for (double v : rec.terms) s += "," + fmt(v);
    for (double v : rec.eval_metrics) s += "," + fmt(v);
    s += "," + fmt(rec.seconds) + "\n";
  }
  return s;
}

}  // namespace dctrain
