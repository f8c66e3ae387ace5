#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dctrain/datagen.hpp"
#include "dctrain/dcloss.hpp"
#include "dctrain/eval.hpp"
#include "dctrain/mlp.hpp"

namespace dctrain {

struct TrainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- optimizer ----

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9, beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Tensor> m, v;  // first/second moment, aligned with the params
  std::uint64_t t = 0;
};

AdamState adam_init(const std::vector<Tensor*>& params);

// Standard bias-corrected Adam update, in place.
void adam_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
               AdamState& state, const AdamConfig& cfg);

// ---- training ----

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 0;  // 0 = full batch (PINN losses are always full batch)
  std::uint64_t seed = 0;
  AdamConfig adam;
  std::size_t eval_every = 10;  // also evaluates on the final epoch
};

struct MetricsRecord {
  std::size_t epoch = 0;
  std::vector<double> terms;         // order: TrainResult::term_names
  std::vector<double> eval_metrics;  // NaN on epochs without evaluation
  double seconds = 0.0;              // wall clock for this epoch
};

// Jointly trained MLP heads keyed by their parameter-name prefix
// ("" for a single head).
using Heads = std::vector<std::pair<std::string, MLP>>;

// Periodic evaluation: names label the metric columns, fn maps the current
// heads to one value per name. Must not touch the training RNG.
struct EvalSpec {
  std::vector<std::string> names;
  std::function<std::vector<double>(const Heads&)> fn;
};

struct TrainResult {
  Heads heads;
  std::vector<std::string> term_names;
  std::vector<std::string> eval_names;
  std::vector<MetricsRecord> history;
  bool diverged = false;
  std::size_t diverged_epoch = 0;
  std::string diverged_detail;

  const MLP& head(const std::string& prefix) const;
  // Final recorded value of a term / eval metric.
  double final_term(const std::string& name) const;
  double final_metric(const std::string& name) const;
};

// Full-batch Adam training of a loss graph. `data` binds the loss's data
// Vars; head parameters are bound internally. A non-finite loss aborts the
// run and is recorded on the result, not thrown.
TrainResult train_full(const LossTerms& lt, Heads heads, const Bindings& data,
                       const EvalSpec& eval, const TrainConfig& cfg);

// ---- energy/force training on a PES dataset ----

struct PESTrainSpec {
  MLPConfig model;
  DCWeights weights;     // rescale_C as given; see auto_rescale
  bool auto_rescale = false;  // replace rescale_C with rescale_constant(E)
  TrainConfig train;
};

// Mini-batch training with per-epoch shuffling; recorded terms are
// per-sample means. Returns the rescale constant actually used via spec-out.
TrainResult train_pes(const PESTrainSpec& spec, const PESDataset& ds, const EvalSpec& eval,
                      double* used_C = nullptr);

// Evaluation on a held-out PES set: energy/force MSE and MAE per sample of
// the rescaled labels (divide by C as in training).
EvalSpec pes_eval(const MLPConfig& model, const PESDataset& eval_ds, double rescale_C);

// Evaluation of one head against reference values: {mse, mae} prefixed
// with the head name.
EvalSpec field_eval(const MLPConfig& model, const std::string& prefix, Tensor X, Tensor Y);
EvalSpec joint_eval(std::vector<EvalSpec> parts);

// ---- protocols ----

struct SweepRow {
  double beta = 0.0;
  double pred = 0.0, force = 0.0;  // final per-sample means
  bool diverged = false;
};

// One run per beta with alpha pinned at 1; default betas follow the
// sweep protocol {0.01, 0.1, 1, 10, 30, 50, 100, 200}.
std::vector<double> default_sweep_betas();
std::vector<SweepRow> beta_sweep(const PESTrainSpec& base, const PESDataset& ds,
                                 const EvalSpec& eval, std::vector<double> betas = {});

struct AblationVariant {
  std::string name;
  Activation activation = Activation::Tanh;
  bool batchnorm = false;
  bool rescale = false;
};

struct AblationRow {
  std::string variant;
  std::vector<double> median, lo, hi;  // per metric, over finished seeds
  std::size_t n_diverged = 0;
};

// Trains every (variant, seed) pair through `run`; metrics are the final
// eval metrics followed by the final terms. Diverged runs are counted, not
// dropped; an all-diverged variant carries NaN cells.
std::vector<AblationRow> ablate(
    const std::vector<AblationVariant>& variants, const std::vector<std::uint64_t>& seeds,
    const std::function<TrainResult(const AblationVariant&, std::uint64_t)>& run,
    std::vector<std::string>* metric_names = nullptr);

// ---- persistence ----

// One row per epoch: epoch, terms, eval metrics, seconds. Doubles are
// printed with shortest-round-trip precision; absent metrics print "nan".
std::string history_csv(const TrainResult& r);

}  // namespace dctrain
