#include "dctrain/mlp.hpp"

#include <cmath>

#include <json.hpp>

#include "dctrain/rng.hpp"

namespace dctrain {

using nlohmann::json;

namespace {

std::vector<std::size_t> layer_widths(const MLPConfig& c) {
  std::vector<std::size_t> w;
  w.push_back(c.input_dim);
  for (std::size_t h : c.hidden) w.push_back(h);
  w.push_back(c.output_dim);
  return w;
}

void validate(const MLPConfig& c) {
  if (c.input_dim == 0 || c.output_dim == 0) throw GraphError("MLPConfig: zero layer width");
  for (std::size_t h : c.hidden)
    if (h == 0) throw GraphError("MLPConfig: zero hidden width");
}

NodeId param_var(Graph& g, const std::string& name, Shape shape) {
  auto it = g.variables().find(name);
  if (it != g.variables().end()) return it->second;
  return g.var(name, std::move(shape));
}

}  // namespace

MLP build_mlp(const MLPConfig& config) {
  validate(config);
  MLP m;
  m.config = config;
  Rng rng(config.seed);
  auto widths = layer_widths(config);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    std::size_t fan_in = widths[l], fan_out = widths[l + 1];
    double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor w({fan_out, fan_in});
    for (auto& v : w.data) v = rng.uniform(-limit, limit);
    m.weights.push_back(std::move(w));
    m.biases.push_back(Tensor({fan_out}));
  }
  if (config.use_batchnorm) {
    for (std::size_t l = 0; l < config.hidden.size(); ++l) {
      BatchNormBlock b;
      b.gamma = Tensor::full({config.hidden[l]}, 1.0);
      b.beta = Tensor({config.hidden[l]});
      b.running_mean = Tensor({config.hidden[l]});
      b.running_var = Tensor::full({config.hidden[l]}, 1.0);
      m.bn.push_back(std::move(b));
    }
  }
  return m;
}

NodeId mlp_forward(Graph& g, const MLPConfig& config, NodeId x, const std::string& prefix,
                   bool training) {
  validate(config);
  const Shape& xs = g.node(x).shape;
  if (xs.size() != 2 || xs[1] != config.input_dim)
    throw ShapeError("mlp_forward: input shape " + shape_str(xs) + " does not match input_dim " +
                     std::to_string(config.input_dim));
  const std::size_t n = xs[0];
  auto widths = layer_widths(config);

  NodeId h = x;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    NodeId w = param_var(g, prefix + "W" + std::to_string(l), {widths[l + 1], widths[l]});
    NodeId b = param_var(g, prefix + "b" + std::to_string(l), {widths[l + 1]});
    NodeId z = g.add(g.matmul(h, w, false, true), b);
    const bool last = l + 2 == widths.size();
    if (last) {
      h = z;
      break;
    }
    if (config.use_batchnorm) {
      std::string bp = prefix + "bn" + std::to_string(l);
      NodeId gamma = param_var(g, bp + "_gamma", {widths[l + 1]});
      NodeId beta = param_var(g, bp + "_beta", {widths[l + 1]});
      NodeId mean, var;
      if (training) {
        double inv_n = 1.0 / static_cast<double>(n);
        mean = g.scale(g.sum_axis0(z), inv_n);
        var = g.scale(g.sum_axis0(g.square(g.sub(z, mean))), inv_n);
        // Batch statistics are also outputs so a trainer can maintain the
        // running averages. Only the first forward pass per prefix is
        // recorded; later passes (e.g. IC/BC point sets) reuse the names.
        if (!g.outputs().count(bp + "_batch_mean")) {
          g.mark_output(bp + "_batch_mean", mean);
          g.mark_output(bp + "_batch_var", var);
        }
      } else {
        mean = param_var(g, bp + "_rm", {widths[l + 1]});
        var = param_var(g, bp + "_rv", {widths[l + 1]});
      }
      NodeId inv_std = g.reciprocal(g.sqrt(g.add(var, g.scalar(1e-5))));
      z = g.add(g.mul(g.mul(g.sub(z, mean), inv_std), gamma), beta);
    }
    h = g.unary(activation_op(config.layer_activation(l)), z);
  }
  return h;
}

std::vector<std::string> mlp_param_names(const MLPConfig& config, const std::string& prefix) {
  std::vector<std::string> names;
  for (std::size_t l = 0; l < config.num_linear(); ++l) {
    names.push_back(prefix + "W" + std::to_string(l));
    names.push_back(prefix + "b" + std::to_string(l));
  }
  if (config.use_batchnorm)
    for (std::size_t l = 0; l < config.hidden.size(); ++l) {
      names.push_back(prefix + "bn" + std::to_string(l) + "_gamma");
      names.push_back(prefix + "bn" + std::to_string(l) + "_beta");
    }
  return names;
}

void mlp_bind(const MLP& model, Bindings& bindings, const std::string& prefix, bool training) {
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    bindings[prefix + "W" + std::to_string(l)] = model.weights[l];
    bindings[prefix + "b" + std::to_string(l)] = model.biases[l];
  }
  for (std::size_t l = 0; l < model.bn.size(); ++l) {
    std::string bp = prefix + "bn" + std::to_string(l);
    bindings[bp + "_gamma"] = model.bn[l].gamma;
    bindings[bp + "_beta"] = model.bn[l].beta;
    if (!training) {
      bindings[bp + "_rm"] = model.bn[l].running_mean;
      bindings[bp + "_rv"] = model.bn[l].running_var;
    }
  }
}

void mlp_unbind(MLP& model, const Bindings& bindings, const std::string& prefix) {
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    model.weights[l] = bindings.at(prefix + "W" + std::to_string(l));
    model.biases[l] = bindings.at(prefix + "b" + std::to_string(l));
  }
  for (std::size_t l = 0; l < model.bn.size(); ++l) {
    std::string bp = prefix + "bn" + std::to_string(l);
    model.bn[l].gamma = bindings.at(bp + "_gamma");
    model.bn[l].beta = bindings.at(bp + "_beta");
  }
}

std::string mlp_to_json(const MLP& model) {
  const MLPConfig& c = model.config;
  json ov = json::array();
  for (const auto& o : c.activation_override)
    ov.push_back(o ? json(activation_name(*o)) : json(nullptr));
  json j{{"config",
          {{"input_dim", c.input_dim},
           {"hidden", c.hidden},
           {"output_dim", c.output_dim},
           {"activation", activation_name(c.activation)},
           {"activation_override", ov},
           {"use_batchnorm", c.use_batchnorm},
           {"seed", c.seed}}}};
  json weights = json::array(), biases = json::array();
  for (const auto& w : model.weights) weights.push_back(w.data);
  for (const auto& b : model.biases) biases.push_back(b.data);
  j["weights"] = std::move(weights);
  j["biases"] = std::move(biases);
  if (c.use_batchnorm) {
    json bn = json::array();
    for (const auto& b : model.bn)
      bn.push_back({{"gamma", b.gamma.data},
                    {"beta", b.beta.data},
                    {"running_mean", b.running_mean.data},
                    {"running_var", b.running_var.data}});
    j["bn"] = std::move(bn);
  }
  return j.dump(2);
}

MLP mlp_from_json(const std::string& text) {
  json j = json::parse(text);
  const json& jc = j.at("config");
  MLPConfig c;
  c.input_dim = jc.at("input_dim").get<std::size_t>();
  c.hidden = jc.at("hidden").get<std::vector<std::size_t>>();
  c.output_dim = jc.at("output_dim").get<std::size_t>();
  auto act = activation_from_name(jc.at("activation").get<std::string>());
  if (!act) throw GraphError("checkpoint: unknown activation");
  c.activation = *act;
  for (const auto& o : jc.at("activation_override")) {
    if (o.is_null())
      c.activation_override.push_back(std::nullopt);
    else
      c.activation_override.push_back(activation_from_name(o.get<std::string>()));
  }
  c.use_batchnorm = jc.at("use_batchnorm").get<bool>();
  c.seed = jc.at("seed").get<std::uint64_t>();

  MLP m = build_mlp(c);
  const json& jw = j.at("weights");
  const json& jb = j.at("biases");
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    m.weights[l].data = jw.at(l).get<std::vector<double>>();
    m.biases[l].data = jb.at(l).get<std::vector<double>>();
    if (m.weights[l].data.size() != shape_size(m.weights[l].shape))
      throw GraphError("checkpoint: weight size mismatch at layer " + std::to_string(l));
  }
  if (c.use_batchnorm) {
    const json& jn = j.at("bn");
    for (std::size_t l = 0; l < m.bn.size(); ++l) {
      m.bn[l].gamma.data = jn.at(l).at("gamma").get<std::vector<double>>();
      m.bn[l].beta.data = jn.at(l).at("beta").get<std::vector<double>>();
      m.bn[l].running_mean.data = jn.at(l).at("running_mean").get<std::vector<double>>();
      m.bn[l].running_var.data = jn.at(l).at("running_var").get<std::vector<double>>();
    }
  }
  return m;
}

}  // namespace dctrain
