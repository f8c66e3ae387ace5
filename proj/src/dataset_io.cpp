#include "dctrain/dataset_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace dctrain {

using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IOError("cannot write " + path);
  out << text;
  if (!out) throw IOError("write failed for " + path);
}

namespace {

json pes_params_to_json(const PESParams& p) {
  return json{{"kind", pes_kind_name(p.kind)},
              {"dim", p.dim},
              {"quad_diag", p.quad_diag},
              {"dw_a", p.dw_a},
              {"dw_b", p.dw_b},
              {"dw_c", p.dw_c},
              {"gm_weights", p.gm_weights},
              {"gm_centers", p.gm_centers},
              {"gm_widths", p.gm_widths},
              {"box_lo", p.box_lo},
              {"box_hi", p.box_hi},
              {"label_scale", p.label_scale}};
}

PESParams pes_params_from_json(const json& j) {
  PESParams p;
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "quadratic") p.kind = PESKind::Quadratic;
  else if (kind == "double_well") p.kind = PESKind::DoubleWell;
  else if (kind == "gaussian_mix") p.kind = PESKind::GaussianMix;
  else throw IOError("unknown PES kind: " + kind);
  p.dim = j.at("dim").get<std::size_t>();
  p.quad_diag = j.at("quad_diag").get<std::vector<double>>();
  p.dw_a = j.at("dw_a").get<double>();
  p.dw_b = j.at("dw_b").get<double>();
  p.dw_c = j.at("dw_c").get<double>();
  p.gm_weights = j.at("gm_weights").get<std::vector<double>>();
  p.gm_centers = j.at("gm_centers").get<std::vector<std::vector<double>>>();
  p.gm_widths = j.at("gm_widths").get<std::vector<double>>();
  p.box_lo = j.at("box_lo").get<double>();
  p.box_hi = j.at("box_hi").get<double>();
  p.label_scale = j.at("label_scale").get<double>();
  return p;
}

json tensor_to_json(const Tensor& t) { return json{{"shape", t.shape}, {"data", t.data}}; }

Tensor tensor_from_json(const json& j) {
  return Tensor(j.at("shape").get<Shape>(), j.at("data").get<std::vector<double>>());
}

}  // namespace

void save_pes(const std::string& path, const PESDataset& ds) {
  std::ostringstream out;
  json header{{"generator", pes_params_to_json(ds.params)},
              {"seed", ds.seed},
              {"n", ds.samples.size()}};
  out << header.dump() << "\n";
  for (const auto& s : ds.samples) {
    json rec{{"x", s.x}, {"E", s.E}, {"F", s.F}};
    out << rec.dump() << "\n";
  }
  write_file(path, out.str());
}

PESDataset load_pes(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line) || line.empty()) throw IOError(path + ": empty dataset file");
  ++lineno;
  PESDataset ds;
  try {
    json header = json::parse(line);
    ds.params = pes_params_from_json(header.at("generator"));
    ds.seed = header.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw IOError(path + ":1: bad header: " + e.what());
  }
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      json rec = json::parse(line);
      PESSample s;
      s.x = rec.at("x").get<std::vector<double>>();
      s.E = rec.at("E").get<double>();
      s.F = rec.at("F").get<std::vector<double>>();
      if (s.x.size() != ds.params.dim || s.F.size() != ds.params.dim)
        throw IOError("record dimension mismatch");
      ds.samples.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw IOError(path + ":" + std::to_string(lineno) + ": malformed record: " + e.what());
    } catch (const IOError& e) {
      throw IOError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (ds.samples.empty()) throw IOError(path + ": dataset has no samples");
  return ds;
}

void save_pointsets(const std::string& path, const PINNPointSets& ps) {
  json sets = json::object();
  json order = json::array();
  for (const auto& [name, t] : ps.labelled) {
    sets[name] = tensor_to_json(t);
    order.push_back(name);
  }
  json j{{"Xf", tensor_to_json(ps.Xf)},
         {"sets", std::move(sets)},
         {"set_order", std::move(order)},
         {"domain_lo", ps.domain_lo},
         {"domain_hi", ps.domain_hi},
         {"t_max", ps.t_max}};
  write_file(path, j.dump(2) + "\n");
}

PINNPointSets load_pointsets(const std::string& path) {
  std::string text = read_file(path);
  if (text.empty()) throw IOError(path + ": empty point-set file");
  try {
    json j = json::parse(text);
    PINNPointSets ps;
    ps.Xf = tensor_from_json(j.at("Xf"));
    ps.domain_lo = j.at("domain_lo").get<double>();
    ps.domain_hi = j.at("domain_hi").get<double>();
    ps.t_max = j.at("t_max").get<double>();
    for (const auto& name : j.at("set_order"))
      ps.labelled.emplace_back(name.get<std::string>(),
                               tensor_from_json(j.at("sets").at(name.get<std::string>())));
    return ps;
  } catch (const json::exception& e) {
    throw IOError(path + ": malformed point-set file: " + e.what());
  }
}

}  // namespace dctrain
