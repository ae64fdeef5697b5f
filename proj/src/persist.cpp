#include "shm/persist.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "shm/error.hpp"

namespace shm::io {

using nlohmann::json;

namespace {

Error malformed(const std::string& what) { return Error(ErrorKind::MalformedFile, "model file: " + what); }

const json& field(const json& j, const std::string& name) {
  if (!j.is_object()) throw malformed("expected an object around '" + name + "'");
  const auto it = j.find(name);
  if (it == j.end()) throw malformed("missing field '" + name + "'");
  return *it;
}

double number(const json& j, const std::string& name) {
  const json& v = field(j, name);
  if (!v.is_number()) throw malformed("field '" + name + "' must be a number");
  return v.get<double>();
}

std::vector<double> numbers(const json& v, const std::string& name) {
  if (!v.is_array()) throw malformed("field '" + name + "' must be an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& e : v) {
    if (!e.is_number()) throw malformed("field '" + name + "' must hold numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

Eigen::VectorXd vec(const json& j, const std::string& name) {
  const auto v = numbers(field(j, name), name);
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json to_array(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

void put_network(json& j, const nn::Network& net) {
  j["layer_sizes"] = net.sizes();
  json weights = json::array(), biases = json::array();
  for (const auto& l : net.layers) {
    std::vector<double> w;
    w.reserve(l.weights.size());
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.push_back(l.weights(r, c));
    weights.push_back(w);
    biases.push_back(to_array(l.bias));
  }
  j["weights"] = weights;
  j["biases"] = biases;
}

nn::Network get_network(const json& j) {
  const json& sizes_j = field(j, "layer_sizes");
  if (!sizes_j.is_array() || sizes_j.size() < 2) throw malformed("field 'layer_sizes' needs at least 2 entries");
  std::vector<int> sizes;
  for (const auto& s : sizes_j) {
    if (!s.is_number_integer() || s.get<int>() < 1) throw malformed("field 'layer_sizes' must hold positive integers");
    sizes.push_back(s.get<int>());
  }
  const json& weights = field(j, "weights");
  const json& biases = field(j, "biases");
  if (!weights.is_array() || weights.size() != sizes.size() - 1)
    throw malformed("field 'weights' must hold one array per layer");
  if (!biases.is_array() || biases.size() != sizes.size() - 1)
    throw malformed("field 'biases' must hold one array per layer");

  nn::Network net;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const auto w = numbers(weights[l], "weights");
    const auto b = numbers(biases[l], "biases");
    const int in = sizes[l], out = sizes[l + 1];
    if (static_cast<int>(w.size()) != in * out)
      throw malformed("field 'weights' layer " + std::to_string(l) + " has " + std::to_string(w.size()) +
                      " values, expected " + std::to_string(in * out));
    if (static_cast<int>(b.size()) != out) throw malformed("field 'biases' layer " + std::to_string(l) + " has wrong length");
    nn::Layer layer;
    layer.weights.resize(out, in);
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) layer.weights(r, c) = w[static_cast<std::size_t>(r) * in + c];
    layer.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), out);
    net.layers.push_back(std::move(layer));
  }
  if (!std::all_of(net.layers.begin(), net.layers.end(),
                   [](const nn::Layer& l) { return l.weights.allFinite() && l.bias.allFinite(); }))
    throw malformed("non-finite network parameter");
  return net;
}

json header(const char* kind, double fs, int window) {
  return json{{"format_version", kFormatVersion}, {"kind", kind}, {"fs", fs}, {"window", window}};
}

json to_json(const sysid::ArModel& m) {
  json j = header("ar", m.fs, m.order());
  j["coeffs"] = to_array(m.coeffs);
  return j;
}

json to_json(const sysid::MlpModel& m) {
  json j = header("mlp", m.fs, m.window());
  j["coeffs"] = json::array();
  put_network(j, m.net);
  j["norm"] = {{"in_mean", to_array(m.norm.in_mean)},
               {"in_std", to_array(m.norm.in_std)},
               {"out_mean", m.norm.out_mean},
               {"out_std", m.norm.out_std}};
  return j;
}

json to_json(const dmg::ClassifierModel& m) {
  json j = header("classifier", 0.0, m.net.n_inputs());
  j["coeffs"] = json::array();
  put_network(j, m.net);
  j["norm"] = {{"in_mean", to_array(m.in_mean)}, {"in_std", to_array(m.in_std)}, {"out_mean", 0.0}, {"out_std", 1.0}};
  j["heads"] = dmg::kHeads;
  j["training"] = {{"seed", m.seed}, {"noise_rel", m.noise_rel}, {"replicates", m.replicates}};
  return j;
}

void check_norm_width(const Eigen::VectorXd& v, int n, const char* name) {
  if (v.size() != n) throw malformed(std::string("field '") + name + "' length does not match the window");
}

}  // namespace

std::string dump_model(const Model& model) {
  return std::visit([](const auto& m) { return to_json(m).dump(2) + "\n"; }, model);
}

Model parse_model(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw malformed(std::string("not valid JSON (") + e.what() + ")");
  }
  const json& version = field(j, "format_version");
  if (!version.is_number_integer()) throw malformed("field 'format_version' must be an integer");
  if (version.get<long long>() != kFormatVersion)
    throw Error(ErrorKind::UnsupportedVersion,
                "model file: unsupported format_version " + version.dump() + " (this build reads 1)");
  const json& kind_j = field(j, "kind");
  if (!kind_j.is_string()) throw malformed("field 'kind' must be a string");
  const std::string kind = kind_j.get<std::string>();
  const double fs = number(j, "fs");
  const double window = number(j, "window");

  if (kind == "ar") {
    sysid::ArModel m;
    m.fs = fs;
    m.coeffs = vec(j, "coeffs");
    if (m.coeffs.size() < 1 || m.coeffs.size() != static_cast<Eigen::Index>(window))
      throw malformed("field 'coeffs' length must equal 'window'");
    if (!m.coeffs.allFinite()) throw malformed("field 'coeffs' holds a non-finite value");
    return m;
  }
  if (kind != "mlp" && kind != "classifier") throw malformed("unknown kind '" + kind + "'");

  nn::Network net = get_network(j);
  if (net.n_inputs() != static_cast<int>(window)) throw malformed("field 'window' disagrees with 'layer_sizes'");
  const json& norm = field(j, "norm");
  const Eigen::VectorXd in_mean = vec(norm, "in_mean");
  const Eigen::VectorXd in_std = vec(norm, "in_std");
  check_norm_width(in_mean, net.n_inputs(), "in_mean");
  check_norm_width(in_std, net.n_inputs(), "in_std");

  if (kind == "mlp") {
    sysid::MlpModel m;
    m.net = std::move(net);
    m.fs = fs;
    m.norm.in_mean = in_mean;
    m.norm.in_std = in_std;
    m.norm.out_mean = number(norm, "out_mean");
    m.norm.out_std = number(norm, "out_std");
    if (m.net.n_outputs() != 1) throw malformed("predictor must have a single output");
    return m;
  }

  const json& heads = field(j, "heads");
  if (heads != json(dmg::kHeads)) throw malformed("field 'heads' must be [4,10,2]");
  dmg::ClassifierModel m;
  m.net = std::move(net);
  if (m.net.n_inputs() != dmg::kFeatureModes || m.net.n_outputs() != dmg::kHeadOutputs)
    throw malformed("classifier must map 4 features to 16 logits");
  m.in_mean = in_mean;
  m.in_std = in_std;
  if (const auto t = j.find("training"); t != j.end() && t->is_object()) {
    m.seed = t->value("seed", std::uint64_t{0});
    m.noise_rel = t->value("noise_rel", 0.0);
    m.replicates = t->value("replicates", 1);
  }
  return m;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::InvalidInput, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::InvalidInput, "cannot write '" + path + "'");
    out << contents;
    if (!out.flush()) throw Error(ErrorKind::InvalidInput, "write failed for '" + path + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorKind::InvalidInput, "cannot write '" + path + "'");
  }
}

void save_model(const Model& model, const std::string& path) { write_file(path, dump_model(model)); }

Model load_model(const std::string& path) { return parse_model(read_file(path)); }

}  // namespace shm::io
