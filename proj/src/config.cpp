#include "shm/config.hpp"

#include <cmath>
#include <set>

#include "json.hpp"
#include "shm/error.hpp"
#include "shm/persist.hpp"

namespace shm::cfg {

using nlohmann::json;

namespace {

Error bad(const std::string& path, const std::string& what) {
  return Error(ErrorKind::InvalidInput, "config: '" + path + "' " + what);
}

void only_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw bad(path, "must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items())
    if (!ok.count(key)) throw bad(path.empty() ? key : path + "." + key, "is not a known key");
}

void get(const json& j, const std::string& path, const char* key, double& out) {
  if (!j.contains(key)) return;
  if (!j[key].is_number()) throw bad(path + "." + key, "must be a number");
  out = j[key].get<double>();
}

void get(const json& j, const std::string& path, const char* key, int& out) {
  if (!j.contains(key)) return;
  if (!j[key].is_number_integer()) throw bad(path + "." + key, "must be an integer");
  out = j[key].get<int>();
}

void get(const json& j, const std::string& path, const char* key, std::vector<int>& out) {
  if (!j.contains(key)) return;
  const json& v = j[key];
  if (!v.is_array()) throw bad(path + "." + key, "must be an array of integers");
  out.clear();
  for (const auto& e : v) {
    if (!e.is_number_integer()) throw bad(path + "." + key, "must be an array of integers");
    out.push_back(e.get<int>());
  }
}

std::string get_string(const json& j, const std::string& path, const char* key, const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_string()) throw bad(path + "." + key, "must be a string");
  return j[key].get<std::string>();
}

sim::ExcitationSpec parse_excitation(const json& j, const std::string& path) {
  only_keys(j, path, {"kind", "node", "amplitude", "preroll_s"});
  sim::ExcitationSpec e;
  const std::string kind = get_string(j, path, "kind", "random");
  if (kind == "random")
    e.kind = sim::ExcitationKind::Random;
  else if (kind == "pluck")
    e.kind = sim::ExcitationKind::Pluck;
  else
    throw bad(path + ".kind", "must be \"random\" or \"pluck\"");
  get(j, path, "node", e.node);
  get(j, path, "amplitude", e.amplitude);
  get(j, path, "preroll_s", e.preroll_s);
  return e;
}

sim::SensorSpec parse_sensor(const json& j, const std::string& path) {
  only_keys(j, path, {"kind", "location", "gauge_offset", "noise_sigma"});
  sim::SensorSpec s;
  const std::string kind = get_string(j, path, "kind", "displacement");
  if (kind == "displacement")
    s.kind = sim::SensorKind::Displacement;
  else if (kind == "strain")
    s.kind = sim::SensorKind::Strain;
  else
    throw bad(path + ".kind", "must be \"displacement\" or \"strain\"");
  get(j, path, "location", s.location);
  get(j, path, "gauge_offset", s.gauge_offset);
  get(j, path, "noise_sigma", s.noise_sigma);
  return s;
}

json excitation_json(const sim::ExcitationSpec& e) {
  return {{"kind", e.kind == sim::ExcitationKind::Random ? "random" : "pluck"},
          {"node", e.node},
          {"amplitude", e.amplitude},
          {"preroll_s", e.preroll_s}};
}

json sensor_json(const sim::SensorSpec& s) {
  return {{"kind", s.kind == sim::SensorKind::Displacement ? "displacement" : "strain"},
          {"location", s.location},
          {"gauge_offset", s.gauge_offset},
          {"noise_sigma", s.noise_sigma}};
}

}  // namespace

void RunConfig::validate() const {
  beam.validate();
  require(!excitations.empty(), "config: at least one excitation is required");
  int pluck = 0;
  for (const auto& e : excitations) {
    e.validate(beam.n_nodes());
    pluck += e.kind == sim::ExcitationKind::Pluck;
  }
  require(pluck <= 1, "config: at most one pluck excitation");
  sim::sample_count(sampling.fs, sampling.duration_s);
  require(!sensors.empty(), "config: at least one sensor is required");
  std::set<std::string> names;
  for (const auto& s : sensors) {
    s.validate(beam.n_nodes());
    require(names.insert(s.channel_name()).second, "config: duplicate sensor " + s.channel_name());
  }
  require(sysid.window >= 0 && sysid.order >= 0 && sysid.stride >= 0, "config: sysid window/order/stride must be >= 0");
  require(sysid.order == 0 || sysid.order >= 2, "config: sysid.order must be >= 2");
  require(sysid.band_hz > 0.0 && std::isfinite(sysid.band_hz), "config: sysid.band_hz must be > 0");
  require(sysid.ridge_rel >= 0.0 && std::isfinite(sysid.ridge_rel), "config: sysid.ridge_rel must be >= 0");
  require(!sysid.hidden.empty(), "config: sysid.hidden needs at least one layer");
  for (int h : sysid.hidden) require(h >= 1, "config: sysid.hidden sizes must be >= 1");
  require(sysid.lr > 0.0 && sysid.momentum >= 0.0 && sysid.momentum < 1.0, "config: sysid lr/momentum out of range");
  require(sysid.epochs >= 0 && sysid.batch_size >= 1, "config: sysid epochs/batch_size out of range");
  require(classifier.noise_rel >= 0.0 && std::isfinite(classifier.noise_rel), "config: classifier.noise_rel must be >= 0");
  require(classifier.replicates >= 1, "config: classifier.replicates must be >= 1");
  for (int h : classifier.hidden) require(h >= 1, "config: classifier.hidden sizes must be >= 1");
  require(classifier.lr > 0.0 && classifier.epochs >= 0, "config: classifier lr/epochs out of range");
  require(online.lr > 0.0 && std::isfinite(online.lr), "config: online.lr must be > 0");
  require(online.average_fraction >= 0.0 && online.average_fraction < 1.0,
          "config: online.average_fraction must lie in [0, 1)");
  require(online.pristine_s > 0.0 && online.damaged_s > 0.0, "config: online durations must be > 0");
  fem::damage_case(online.damaged_case);
}

std::uint64_t RunConfig::seed() const {
  if (!master_seed) throw Error(ErrorKind::InvalidInput, "config: master_seed is required (set it or pass --seed)");
  return *master_seed;
}

bool RunConfig::random_excitation() const {
  for (const auto& e : excitations)
    if (e.kind == sim::ExcitationKind::Random) return true;
  return false;
}

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::InvalidInput, std::string("config: not valid JSON (") + e.what() + ")");
  }
  only_keys(j, "", {"beam", "excitation", "sampling", "sensors", "sysid", "classifier", "online", "master_seed"});
  RunConfig c;

  if (j.contains("master_seed")) {
    const json& s = j["master_seed"];
    if (!s.is_number_unsigned()) throw bad("master_seed", "must be a non-negative integer");
    c.master_seed = s.get<std::uint64_t>();
  }
  if (j.contains("beam")) {
    const json& b = j["beam"];
    only_keys(b, "beam",
              {"length", "n_elements", "plies", "omega1_target", "mass_per_length", "n_modes", "damping_ratio"});
    get(b, "beam", "length", c.beam.length);
    get(b, "beam", "n_elements", c.beam.n_elements);
    get(b, "beam", "plies", c.beam.plies);
    get(b, "beam", "omega1_target", c.beam.omega1_target);
    get(b, "beam", "mass_per_length", c.beam.mass_per_length);
    get(b, "beam", "n_modes", c.beam.n_modes);
    get(b, "beam", "damping_ratio", c.beam.damping_ratio);
  }
  if (j.contains("excitation")) {
    const json& e = j["excitation"];
    c.excitations.clear();
    if (e.is_array()) {
      for (std::size_t i = 0; i < e.size(); ++i)
        c.excitations.push_back(parse_excitation(e[i], "excitation[" + std::to_string(i) + "]"));
    } else {
      c.excitations.push_back(parse_excitation(e, "excitation"));
    }
  }
  if (j.contains("sampling")) {
    const json& s = j["sampling"];
    only_keys(s, "sampling", {"fs", "duration_s"});
    get(s, "sampling", "fs", c.sampling.fs);
    get(s, "sampling", "duration_s", c.sampling.duration_s);
  }
  if (j.contains("sensors")) {
    const json& s = j["sensors"];
    if (!s.is_array()) throw bad("sensors", "must be an array");
    c.sensors.clear();
    for (std::size_t i = 0; i < s.size(); ++i)
      c.sensors.push_back(parse_sensor(s[i], "sensors[" + std::to_string(i) + "]"));
  }
  if (j.contains("sysid")) {
    const json& s = j["sysid"];
    only_keys(s, "sysid",
              {"method", "window", "order", "stride", "band_hz", "ridge_rel", "hidden", "lr", "momentum", "epochs",
               "batch_size"});
    const std::string method = get_string(s, "sysid", "method", "ar");
    if (method == "ar")
      c.sysid.method = Method::Ar;
    else if (method == "mlp")
      c.sysid.method = Method::Mlp;
    else
      throw bad("sysid.method", "must be \"ar\" or \"mlp\"");
    get(s, "sysid", "window", c.sysid.window);
    get(s, "sysid", "order", c.sysid.order);
    get(s, "sysid", "stride", c.sysid.stride);
    get(s, "sysid", "band_hz", c.sysid.band_hz);
    get(s, "sysid", "ridge_rel", c.sysid.ridge_rel);
    get(s, "sysid", "hidden", c.sysid.hidden);
    get(s, "sysid", "lr", c.sysid.lr);
    get(s, "sysid", "momentum", c.sysid.momentum);
    get(s, "sysid", "epochs", c.sysid.epochs);
    get(s, "sysid", "batch_size", c.sysid.batch_size);
  }
  if (j.contains("classifier")) {
    const json& s = j["classifier"];
    only_keys(s, "classifier", {"pathway", "noise_rel", "replicates", "hidden", "lr", "epochs"});
    const std::string pathway = get_string(s, "classifier", "pathway", "oracle");
    if (pathway == "oracle")
      c.classifier.pathway = dmg::Pathway::Oracle;
    else if (pathway == "identified")
      c.classifier.pathway = dmg::Pathway::Identified;
    else
      throw bad("classifier.pathway", "must be \"oracle\" or \"identified\"");
    get(s, "classifier", "noise_rel", c.classifier.noise_rel);
    get(s, "classifier", "replicates", c.classifier.replicates);
    get(s, "classifier", "hidden", c.classifier.hidden);
    get(s, "classifier", "lr", c.classifier.lr);
    get(s, "classifier", "epochs", c.classifier.epochs);
  }
  if (j.contains("online")) {
    const json& s = j["online"];
    only_keys(s, "online", {"lr", "pristine_s", "damaged_s", "damaged_case", "average_fraction"});
    get(s, "online", "lr", c.online.lr);
    get(s, "online", "pristine_s", c.online.pristine_s);
    get(s, "online", "damaged_s", c.online.damaged_s);
    get(s, "online", "damaged_case", c.online.damaged_case);
    get(s, "online", "average_fraction", c.online.average_fraction);
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) { return parse_config(io::read_file(path)); }

std::string dump_config(const RunConfig& c) {
  json j;
  if (c.master_seed) j["master_seed"] = *c.master_seed;
  j["beam"] = {{"length", c.beam.length},
               {"n_elements", c.beam.n_elements},
               {"plies", c.beam.plies},
               {"omega1_target", c.beam.omega1_target},
               {"mass_per_length", c.beam.mass_per_length},
               {"n_modes", c.beam.n_modes},
               {"damping_ratio", c.beam.damping_ratio}};
  json ex = json::array();
  for (const auto& e : c.excitations) ex.push_back(excitation_json(e));
  j["excitation"] = ex;
  j["sampling"] = {{"fs", c.sampling.fs}, {"duration_s", c.sampling.duration_s}};
  json se = json::array();
  for (const auto& s : c.sensors) se.push_back(sensor_json(s));
  j["sensors"] = se;
  j["sysid"] = {{"method", c.sysid.method == Method::Ar ? "ar" : "mlp"},
                {"window", c.sysid.window},
                {"order", c.sysid.order},
                {"stride", c.sysid.stride},
                {"band_hz", c.sysid.band_hz},
                {"ridge_rel", c.sysid.ridge_rel},
                {"hidden", c.sysid.hidden},
                {"lr", c.sysid.lr},
                {"momentum", c.sysid.momentum},
                {"epochs", c.sysid.epochs},
                {"batch_size", c.sysid.batch_size}};
  j["classifier"] = {{"pathway", c.classifier.pathway == dmg::Pathway::Oracle ? "oracle" : "identified"},
                     {"noise_rel", c.classifier.noise_rel},
                     {"replicates", c.classifier.replicates},
                     {"hidden", c.classifier.hidden},
                     {"lr", c.classifier.lr},
                     {"epochs", c.classifier.epochs}};
  j["online"] = {{"lr", c.online.lr},
                 {"pristine_s", c.online.pristine_s},
                 {"damaged_s", c.online.damaged_s},
                 {"damaged_case", c.online.damaged_case},
                 {"average_fraction", c.online.average_fraction}};
  return j.dump(2) + "\n";
}

}  // namespace shm::cfg
