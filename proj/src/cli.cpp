#include "shm/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "shm/config.hpp"
#include "shm/damage.hpp"
#include "shm/error.hpp"
#include "shm/parallel.hpp"
#include "shm/persist.hpp"
#include "shm/predictor.hpp"
#include "shm/seed.hpp"
#include "shm/study.hpp"
#include "shm/sysid.hpp"

namespace shm::cli {

namespace {

struct Options {
  std::string config, out, in, model, data, method, pathway, features, channel;
  std::optional<int> case_id, window, order, replicates, workers;
  std::optional<std::uint64_t> seed;
  std::optional<double> noise;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

cfg::RunConfig load(const Options& o) {
  cfg::RunConfig c = o.config.empty() ? cfg::RunConfig{} : cfg::load_config(o.config);
  if (o.seed) c.master_seed = *o.seed;
  if (!o.method.empty()) {
    require(o.method == "ar" || o.method == "mlp", "--method must be ar or mlp");
    c.sysid.method = o.method == "ar" ? cfg::Method::Ar : cfg::Method::Mlp;
  }
  if (o.window) c.sysid.window = *o.window;
  if (o.order) c.sysid.order = *o.order;
  if (!o.pathway.empty()) {
    require(o.pathway == "oracle" || o.pathway == "identified", "--pathway must be oracle or identified");
    c.classifier.pathway = o.pathway == "oracle" ? dmg::Pathway::Oracle : dmg::Pathway::Identified;
  }
  c.validate();
  return c;
}

fem::DamageSpec case_of(const Options& o) { return fem::damage_case(o.case_id.value_or(0)); }

int workers_of(const Options& o) {
  if (o.workers) require(*o.workers >= 1, "--workers must be >= 1");
  return par::resolve_workers(o.workers.value_or(0));
}

// Fails early when an output path cannot be created, before any work is done.
void check_out(const std::string& path) {
  if (path.empty()) return;
  const auto parent = std::filesystem::path(path).parent_path();
  require(parent.empty() || std::filesystem::is_directory(parent),
          "output directory does not exist: " + parent.string());
}

void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty())
    out << text;
  else
    io::write_file(path, text);
}

sim::TimeSeries input_series(const Options& o, const cfg::RunConfig& c) {
  if (!o.in.empty()) {
    std::istringstream ss(io::read_file(o.in));
    return sim::read_csv(ss);
  }
  return study::simulate_case(c, case_of(o), c.seed());
}

std::string modes_text(const std::vector<sysid::ModeEstimate>& modes) {
  std::string s = "mode  freq_hz      zeta\n";
  char buf[96];
  for (std::size_t i = 0; i < modes.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%4zu  %-11.6f  %.6f\n", i + 1, modes[i].freq_hz, modes[i].zeta);
    s += buf;
  }
  return s;
}

int cmd_modes(const Options& o, std::ostream& out) {
  const auto c = load(o);
  const auto spec = case_of(o);
  check_out(o.out);
  const auto modal = study::case_modes(c, spec);
  std::string s = "case " + std::to_string(spec.case_id) + "\nmode  omega_rad_s   freq_hz\n";
  char buf[96];
  for (int i = 0; i < modal.n_modes(); ++i) {
    std::snprintf(buf, sizeof buf, "%4d  %-12.6f  %.6f\n", i + 1, modal.omegas(i), modal.freqs_hz(i));
    s += buf;
  }
  emit(o.out, s, out);
  return 0;
}

int cmd_simulate(const Options& o, std::ostream& out) {
  const auto c = load(o);
  const auto spec = case_of(o);
  c.seed();
  check_out(o.out);
  const auto series = study::simulate_case(c, spec, c.seed());
  std::ostringstream ss;
  sim::write_csv(series, ss);
  emit(o.out, ss.str(), out);
  return 0;
}

int cmd_identify(const Options& o, std::ostream& out) {
  const auto c = load(o);
  if (o.in.empty()) {
    case_of(o);
    c.seed();
  }
  check_out(o.out);
  const auto series = input_series(o, c);
  const std::string channel = o.channel.empty() ? series.names.at(0) : o.channel;
  const auto& x = series.channel(channel);

  if (c.sysid.method == cfg::Method::Ar) {
    const auto id = sysid::identify_ar(x, series.fs, study::ar_options(c));
    out << "AR(" << id.model.order() << ") on " << channel << ", stride " << id.stride << " (fs "
        << fmt("%.6g", id.model.fs) << " Hz)\n"
        << modes_text(id.modes);
    if (!o.out.empty()) io::save_model(id.model, o.out);
    return 0;
  }

  const int n = c.sysid.window > 0 ? c.sysid.window : sysid::window_size(series.fs, c.sysid.band_hz);
  const int split = static_cast<int>(x.size() * 4 / 5);
  require(split > n + 1 && static_cast<int>(x.size()) - split > n + 1, "identify: series too short for window");
  const std::span<const double> all(x);
  const auto train = sysid::build_windows(all.first(split), n, series.fs);
  const auto test = sysid::build_windows(all.subspan(split - n), n, series.fs);
  const std::uint64_t seed = c.seed();
  sysid::TrainHyper h;
  h.lr = c.sysid.lr;
  h.momentum = c.sysid.momentum;
  h.epochs = c.sysid.epochs;
  h.batch_size = c.sysid.batch_size;
  h.shuffle_seed = derive_seed(seed, {stream::shuffle});
  const auto init = sysid::make_predictor(train, c.sysid.hidden, derive_seed(seed, {stream::init}));
  const auto res = sysid::train_predictor(init, train, h);
  std::vector<double> pred(test.rows()), actual(test.rows());
  for (int r = 0; r < test.rows(); ++r) {
    const Eigen::VectorXd w = test.inputs.row(r).transpose();
    pred[r] = sysid::predict_next(res.model, std::span<const double>(w.data(), n));
    actual[r] = test.targets(r);
  }
  out << "MLP window " << n << ", layers";
  for (int s : res.model.layer_sizes()) out << ' ' << s;
  out << "\nfinal training loss " << fmt("%.6e", res.loss_history.empty() ? 0.0 : res.loss_history.back())
      << "\nheld-out one-step NMSE " << fmt("%.6e", sysid::nmse(pred, actual)) << "\n";
  if (!o.out.empty()) io::save_model(res.model, o.out);
  return 0;
}

int cmd_extract(const Options& o, std::ostream& out) {
  require(!o.model.empty(), "extract-modes: --model is required");
  check_out(o.out);
  const auto m = io::load_model(o.model);
  const auto* ar = std::get_if<sysid::ArModel>(&m);
  require(ar != nullptr, "extract-modes: the model is not an AR model");
  emit(o.out, modes_text(sysid::extract_modes(*ar)), out);
  return 0;
}

study::StudyOptions study_options(const Options& o, const cfg::RunConfig& c, double default_noise,
                                  int default_replicates) {
  study::StudyOptions s;
  s.pathway = c.classifier.pathway;
  s.noise_rel = o.noise.value_or(default_noise);
  s.replicates = o.replicates.value_or(default_replicates);
  s.workers = workers_of(o);
  require(s.noise_rel >= 0.0 && std::isfinite(s.noise_rel), "--noise must be >= 0");
  require(s.replicates >= 1, "--replicates must be >= 1");
  return s;
}

int cmd_study(const Options& o, std::ostream& out) {
  const auto c = load(o);
  const auto opts = study_options(o, c, 0.0, 1);
  const auto seed = c.seed();
  check_out(o.out);
  const auto rep = study::run_study(c, seed, opts);
  std::ostringstream csv;
  dmg::write_study_csv(rep.dataset, csv);
  if (!o.out.empty()) io::write_file(o.out, csv.str());
  out << study::summarize(rep, opts.pathway);
  return 0;
}

int cmd_train(const Options& o, std::ostream& out) {
  const auto c = load(o);
  const auto seed = c.seed();
  auto opts = study_options(o, c, c.classifier.noise_rel, c.classifier.replicates);
  check_out(o.out);
  dmg::StudyDataset data;
  if (!o.data.empty()) {
    std::istringstream ss(io::read_file(o.data));
    data = dmg::read_study_csv(ss);
  } else {
    opts.train = false;
    data = study::run_study(c, seed, opts).dataset;
  }
  dmg::ClassifierHyper h;
  h.hidden = c.classifier.hidden;
  h.lr = c.classifier.lr;
  h.epochs = c.classifier.epochs;
  h.seed = seed;
  h.workers = opts.workers;
  auto trained = dmg::train_classifier(data, h);
  trained.model.noise_rel = opts.noise_rel;
  trained.model.replicates = opts.replicates;
  const auto m = dmg::evaluate(trained.model, data);
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "classifier: %zu rows, final loss %.6e\n"
                "training accuracy: severity %.4f, detection %.4f, location %.4f, length %.4f\n",
                data.rows.size(), trained.loss_history.empty() ? 0.0 : trained.loss_history.back(),
                m.severity_accuracy, m.detection_accuracy, m.location_accuracy, m.length_accuracy);
  out << buf << dmg::format_confusion(m.severity_confusion, "severity")
      << dmg::format_confusion(m.location_confusion, "location")
      << dmg::format_confusion(m.length_confusion, "length");
  if (!o.out.empty()) io::save_model(trained.model, o.out);
  return 0;
}

dmg::FeatureVector parse_features(const std::string& text) {
  dmg::FeatureVector f;
  std::stringstream ss(text);
  std::string cell;
  int i = 0;
  while (std::getline(ss, cell, ',')) {
    require(i < dmg::kFeatureModes, "--features needs exactly 4 comma-separated values");
    try {
      std::size_t used = 0;
      f.rel_shifts[i] = std::stod(cell, &used);
      require(used == cell.size(), "--features: bad number '" + cell + "'");
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::InvalidInput, "--features: bad number '" + cell + "'");
    }
    ++i;
  }
  require(i == dmg::kFeatureModes, "--features needs exactly 4 comma-separated values");
  return f;
}

int cmd_classify(const Options& o, std::ostream& out) {
  require(!o.model.empty(), "classify: --model is required");
  const auto c = load(o);
  const int sources = !o.features.empty() + !o.in.empty() + o.case_id.has_value();
  require(sources == 1, "classify: give exactly one of --case, --in, --features");
  check_out(o.out);
  const auto m = io::load_model(o.model);
  const auto* clf = std::get_if<dmg::ClassifierModel>(&m);
  require(clf != nullptr, "classify: the model is not a classifier");

  dmg::FeatureVector f;
  const auto baseline = dmg::first_four(study::case_modes(c, fem::pristine_case()));
  if (!o.features.empty()) {
    f = parse_features(o.features);
  } else if (o.case_id) {
    f = dmg::extract_features(baseline, dmg::first_four(study::case_modes(c, case_of(o))));
  } else {
    const auto series = input_series(o, c);
    const auto id = study::identify_channel(c, series, o.channel);
    f = dmg::extract_features(baseline, dmg::match_modes(baseline, id.modes));
  }
  const auto rep = dmg::classify(*clf, f);
  std::string s;
  char buf[160];
  std::snprintf(buf, sizeof buf, "features %.6e %.6e %.6e %.6e\n", f.rel_shifts[0], f.rel_shifts[1],
                f.rel_shifts[2], f.rel_shifts[3]);
  s += buf;
  const char* sev_names[] = {"none", "1", "2", "3"};
  s += std::string("severity ") + sev_names[rep.severity] + "  conf";
  for (double p : rep.severity_conf) s += fmt(" %.4f", p);
  s += "\nlocation " + (rep.location < 0 ? std::string("-") : std::to_string(rep.location)) + " (start element " +
       std::to_string(rep.start_element()) + ")  conf";
  for (double p : rep.location_conf) s += fmt(" %.4f", p);
  s += "\nlength " + (rep.length_elements == 0 ? std::string("-") : std::to_string(rep.length_elements)) + "  conf";
  for (double p : rep.length_conf) s += fmt(" %.4f", p);
  s += "\n";
  emit(o.out, s, out);
  return 0;
}

int cmd_online(const Options& o, std::ostream& out) {
  const auto c = load(o);
  const auto seed = c.seed();
  check_out(o.out);
  emit(o.out, study::summarize(study::run_online_demo(c, seed)), out);
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Structural health monitoring pipeline: beam FEM, transient response, AR/MLP identification, "
               "damage classification.",
               "shm_cli"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "run configuration (JSON)");
    sub->add_option("--seed", o.seed, "master seed (overrides config master_seed)");
    sub->add_option("--out", o.out, "output file");
    sub->add_option("--workers", o.workers, "worker threads (default: SHM_WORKERS or 1)");
  };
  struct Sub {
    const char* name;
    const char* help;
    int (*fn)(const Options&, std::ostream&);
  };
  const Sub subs[] = {
      {"modes", "natural frequencies of a case", cmd_modes},
      {"simulate", "simulate a case and write the time-series CSV", cmd_simulate},
      {"identify", "fit an AR or MLP forward model to a response", cmd_identify},
      {"extract-modes", "modal parameters of a saved AR model", cmd_extract},
      {"study", "run the 61-case damage study and write the study CSV", cmd_study},
      {"train-classifier", "train the damage classifier", cmd_train},
      {"classify", "classify damage with a saved classifier", cmd_classify},
      {"online-demo", "online adaptation across a pristine-to-damaged switch", cmd_online},
  };
  int (*chosen)(const Options&, std::ostream&) = nullptr;
  for (const auto& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    common(sub);
    sub->add_option("--case", o.case_id, "damage case id 0..60");
    sub->add_option("--method", o.method, "ar or mlp");
    sub->add_option("--window", o.window, "MLP tapped-delay length");
    sub->add_option("--order", o.order, "AR order");
    sub->add_option("--pathway", o.pathway, "oracle or identified");
    sub->add_option("--noise", o.noise, "relative frequency noise for dataset replicates");
    sub->add_option("--replicates", o.replicates, "replicates per case");
    sub->add_option("--in", o.in, "input time-series CSV");
    sub->add_option("--model", o.model, "model JSON");
    sub->add_option("--data", o.data, "study CSV");
    sub->add_option("--features", o.features, "four relative frequency shifts, comma separated");
    sub->add_option("--channel", o.channel, "channel name (default: first)");
    sub->callback([&chosen, fn = s.fn] { chosen = fn; });
  }

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 1;
  }
  if (!chosen) {
    err << app.help();
    return 1;
  }
  try {
    return chosen(o, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace shm::cli
