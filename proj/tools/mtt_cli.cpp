// Command-line front end: simulate, track, learn, evaluate, export.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "mtt/config.hpp"
#include "mtt/errors.hpp"
#include "mtt/filtering.hpp"
#include "mtt/io.hpp"
#include "mtt/learning.hpp"
#include "mtt/metrics.hpp"
#include "mtt/scenarios.hpp"

namespace fs = std::filesystem;
using namespace mtt;

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<long> iterations;
  std::optional<double> burn_in;
  std::optional<int> n1, n2, n3, particles, chains, check_every;
  std::string gamma_rule, accept_rule;
  std::optional<double> ospa_p, ospa_c;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config_path, "JSON configuration file");
  app->add_option("--iterations", f.iterations, "sampler iterations");
  app->add_option("--burn-in", f.burn_in, "fraction of iterations discarded");
  app->add_option("--n1", f.n1, "move sweeps per iteration");
  app->add_option("--n2", f.n2, "conditional SMC passes per iteration");
  app->add_option("--particles", f.particles, "conditional SMC particles");
  app->add_option("--chains", f.chains, "independent chains run concurrently");
  app->add_option("--check-every", f.check_every, "sweeps between full log-joint checks");
  app->add_option("--gamma-rule", f.gamma_rule, "min | max | fixed:<value>");
  app->add_option("--accept-rule", f.accept_rule, "min | logistic");
  app->add_option("--ospa-p", f.ospa_p, "OSPA order");
  app->add_option("--ospa-c", f.ospa_c, "OSPA cutoff");
}

RunConfig resolve(const CommonFlags& f) {
  RunConfig c = f.config_path.empty() ? RunConfig{} : load_run_config(f.config_path);
  if (f.seed) c.seed = f.seed;
  if (f.iterations) c.iterations = *f.iterations;
  if (f.burn_in) c.burn_in = *f.burn_in;
  if (f.n1) c.sampler.n1 = *f.n1;
  if (f.n2) c.sampler.n2 = *f.n2;
  if (f.n3) c.sampler.n3 = *f.n3;
  if (f.particles) c.sampler.csmc.particles = *f.particles;
  if (f.chains) c.chains = *f.chains;
  if (f.check_every) c.sampler.check_every = *f.check_every;
  if (!f.gamma_rule.empty()) c.sampler.proposal.gamma = GammaRule::parse(f.gamma_rule);
  if (!f.accept_rule.empty()) c.sampler.proposal.accept = parse_accept_rule(f.accept_rule);
  if (f.ospa_p) c.ospa.p = *f.ospa_p;
  if (f.ospa_c) c.ospa.c = *f.ospa_c;
  if (c.iterations < 1) throw ConfigError("iterations must be positive");
  if (c.chains < 1) throw ConfigError("chains must be positive");
  if (!(c.burn_in >= 0.0 && c.burn_in < 1.0)) throw ConfigError("burn-in must lie in [0, 1)");
  return c;
}

ModelParams load_params(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open parameters " + path.string());
  try {
    return params_from_json(nlohmann::json::parse(is));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
}

void save_params(const fs::path& path, const ModelParams& params) {
  std::ofstream os(path);
  if (!os) throw FormatError(FormatErrorKind::io, "cannot write " + path.string());
  os << params_to_json(params).dump(2) << '\n';
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw FormatError(FormatErrorKind::io, "cannot write " + path.string());
  return os;
}

// ---- simulate ----

struct SimulateFlags {
  std::string params_path, scenario = "crossing", out = "sim";
  std::uint64_t seed = 0;
  bool csv = false;
};

void run_simulate(const SimulateFlags& f) {
  ModelParams params = f.params_path.empty() ? crossing_scenario_params() : load_params(f.params_path);
  params.validate();
  Rng rng(f.seed);
  TrackSet truth;
  if (f.scenario == "crossing") {
    if (params.geom.rows != 64 || params.geom.cols != 64 || params.frames != 20)
      throw ConfigError("the crossing scenario needs a 64 x 64 x 20 geometry");
    truth = crossing_scenario_tracks(params);
  } else if (f.scenario == "prior") {
    truth = sample_prior_tracks(params, rng);
  } else {
    throw ConfigError("unknown scenario '" + f.scenario + "'");
  }
  const ImageStack y = sample_images(truth, params, rng);
  fs::create_directories(f.out);
  const fs::path out(f.out);
  write_mts(out / "images.mts", y);
  write_mts(out / "rendered.mts", render_images(truth, params));
  if (f.csv) write_csv_frames(out / "frames", y);
  write_tracks_csv(out / "truth_tracks.csv", truth);
  save_params(out / "params.json", params);
  std::cout << "simulated " << truth.size() << " targets over " << params.frames << " frames into "
            << out.string() << '\n';
}

// ---- track / learn ----

struct RunFlags {
  CommonFlags common;
  std::string images, params_path, init_params, init_tracks, out = "run";
  bool init_nn = false;
};

void run_one_chain(const ImageStack& y, const ModelParams& start, const TrackSet& init,
                   const SamplerConfig& sampler, long iterations, std::uint64_t seed,
                   const fs::path& dir) {
  fs::create_directories(dir);
  save_params(dir / "model.json", start);
  auto tracks_os = open_out(dir / "tracks.csv");
  auto diag_os = open_out(dir / "diagnostics.jsonl");
  auto params_os = open_out(dir / "params.csv");
  write_tracks_header(tracks_os);
  write_params_header(params_os, start.frames);
  FilterCache cache;
  ChainState chain = init_chain(y, start, init, seed);
  run_chain(chain, y, sampler, iterations, [&](const SampleRecord& r) {
    write_tracks_rows(tracks_os, r.iteration, r.tracks);
    diag_os << diagnostics_json(r).dump() << '\n';
    write_params_row(params_os, r.iteration, r.params);
  });
}

void run_sampler(const RunFlags& f, bool learn) {
  RunConfig c = resolve(f.common);
  if (!c.seed) throw ConfigError("--seed is required");
  if (!learn) c.sampler.n3 = 0;
  else if (c.sampler.n3 == 0) c.sampler.n3 = 1;
  ModelParams params;
  if (!f.init_params.empty() && learn) params = load_params(f.init_params);
  else if (!f.params_path.empty()) params = load_params(f.params_path);
  else if (c.model) params = *c.model;
  else throw ConfigError("model parameters are required (--params or config 'model')");
  params.validate();
  c.sampler.prior.validate();
  if (f.images.empty()) throw ConfigError("--images is required");
  const ImageStack y = read_images(f.images);
  check_dimensions(y, params);
  TrackSet init;
  if (f.init_nn) {
    NearestNeighbourConfig nn;
    nn.gate = c.nn_gate;
    nn.threshold = c.nn_threshold ? *c.nn_threshold : gamma_threshold(1, params, GammaRule{});
    init = greedy_nn_tracker(y, params, nn);
  } else if (!f.init_tracks.empty()) {
    const auto samples = read_tracks_csv(f.init_tracks);
    if (!samples.empty()) init = samples.rbegin()->second;
  }
  const fs::path out(f.out);
  if (c.chains == 1) {
    run_one_chain(y, params, init, c.sampler, c.iterations, *c.seed, out);
  } else {
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(c.chains));
    for (int k = 0; k < c.chains; ++k) {
      char name[32];
      std::snprintf(name, sizeof(name), "chain_%02d", k + 1);
      workers.emplace_back([&, k, dir = out / name] {
        try {
          run_one_chain(y, params, init, c.sampler, c.iterations,
                        derive_seed(*c.seed, static_cast<std::uint64_t>(k)), dir);
        } catch (...) {
          errors[static_cast<std::size_t>(k)] = std::current_exception();
        }
      });
    }
    for (auto& w : workers) w.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  std::cout << (learn ? "learn" : "track") << ": " << c.chains << " chain(s), " << c.iterations
            << " iterations written to " << out.string() << '\n';
}

// ---- reading a run back ----

std::vector<SampleRecord> load_run(const fs::path& dir) {
  const ModelParams base = load_params(dir / "model.json");
  const auto tracks = read_tracks_csv(dir / "tracks.csv");
  const auto table = read_params_csv(dir / "params.csv");
  const auto trace = read_log_joint_trace(dir / "diagnostics.jsonl");
  if (table.rows.size() != trace.size())
    throw FormatError(FormatErrorKind::dimension_mismatch, "params.csv and diagnostics.jsonl disagree in length");
  std::vector<SampleRecord> samples;
  samples.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    SampleRecord r;
    r.iteration = table.iterations[i];
    r.params = base;
    assign_param_vector(r.params, table.rows[i]);
    if (auto it = tracks.find(r.iteration); it != tracks.end()) r.tracks = it->second;
    r.log_joint = trace[i];
    r.counts = frame_counts(r.tracks, base.frames).alive;
    samples.push_back(std::move(r));
  }
  return samples;
}

// ---- evaluate ----

struct EvaluateFlags {
  CommonFlags common;
  std::string run, truth, images, out;
  std::optional<double> nn_threshold, nn_gate;
};

void run_evaluate(const EvaluateFlags& f) {
  RunConfig c = resolve(f.common);
  if (f.nn_gate) c.nn_gate = *f.nn_gate;
  if (f.nn_threshold) c.nn_threshold = f.nn_threshold;
  const fs::path run(f.run);
  const auto samples = load_run(run);
  if (samples.empty()) throw ConfigError("run contains no samples");
  const auto truth_sets = read_tracks_csv(f.truth);
  const TrackSet truth = truth_sets.empty() ? TrackSet{} : truth_sets.begin()->second;
  const auto summary = summarize_chain(samples, c.burn_in, &truth, c.ospa);
  const ModelParams& base = samples.front().params;
  std::vector<double> nn_ospa;
  if (!f.images.empty()) {
    const ImageStack y = read_images(f.images);
    check_dimensions(y, base);
    NearestNeighbourConfig nn;
    nn.gate = c.nn_gate;
    nn.threshold = c.nn_threshold ? *c.nn_threshold : gamma_threshold(1, base, GammaRule{});
    nn_ospa = ospa_per_frame(greedy_nn_tracker(y, base, nn), truth, base.frames, c.ospa);
  }
  const fs::path out = f.out.empty() ? run / "ospa.csv" : fs::path(f.out);
  auto os = open_out(out);
  os << "frame,ospa" << (nn_ospa.empty() ? "" : ",ospa_nn") << '\n';
  double nn_mean = 0.0;
  for (int t = 0; t < base.frames; ++t) {
    const auto i = static_cast<std::size_t>(t);
    os << t + 1 << ',' << summary.ospa[i];
    if (!nn_ospa.empty()) {
      os << ',' << nn_ospa[i];
      nn_mean += nn_ospa[i] / base.frames;
    }
    os << '\n';
  }
  std::cout << "mean OSPA " << summary.mean_ospa;
  if (!nn_ospa.empty()) std::cout << " (nearest-neighbour baseline " << nn_mean << ")";
  std::cout << '\n';
}

// ---- export ----

struct ExportFlags {
  CommonFlags common;
  std::string run, truth, out;
  int bins = 30;
  std::optional<int> replicate_frame;
};

void run_export(const ExportFlags& f) {
  RunConfig c = resolve(f.common);
  const fs::path run(f.run);
  const fs::path out = f.out.empty() ? run : fs::path(f.out);
  fs::create_directories(out);
  const auto samples = load_run(run);
  if (samples.empty()) throw ConfigError("run contains no samples");
  std::optional<TrackSet> truth;
  if (!f.truth.empty()) {
    const auto sets = read_tracks_csv(f.truth);
    truth = sets.empty() ? TrackSet{} : sets.begin()->second;
  }
  const auto s = summarize_chain(samples, c.burn_in, truth ? &*truth : nullptr, c.ospa, f.bins);
  {
    auto os = open_out(out / "trace.csv");
    os << "iter,log_joint,K\n";
    for (std::size_t i = 0; i < s.iterations.size(); ++i)
      os << s.iterations[i] << ',' << s.log_joint[i] << ',' << s.total_targets[i] << '\n';
  }
  {
    auto os = open_out(out / "param_summary.csv");
    os << "name,mean,sd,mode\n";
    for (const auto& p : s.params) os << p.name << ',' << p.mean << ',' << p.sd << ',' << p.hist.mode() << '\n';
  }
  {
    auto os = open_out(out / "param_hist.csv");
    os << "name,bin,center,count\n";
    for (const auto& p : s.params)
      for (std::size_t b = 0; b < p.hist.counts.size(); ++b)
        os << p.name << ',' << b << ',' << p.hist.bin_center(b) << ',' << p.hist.counts[b] << '\n';
  }
  {
    auto os = open_out(out / "counts.csv");
    os << "frame,mode\n";
    for (std::size_t t = 0; t < s.count_mode.size(); ++t) os << t + 1 << ',' << s.count_mode[t] << '\n';
  }
  if (truth) {
    auto os = open_out(out / "ospa.csv");
    os << "frame,ospa\n";
    for (std::size_t t = 0; t < s.ospa.size(); ++t) os << t + 1 << ',' << s.ospa[t] << '\n';
  }
  if (f.replicate_frame) {
    const auto& last = samples.back();
    const int t = *f.replicate_frame;
    if (t < 1 || t > last.params.frames) throw ConfigError("replicated frame out of range");
    const auto states = states_at(last.tracks, t);
    write_image_csv(out / ("replicated_frame_" + std::to_string(t) + ".csv"),
                    render_frame(states, t, last.params));
  }
  std::cout << "exported " << s.iterations.size() << " samples to " << out.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian multi-target track-before-detect"};
  app.require_subcommand(1);

  SimulateFlags sim;
  auto* simulate = app.add_subcommand("simulate", "simulate an image sequence");
  simulate->add_option("--seed", sim.seed, "random seed")->required();
  simulate->add_option("--params", sim.params_path, "model parameters JSON");
  simulate->add_option("--scenario", sim.scenario, "crossing | prior");
  simulate->add_option("--out", sim.out, "output directory");
  simulate->add_flag("--csv", sim.csv, "also write per-frame CSV images");

  RunFlags trk, lrn;
  auto make_run = [&](const char* name, const char* help, RunFlags& f, bool learn) {
    auto* cmd = app.add_subcommand(name, help);
    add_common(cmd, f.common);
    cmd->add_option("--seed", f.common.seed, "random seed")->required();
    cmd->add_option("--images", f.images, "MTS file or CSV frame directory");
    cmd->add_option("--params", f.params_path, "model parameters JSON");
    cmd->add_option("--init-tracks", f.init_tracks, "initial tracks CSV (last sample used)");
    cmd->add_option("--out", f.out, "output directory");
    cmd->add_flag("--init-nn", f.init_nn, "start from the nearest-neighbour baseline tracks");
    if (learn) {
      cmd->add_option("--init-params", f.init_params, "initial parameters JSON");
      cmd->add_option("--n3", f.common.n3, "parameter updates per iteration");
    }
    return cmd;
  };
  auto* track = make_run("track", "sample tracks with known parameters", trk, false);
  auto* learn = make_run("learn", "sample tracks and parameters", lrn, true);

  EvaluateFlags ev;
  auto* evaluate = app.add_subcommand("evaluate", "OSPA of a run against truth");
  add_common(evaluate, ev.common);
  evaluate->add_option("--run", ev.run, "run directory")->required();
  evaluate->add_option("--truth", ev.truth, "truth tracks CSV")->required();
  evaluate->add_option("--images", ev.images, "images, enables the nearest-neighbour baseline");
  evaluate->add_option("--nn-threshold", ev.nn_threshold, "baseline detection threshold");
  evaluate->add_option("--nn-gate", ev.nn_gate, "baseline gate radius");
  evaluate->add_option("--out", ev.out, "output CSV");

  ExportFlags ex;
  auto* exporter = app.add_subcommand("export", "summary tables of a run");
  add_common(exporter, ex.common);
  exporter->add_option("--run", ex.run, "run directory")->required();
  exporter->add_option("--truth", ex.truth, "truth tracks CSV");
  exporter->add_option("--out", ex.out, "output directory");
  exporter->add_option("--bins", ex.bins, "histogram bins");
  exporter->add_option("--replicate-frame", ex.replicate_frame, "render frame t of the last sample");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::config);
  }

  try {
    if (*simulate) run_simulate(sim);
    else if (*track) run_sampler(trk, false);
    else if (*learn) run_sampler(lrn, true);
    else if (*evaluate) run_evaluate(ev);
    else if (*exporter) run_export(ex);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::data_format);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::numerical);
  }
  return 0;
}
