#include "mtt/config.hpp"

#include <fstream>
#include <set>

#include "mtt/errors.hpp"
#include "mtt/io.hpp"

namespace mtt {

namespace {

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

AcceptRule parse_accept_rule(const std::string& text) {
  if (text == "min") return AcceptRule::min_one;
  if (text == "logistic") return AcceptRule::logistic;
  throw ConfigError("unknown acceptance rule '" + text + "'");
}

PriorConfig prior_from_json(const nlohmann::json& j, PriorConfig base) {
  auto normal = [&](const char* key, NormalMeanPrior& p) {
    if (!j.contains(key)) return;
    read_key(j.at(key), "mean", p.mean);
    read_key(j.at(key), "n0", p.n0);
  };
  auto inv_gamma = [&](const char* key, InverseGammaPrior& p) {
    if (!j.contains(key)) return;
    read_key(j.at(key), "shape", p.shape);
    read_key(j.at(key), "scale", p.scale);
  };
  normal("mu_bi", base.mu_bi);
  normal("mu_pos", base.mu_pos);
  normal("background", base.background);
  inv_gamma("var_bi", base.var_bi);
  inv_gamma("var_bp", base.var_bp);
  inv_gamma("var_bv", base.var_bv);
  inv_gamma("var_i", base.var_i);
  inv_gamma("var_x", base.var_x);
  inv_gamma("var_y", base.var_y);
  inv_gamma("noise_var", base.noise_var);
  if (j.contains("p_s")) {
    read_key(j.at("p_s"), "a", base.p_s.a);
    read_key(j.at("p_s"), "b", base.p_s.b);
  }
  if (j.contains("lambda_b")) {
    read_key(j.at("lambda_b"), "shape", base.lambda_b.shape);
    read_key(j.at("lambda_b"), "scale", base.lambda_b.scale);
  }
  base.validate();
  return base;
}

void apply_config_json(RunConfig& c, const nlohmann::json& j) {
  static const std::set<std::string> known{
      "model",       "n1",          "n2",        "n3",          "iterations",
      "burn_in",     "particles",   "ancestor_sampling",        "move_probs",
      "gamma_rule",  "accept_rule", "window_half_width",        "random_track_order",
      "check_every", "param_update", "mh_steps", "prior",       "seed",
      "chains",      "ospa_p",      "ospa_c",    "nn_gate",     "nn_threshold"};
  try {
    if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
    for (const auto& [key, value] : j.items())
      if (!known.count(key)) throw ConfigError("unknown configuration key '" + key + "'");
    if (j.contains("model")) c.model = params_from_json(j.at("model"));
    auto& s = c.sampler;
    read_key(j, "n1", s.n1);
    read_key(j, "n2", s.n2);
    read_key(j, "n3", s.n3);
    read_key(j, "iterations", c.iterations);
    read_key(j, "burn_in", c.burn_in);
    read_key(j, "particles", s.csmc.particles);
    read_key(j, "ancestor_sampling", s.csmc.ancestor_sampling);
    if (j.contains("move_probs")) {
      auto v = j.at("move_probs").get<std::vector<double>>();
      if (v.size() != kMoveTypes) throw ConfigError("move_probs needs four entries");
      for (std::size_t i = 0; i < kMoveTypes; ++i) s.move_probs[i] = v[i];
    }
    if (j.contains("gamma_rule")) s.proposal.gamma = GammaRule::parse(j.at("gamma_rule").get<std::string>());
    if (j.contains("accept_rule")) s.proposal.accept = parse_accept_rule(j.at("accept_rule").get<std::string>());
    read_key(j, "window_half_width", s.proposal.window_half_width);
    read_key(j, "random_track_order", s.random_track_order);
    read_key(j, "check_every", s.check_every);
    if (j.contains("param_update")) {
      const auto v = j.at("param_update").get<std::string>();
      if (v == "gibbs") s.param_update = ParamUpdate::gibbs;
      else if (v == "metropolis") s.param_update = ParamUpdate::metropolis;
      else throw ConfigError("unknown param_update '" + v + "'");
    }
    read_key(j, "mh_steps", s.mh_steps);
    if (j.contains("prior")) s.prior = prior_from_json(j.at("prior"), s.prior);
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    read_key(j, "chains", c.chains);
    read_key(j, "ospa_p", c.ospa.p);
    read_key(j, "ospa_c", c.ospa.c);
    read_key(j, "nn_gate", c.nn_gate);
    if (j.contains("nn_threshold")) c.nn_threshold = j.at("nn_threshold").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open configuration " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
  RunConfig c;
  apply_config_json(c, j);
  return c;
}

}  // namespace mtt
