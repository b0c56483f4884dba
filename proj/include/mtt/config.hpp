#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "mtt/metrics.hpp"
#include "mtt/sampler.hpp"

namespace mtt {

/// Settings shared by the command-line subcommands. Loaded from a flat JSON object;
/// command-line flags override loaded values.
struct RunConfig {
  std::optional<ModelParams> model;
  SamplerConfig sampler;
  long iterations = 200;
  double burn_in = 0.25;
  std::optional<std::uint64_t> seed;
  int chains = 1;
  OspaParams ospa;
  double nn_gate = 5.0;
  std::optional<double> nn_threshold;
};

/// Recognised keys: model (object), n1, n2, n3, iterations, burn_in, particles,
/// ancestor_sampling, move_probs, gamma_rule, accept_rule, window_half_width,
/// random_track_order, check_every, param_update, mh_steps, prior (object), seed, chains,
/// ospa_p, ospa_c, nn_gate, nn_threshold.
void apply_config_json(RunConfig& config, const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

/// Prior keys: mu_bi, mu_pos, background as {mean, n0}; var_bi, var_bp, var_bv, var_i,
/// var_x, var_y, noise_var as {shape, scale}; p_s as {a, b}; lambda_b as {shape, scale}.
PriorConfig prior_from_json(const nlohmann::json& j, PriorConfig base = {});

AcceptRule parse_accept_rule(const std::string& text);

}  // namespace mtt
