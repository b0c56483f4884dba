#pragma once

#include <string>
#include <vector>

namespace mtt {

/// Sensor geometry: pixel pitch, point spread width and truncation square size.
struct Geometry {
  int rows = 0;
  int cols = 0;
  double pitch = 1.0;
  double psf_sigma = 1.0;
  int trunc = 5;  ///< side length of the odd truncation square, in pixels
};

/// Smallest odd truncation size not below 1 + ceil(4 sigma) / pitch.
int default_truncation(double psf_sigma, double pitch);

/// Birth distribution and random-walk dynamics.
struct DynamicsParams {
  double mu_bi = 0.0;
  double mu_bx = 0.0;
  double mu_by = 0.0;
  double var_bi = 1.0;
  double var_bp = 1.0;
  double var_bv = 1.0;
  double var_i = 1.0;
  double var_x = 1.0;
  double var_y = 1.0;
};

struct ModelParams {
  Geometry geom;
  int frames = 0;
  double dt = 1.0;
  DynamicsParams dyn;
  double p_s = 0.9;
  double lambda_b = 0.1;
  std::vector<double> background;  ///< one entry per frame
  std::vector<double> noise_var;   ///< one entry per frame
  /// Hard cap on targets per frame; 0 disables the cap.
  int max_targets_per_frame = 0;

  double background_at(int t) const { return background[static_cast<std::size_t>(t - 1)]; }
  double noise_var_at(int t) const { return noise_var[static_cast<std::size_t>(t - 1)]; }

  /// Throws ConfigError on out-of-range or inconsistent values.
  void validate() const;
};

/// Convenience constructor with constant background and noise.
ModelParams make_params(int rows, int cols, int frames, const DynamicsParams& dyn, double p_s,
                        double lambda_b, double background, double noise_var,
                        double psf_sigma = 1.0, double pitch = 1.0, double dt = 1.0);

/// Flat parameter vector layout shared by output tables and the random-walk updates:
/// mu_bi mu_bx mu_by var_bi var_bp var_bv var_i var_x var_y p_s lambda_b b_1..b_n var_r_1..var_r_n.
std::vector<std::string> param_names(int frames);
std::vector<double> param_vector(const ModelParams& params);
void assign_param_vector(ModelParams& params, const std::vector<double>& values);

enum class ParamScale { identity, log, logit };
ParamScale param_scale(std::size_t index, int frames);

}  // namespace mtt
