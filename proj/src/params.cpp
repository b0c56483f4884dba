#include "mtt/params.hpp"

#include <cmath>
#include <sstream>

#include "mtt/errors.hpp"

namespace mtt {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw ConfigError(msg);
}

bool finite(double x) { return std::isfinite(x); }

constexpr std::size_t kFixed = 11;

}  // namespace

int default_truncation(double psf_sigma, double pitch) {
  int l = 1 + static_cast<int>(std::ceil(std::ceil(4.0 * psf_sigma) / pitch - 1e-12));
  if (l % 2 == 0) ++l;
  return l;
}

void ModelParams::validate() const {
  require(geom.rows > 0 && geom.cols > 0, "image dimensions must be positive");
  require(frames > 0, "frame count must be positive");
  require(finite(geom.pitch) && geom.pitch > 0.0, "pixel pitch must be positive");
  require(finite(geom.psf_sigma) && geom.psf_sigma > 0.0, "psf width must be positive");
  require(geom.trunc > 0 && geom.trunc % 2 == 1, "truncation size must be a positive odd integer");
  require(finite(dt) && dt > 0.0, "time step must be positive");
  require(finite(dyn.mu_bi) && finite(dyn.mu_bx) && finite(dyn.mu_by), "birth means must be finite");
  for (double v : {dyn.var_bi, dyn.var_bp, dyn.var_bv, dyn.var_i, dyn.var_x, dyn.var_y})
    require(finite(v) && v > 0.0, "variances must be positive");
  require(finite(p_s) && p_s >= 0.0 && p_s <= 1.0, "survival probability must lie in [0, 1]");
  require(finite(lambda_b) && lambda_b >= 0.0, "birth rate must be non-negative");
  require(static_cast<int>(background.size()) == frames, "background needs one value per frame");
  require(static_cast<int>(noise_var.size()) == frames, "noise variance needs one value per frame");
  for (double b : background) require(finite(b), "background must be finite");
  for (double s : noise_var) require(finite(s) && s > 0.0, "noise variances must be positive");
  require(max_targets_per_frame >= 0, "target cap must be non-negative");
}

ModelParams make_params(int rows, int cols, int frames, const DynamicsParams& dyn, double p_s,
                        double lambda_b, double background, double noise_var, double psf_sigma,
                        double pitch, double dt) {
  ModelParams p;
  p.geom.rows = rows;
  p.geom.cols = cols;
  p.geom.pitch = pitch;
  p.geom.psf_sigma = psf_sigma;
  p.geom.trunc = default_truncation(psf_sigma, pitch);
  p.frames = frames;
  p.dt = dt;
  p.dyn = dyn;
  p.p_s = p_s;
  p.lambda_b = lambda_b;
  p.background.assign(static_cast<std::size_t>(frames), background);
  p.noise_var.assign(static_cast<std::size_t>(frames), noise_var);
  return p;
}

std::vector<std::string> param_names(int frames) {
  std::vector<std::string> names{"mu_bi", "mu_bx", "mu_by",  "var_bi", "var_bp", "var_bv",
                                 "var_i", "var_x", "var_y", "p_s",    "lambda_b"};
  for (int t = 1; t <= frames; ++t) names.push_back("b_" + std::to_string(t));
  for (int t = 1; t <= frames; ++t) names.push_back("var_r_" + std::to_string(t));
  return names;
}

std::vector<double> param_vector(const ModelParams& p) {
  const auto& d = p.dyn;
  std::vector<double> v{d.mu_bi, d.mu_bx, d.mu_by, d.var_bi, d.var_bp, d.var_bv,
                        d.var_i, d.var_x, d.var_y, p.p_s,    p.lambda_b};
  v.insert(v.end(), p.background.begin(), p.background.end());
  v.insert(v.end(), p.noise_var.begin(), p.noise_var.end());
  return v;
}

void assign_param_vector(ModelParams& p, const std::vector<double>& v) {
  const std::size_t n = static_cast<std::size_t>(p.frames);
  if (v.size() != kFixed + 2 * n) {
    std::ostringstream os;
    os << "parameter vector has " << v.size() << " entries, expected " << kFixed + 2 * n;
    throw ConfigError(os.str());
  }
  auto& d = p.dyn;
  d.mu_bi = v[0];
  d.mu_bx = v[1];
  d.mu_by = v[2];
  d.var_bi = v[3];
  d.var_bp = v[4];
  d.var_bv = v[5];
  d.var_i = v[6];
  d.var_x = v[7];
  d.var_y = v[8];
  p.p_s = v[9];
  p.lambda_b = v[10];
  p.background.assign(v.begin() + kFixed, v.begin() + static_cast<long>(kFixed + n));
  p.noise_var.assign(v.begin() + static_cast<long>(kFixed + n), v.end());
}

ParamScale param_scale(std::size_t index, int frames) {
  if (index < 3) return ParamScale::identity;
  if (index < 9) return ParamScale::log;
  if (index == 9) return ParamScale::logit;
  if (index == 10) return ParamScale::log;
  if (index < kFixed + static_cast<std::size_t>(frames)) return ParamScale::identity;
  return ParamScale::log;
}

}  // namespace mtt
