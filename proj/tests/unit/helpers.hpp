#pragma once

#include <vector>

#include "mtt/model.hpp"
#include "mtt/representation.hpp"

namespace mtt::testing {

inline TargetState state(double a, double s1, double s2, double v1 = 0.0, double v2 = 0.0) {
  TargetState x;
  x.a = a;
  x.s = Vec2(s1, s2);
  x.v = Vec2(v1, v2);
  return x;
}

/// Track moving at constant velocity from `first`.
inline Track line_track(int birth, int length, const TargetState& first) {
  Track tr;
  tr.birth = birth;
  TargetState x = first;
  for (int k = 0; k < length; ++k) {
    tr.states.push_back(x);
    x.s += x.v;
  }
  return tr;
}

/// Unit-scale dynamics used by most small tests.
inline DynamicsParams unit_dynamics() {
  DynamicsParams d;
  d.mu_bi = 20.0;
  d.mu_bx = 8.0;
  d.mu_by = 8.0;
  d.var_bi = 4.0;
  d.var_bp = 9.0;
  d.var_bv = 1.0;
  d.var_i = 0.5;
  d.var_x = 0.2;
  d.var_y = 0.3;
  return d;
}

inline ModelParams small_params(int rows = 16, int cols = 16, int frames = 4) {
  return make_params(rows, cols, frames, unit_dynamics(), 0.8, 0.3, 2.0, 1.0);
}

}  // namespace mtt::testing
