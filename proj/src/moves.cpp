#include "mtt/moves.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mtt/dynamics.hpp"
#include "mtt/errors.hpp"
#include "mtt/velocity.hpp"

namespace mtt {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

MoveOutcome noop(MoveType type) {
  MoveOutcome out;
  out.type = type;
  return out;
}

MoveOutcome failed(MoveType type) {
  MoveOutcome out;
  out.type = type;
  out.proposed = true;
  return out;
}

std::vector<std::size_t> extendable(const TrackSet& tracks, int frames) {
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < tracks.size(); ++k)
    if (tracks[k].length() < frames) idx.push_back(k);
  return idx;
}

std::vector<std::size_t> reducible(const TrackSet& tracks) {
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < tracks.size(); ++k)
    if (tracks[k].length() > 1) idx.push_back(k);
  return idx;
}

// log probability of extending `tr` in the given direction, once selected
double log_direction_prob(const Track& tr, int frames, bool forward) {
  const bool can_fwd = tr.last() < frames;
  const bool can_bwd = tr.birth > 1;
  if (forward ? !can_fwd : !can_bwd) return kNegInf;
  return (can_fwd && can_bwd) ? std::log(0.5) : 0.0;
}

bool same_track(const Track& a, const Track& b) {
  if (a.birth != b.birth || a.states.size() != b.states.size()) return false;
  for (std::size_t j = 0; j < a.states.size(); ++j) {
    const auto& x = a.states[j];
    const auto& y = b.states[j];
    if (x.a != y.a || x.s != y.s || x.v != y.v) return false;
  }
  return true;
}

std::size_t find_track(const TrackSet& tracks, const Track& tr,
                       std::size_t skip = std::numeric_limits<std::size_t>::max()) {
  for (std::size_t k = 0; k < tracks.size(); ++k)
    if (k != skip && same_track(tracks[k], tr)) return k;
  throw NumericalError("proposed track not found after canonicalisation");
}

// Fills the prior change and evaluates the target part of the ratio. Returns false when
// the proposed state has zero prior density.
bool target_ratio(const LatentState& state, const MoveContext& ctx, MoveOutcome& out,
                  TrackSet& next) {
  next = apply_edit(state.tracks, out.edit);
  const double lp_new = log_prior(next, ctx.params);
  if (lp_new == kNegInf) {
    out.log_ratio = kNegInf;
    return false;
  }
  const double lp_old = log_prior(state.tracks, ctx.params);
  out.delta_log_joint =
      lp_new - lp_old + delta_log_likelihood(state.tracks, out.edit, ctx.params, ctx.y);
  return true;
}

Track concat(const Track& head_src, int head_last, const Track& tail_src, int tail_first) {
  Track tr;
  bool has_head = head_last >= head_src.birth;
  tr.birth = has_head ? head_src.birth : tail_first;
  if (has_head)
    for (int t = head_src.birth; t <= std::min(head_last, head_src.last()); ++t)
      tr.states.push_back(head_src.at(t));
  for (int t = std::max(tail_first, tail_src.birth); t <= tail_src.last(); ++t)
    tr.states.push_back(tail_src.at(t));
  return tr;
}

}  // namespace

const char* move_name(MoveType type) {
  switch (type) {
    case MoveType::birth_death: return "bd";
    case MoveType::multi_step: return "ms";
    case MoveType::one_step: return "os";
    case MoveType::state_swap: return "ss";
  }
  return "?";
}

void AcceptanceStats::record(const MoveOutcome& out) {
  if (!out.proposed) return;
  const auto i = static_cast<std::size_t>(out.type);
  attempted[i]++;
  if (out.accepted) accepted[i]++;
}

double AcceptanceStats::rate(MoveType type) const {
  const auto i = static_cast<std::size_t>(type);
  return attempted[i] > 0 ? static_cast<double>(accepted[i]) / static_cast<double>(attempted[i]) : 0.0;
}

MoveOutcome propose_birth_death(const LatentState& state, const MoveContext& ctx, Rng& rng) {
  const MoveType type = MoveType::birth_death;
  const auto& tracks = state.tracks;
  if (uniform01(rng) < 0.5) {
    auto b = sample_birth_track(tracks, ctx.y, ctx.params, rng, std::nullopt, ctx.proposal, ctx.cache);
    if (!b) return failed(type);
    MoveOutcome out = failed(type);
    out.edit.added.push_back(b->track);
    TrackSet next;
    if (!target_ratio(state, ctx, out, next)) return out;
    out.log_ratio = out.delta_log_joint - std::log(static_cast<double>(next.size())) - b->log_q;
    return out;
  }
  if (tracks.empty()) return noop(type);
  const std::size_t k = uniform_index(rng, tracks.size());
  MoveOutcome out = failed(type);
  out.edit.removed.push_back(k);
  TrackSet next;
  if (!target_ratio(state, ctx, out, next)) return out;
  const double log_qb =
      birth_density(tracks[k], next, ctx.y, ctx.params, std::nullopt, ctx.proposal, ctx.cache);
  out.log_ratio = out.delta_log_joint + log_qb + std::log(static_cast<double>(tracks.size()));
  return out;
}

MoveOutcome propose_multi_step(const LatentState& state, const MoveContext& ctx, Rng& rng) {
  const MoveType type = MoveType::multi_step;
  const auto& tracks = state.tracks;
  const int n = ctx.params.frames;
  if (uniform01(rng) < 0.5) {
    const auto ext = extendable(tracks, n);
    if (ext.empty()) return noop(type);
    const std::size_t k = ext[uniform_index(rng, ext.size())];
    const Track& tr = tracks[k];
    const bool can_fwd = tr.last() < n;
    const bool can_bwd = tr.birth > 1;
    const bool forward = can_fwd && can_bwd ? uniform01(rng) < 0.5 : can_fwd;
    double log_fwd = -std::log(static_cast<double>(ext.size())) + log_direction_prob(tr, n, forward);

    SegmentRequest req;
    req.kind = forward ? SegmentKind::extend_forward : SegmentKind::extend_backward;
    req.start = forward ? tr.last() + 1 : tr.birth - 1;
    req.anchor = forward ? tr.states.back() : tr.states.front();
    SegmentProposer proposer(tracks, ctx.y, ctx.params, ctx.proposal, ctx.cache);
    auto seg = proposer.sample(req, rng);
    if (!seg) return failed(type);
    log_fwd += seg->log_q;

    Track grown = tr;
    if (forward) {
      grown.states.insert(grown.states.end(), seg->states.begin(), seg->states.end());
    } else {
      grown.states.insert(grown.states.begin(), seg->states.begin(), seg->states.end());
      grown.birth = seg->first_frame;
    }
    MoveOutcome out = failed(type);
    out.edit.removed.push_back(k);
    out.edit.added.push_back(grown);
    TrackSet next;
    if (!target_ratio(state, ctx, out, next)) return out;
    const double log_rev = -std::log(static_cast<double>(reducible(next).size())) + std::log(0.5) -
                           std::log(static_cast<double>(grown.length() - 1));
    out.log_ratio = out.delta_log_joint + log_rev - log_fwd;
    return out;
  }

  const auto red = reducible(tracks);
  if (red.empty()) return noop(type);
  const std::size_t k = red[uniform_index(rng, red.size())];
  const Track& tr = tracks[k];
  const bool forward = uniform01(rng) < 0.5;  // forward keeps the head
  const int cut = 1 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(tr.length() - 1)));
  const double log_fwd = -std::log(static_cast<double>(red.size())) + std::log(0.5) -
                         std::log(static_cast<double>(tr.length() - 1));
  Track kept;
  std::vector<TargetState> dropped;
  if (forward) {
    kept.birth = tr.birth;
    kept.states.assign(tr.states.begin(), tr.states.begin() + cut);
    dropped.assign(tr.states.begin() + cut, tr.states.end());
  } else {
    kept.birth = tr.birth + cut;
    kept.states.assign(tr.states.begin() + cut, tr.states.end());
    dropped.assign(tr.states.begin(), tr.states.begin() + cut);
  }
  MoveOutcome out = failed(type);
  out.edit.removed.push_back(k);
  out.edit.added.push_back(kept);
  TrackSet next;
  if (!target_ratio(state, ctx, out, next)) return out;

  SegmentRequest req;
  req.kind = forward ? SegmentKind::extend_forward : SegmentKind::extend_backward;
  req.start = forward ? kept.last() + 1 : kept.birth - 1;
  req.anchor = forward ? kept.states.back() : kept.states.front();
  SegmentProposer proposer(next, ctx.y, ctx.params, ctx.proposal, ctx.cache);
  const double log_rev = -std::log(static_cast<double>(extendable(next, n).size())) +
                         log_direction_prob(kept, n, forward) + proposer.log_density(req, dropped);
  out.log_ratio = out.delta_log_joint + log_rev - log_fwd;
  return out;
}

MoveOutcome propose_one_step(const LatentState& state, const MoveContext& ctx, Rng& rng) {
  const MoveType type = MoveType::one_step;
  const auto& tracks = state.tracks;
  const int n = ctx.params.frames;
  const MotionModel model(ctx.params);
  if (uniform01(rng) < 0.5) {
    const auto ext = extendable(tracks, n);
    if (ext.empty()) return noop(type);
    const std::size_t k = ext[uniform_index(rng, ext.size())];
    const Track& tr = tracks[k];
    const bool can_fwd = tr.last() < n;
    const bool can_bwd = tr.birth > 1;
    const bool forward = can_fwd && can_bwd ? uniform01(rng) < 0.5 : can_fwd;
    double log_fwd = -std::log(static_cast<double>(ext.size())) + log_direction_prob(tr, n, forward);
    Track grown = tr;
    if (forward) {
      TargetState x = model.sample_transition(tr.states.back(), rng);
      log_fwd += model.log_transition(x, tr.states.back());
      grown.states.push_back(x);
    } else {
      Gaussian g = model.backward_conditional(tr.states.front());
      Eigen::VectorXd v = g.sample(rng);
      log_fwd += g.log_density(v);
      grown.states.insert(grown.states.begin(), TargetState::from_vector(v));
      grown.birth -= 1;
    }
    MoveOutcome out = failed(type);
    out.edit.removed.push_back(k);
    out.edit.added.push_back(grown);
    TrackSet next;
    if (!target_ratio(state, ctx, out, next)) return out;
    const double log_rev = -std::log(static_cast<double>(reducible(next).size())) + std::log(0.5);
    out.log_ratio = out.delta_log_joint + log_rev - log_fwd;
    return out;
  }

  const auto red = reducible(tracks);
  if (red.empty()) return noop(type);
  const std::size_t k = red[uniform_index(rng, red.size())];
  const Track& tr = tracks[k];
  const bool forward = uniform01(rng) < 0.5;  // forward drops the last state
  const double log_fwd = -std::log(static_cast<double>(red.size())) + std::log(0.5);
  Track kept = tr;
  TargetState dropped;
  if (forward) {
    dropped = kept.states.back();
    kept.states.pop_back();
  } else {
    dropped = kept.states.front();
    kept.states.erase(kept.states.begin());
    kept.birth += 1;
  }
  MoveOutcome out = failed(type);
  out.edit.removed.push_back(k);
  out.edit.added.push_back(kept);
  TrackSet next;
  if (!target_ratio(state, ctx, out, next)) return out;
  double log_rev = -std::log(static_cast<double>(extendable(next, n).size())) +
                   log_direction_prob(kept, n, forward);
  if (forward)
    log_rev += model.log_transition(dropped, kept.states.back());
  else
    log_rev += model.backward_conditional(kept.states.front()).log_density(dropped.to_vector());
  out.log_ratio = out.delta_log_joint + log_rev - log_fwd;
  return out;
}

double swap_selection_log_prob(const TrackSet& tracks, int frames, int t, std::size_t a,
                               std::size_t b) {
  std::vector<std::size_t> at_t, at_next;
  for (std::size_t k = 0; k < tracks.size(); ++k) {
    if (tracks[k].alive_at(t)) at_t.push_back(k);
    if (tracks[k].alive_at(t + 1)) at_next.push_back(k);
  }
  auto ordered = [&](std::size_t c, std::size_t d) {
    if (!tracks[c].alive_at(t) || !tracks[d].alive_at(t + 1)) return kNegInf;
    const Vec2& sc = tracks[c].at(t).s;
    double total = 0.0;
    double wd = 0.0;
    for (std::size_t e : at_next) {
      const double w = 1.0 / (1.0 + (sc - tracks[e].at(t + 1).s).norm());
      total += w;
      if (e == d) wd = w;
    }
    return -std::log(static_cast<double>(frames - 1)) - std::log(static_cast<double>(at_t.size())) +
           std::log(wd) - std::log(total);
  };
  if (a == b) return ordered(a, a);
  const double both[2] = {ordered(a, b), ordered(b, a)};
  return log_sum_exp(both);
}

Gaussian intensity_posterior(const TrackSet& others, std::span<const Track> affected,
                             const ImageStack& y, const ModelParams& params) {
  const auto& d = params.dyn;
  std::vector<int> offset;
  int dim = 0;
  int t_lo = params.frames + 1, t_hi = 0;
  for (const auto& tr : affected) {
    offset.push_back(dim);
    dim += tr.length();
    t_lo = std::min(t_lo, tr.birth);
    t_hi = std::max(t_hi, tr.last());
  }
  Eigen::MatrixXd prec = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd info = Eigen::VectorXd::Zero(dim);
  for (std::size_t k = 0; k < affected.size(); ++k) {
    const int o = offset[k];
    prec(o, o) += 1.0 / d.var_bi;
    info(o) += d.mu_bi / d.var_bi;
    for (int j = 1; j < affected[k].length(); ++j) {
      prec(o + j, o + j) += 1.0 / d.var_i;
      prec(o + j - 1, o + j - 1) += 1.0 / d.var_i;
      prec(o + j, o + j - 1) -= 1.0 / d.var_i;
      prec(o + j - 1, o + j) -= 1.0 / d.var_i;
    }
  }
  const Geometry& g = params.geom;
  std::vector<char> mask(static_cast<std::size_t>(g.rows * g.cols));
  for (int t = t_lo; t <= t_hi; ++t) {
    std::vector<std::pair<int, const TargetState*>> present;
    for (std::size_t k = 0; k < affected.size(); ++k)
      if (affected[k].alive_at(t)) present.emplace_back(offset[k] + (t - affected[k].birth), &affected[k].at(t));
    if (present.empty()) continue;
    const auto rest = states_at(others, t);
    const double var = params.noise_var_at(t);
    const double b = params.background_at(t);
    std::fill(mask.begin(), mask.end(), 0);
    std::vector<Pixel> pixels;
    for (const auto& [idx, x] : present) {
      Window w = truncation_square(x->s, g);
      for (int r = w.r0; r <= w.r1; ++r)
        for (int c = w.c0; c <= w.c1; ++c) {
          char& m = mask[static_cast<std::size_t>(r * g.cols + c)];
          if (!m) {
            m = 1;
            pixels.push_back({r, c});
          }
        }
    }
    Eigen::VectorXd gv(static_cast<Eigen::Index>(present.size()));
    for (Pixel p : pixels) {
      double resid = y.frame(t)(p.row, p.col) - b;
      for (const auto& x : rest) resid -= psf_value(x, p, params);
      for (std::size_t i = 0; i < present.size(); ++i) {
        const TargetState* x = present[i].second;
        gv(static_cast<Eigen::Index>(i)) =
            truncation_square(x->s, g).contains(p) ? psf_unit(x->s, p.row, p.col, g) : 0.0;
      }
      for (std::size_t i = 0; i < present.size(); ++i) {
        const int ii = present[i].first;
        info(ii) += gv(static_cast<Eigen::Index>(i)) * resid / var;
        for (std::size_t j = 0; j < present.size(); ++j)
          prec(ii, present[j].first) +=
              gv(static_cast<Eigen::Index>(i)) * gv(static_cast<Eigen::Index>(j)) / var;
      }
    }
  }
  Eigen::VectorXd mean = prec.ldlt().solve(info);
  return Gaussian::from_precision(mean, prec);
}

double refresh_log_density(const TrackSet& others, std::span<const Track> affected,
                           const ImageStack& y, const ModelParams& params) {
  double lq = 0.0;
  std::vector<double> a;
  for (const auto& tr : affected) {
    std::vector<Vec2> pos, vel;
    for (const auto& x : tr.states) {
      pos.push_back(x.s);
      vel.push_back(x.v);
      a.push_back(x.a);
    }
    lq += VelocityConditional(pos, params).log_density(vel);
  }
  Gaussian post = intensity_posterior(others, affected, y, params);
  return lq + post.log_density(Eigen::Map<const Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size())));
}

double refresh_sample(const TrackSet& others, std::span<Track> affected, const ImageStack& y,
                      const ModelParams& params, Rng& rng) {
  double lq = 0.0;
  for (auto& tr : affected) {
    std::vector<Vec2> pos;
    for (const auto& x : tr.states) pos.push_back(x.s);
    VelocityConditional vc(pos, params);
    const auto vel = vc.sample(rng);
    lq += vc.log_density(vel);
    for (std::size_t j = 0; j < vel.size(); ++j) tr.states[j].v = vel[j];
  }
  Gaussian post = intensity_posterior(others, std::span<const Track>(affected.data(), affected.size()), y, params);
  Eigen::VectorXd a = post.sample(rng);
  lq += post.log_density(a);
  Eigen::Index i = 0;
  for (auto& tr : affected)
    for (auto& x : tr.states) x.a = a(i++);
  return lq;
}

MoveOutcome propose_state_swap(const LatentState& state, const MoveContext& ctx, Rng& rng) {
  const MoveType type = MoveType::state_swap;
  const auto& tracks = state.tracks;
  const int n = ctx.params.frames;
  if (n < 2) return noop(type);
  const int t = 1 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(n - 1)));
  std::vector<std::size_t> at_t, at_next;
  for (std::size_t k = 0; k < tracks.size(); ++k) {
    if (tracks[k].alive_at(t)) at_t.push_back(k);
    if (tracks[k].alive_at(t + 1)) at_next.push_back(k);
  }
  if (at_t.empty() || at_next.empty()) return noop(type);
  const std::size_t i = at_t[uniform_index(rng, at_t.size())];
  std::vector<double> lw;
  for (std::size_t e : at_next)
    lw.push_back(-std::log1p((tracks[i].at(t).s - tracks[e].at(t + 1).s).norm()));
  const std::size_t j = at_next[sample_log_weights(rng, lw)];

  std::vector<Track> fresh;
  if (i == j) {
    fresh.push_back(concat(tracks[i], t, tracks[i], n + 1));
    fresh.push_back(concat(tracks[i], 0, tracks[i], t + 1));
  } else {
    fresh.push_back(concat(tracks[i], t, tracks[j], t + 1));
    Track q = concat(tracks[j], t, tracks[i], t + 1);
    if (!q.states.empty()) fresh.push_back(q);
  }
  TrackSet others;
  std::vector<Track> old;
  for (std::size_t k = 0; k < tracks.size(); ++k) {
    if (k == i || k == j) old.push_back(tracks[k]);
    else others.push_back(tracks[k]);
  }
  const double log_sel_fwd = swap_selection_log_prob(tracks, n, t, i, j);
  const double log_refresh_fwd = refresh_sample(others, fresh, ctx.y, ctx.params, rng);

  MoveOutcome out = failed(type);
  out.edit.removed.push_back(i);
  if (j != i) out.edit.removed.push_back(j);
  out.edit.added = fresh;
  TrackSet next;
  if (!target_ratio(state, ctx, out, next)) return out;

  const std::size_t p = find_track(next, fresh[0]);
  const std::size_t q = fresh.size() > 1 ? find_track(next, fresh[1], p) : p;
  const double log_sel_rev = swap_selection_log_prob(next, n, t, p, q);
  const double log_refresh_rev = refresh_log_density(others, old, ctx.y, ctx.params);
  out.log_ratio = out.delta_log_joint + log_sel_rev + log_refresh_rev - log_sel_fwd - log_refresh_fwd;
  return out;
}

MoveOutcome apply_move(MoveType type, LatentState& state, const MoveContext& ctx, Rng& rng) {
  MoveOutcome out;
  switch (type) {
    case MoveType::birth_death: out = propose_birth_death(state, ctx, rng); break;
    case MoveType::multi_step: out = propose_multi_step(state, ctx, rng); break;
    case MoveType::one_step: out = propose_one_step(state, ctx, rng); break;
    case MoveType::state_swap: out = propose_state_swap(state, ctx, rng); break;
  }
  if (!out.proposed) return out;
  if (out.log_ratio > kNegInf && !std::isnan(out.log_ratio) && std::log(uniform01(rng)) < out.log_ratio) {
    state.tracks = apply_edit(state.tracks, out.edit);
    state.log_joint += out.delta_log_joint;
    out.accepted = true;
  }
  return out;
}

MoveOutcome sweep(LatentState& state, const MoveContext& ctx, Rng& rng,
                  const MoveProbabilities& probs, AcceptanceStats* stats) {
  std::vector<double> lw;
  for (double p : probs) lw.push_back(p > 0.0 ? std::log(p) : kNegInf);
  const auto type = static_cast<MoveType>(sample_log_weights(rng, lw));
  MoveOutcome out = apply_move(type, state, ctx, rng);
  if (stats) stats->record(out);
  return out;
}

}  // namespace mtt
