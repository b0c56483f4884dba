#include "mtt/representation.hpp"

#include <algorithm>
#include <limits>
#include <sstream>
#include <tuple>

#include "mtt/errors.hpp"
#include "mtt/model.hpp"

namespace mtt {

bool newborn_less(const TargetState& lhs, const TargetState& rhs) {
  return std::tie(lhs.a, lhs.s(0), lhs.s(1)) < std::tie(rhs.a, rhs.s(0), rhs.s(1));
}

void validate_sequence(const MttSequence& seq) {
  std::size_t prev = 0;
  for (int t = 1; t <= seq.size(); ++t) {
    const MttFrame& f = seq.frame(t);
    std::ostringstream os;
    if (f.survival.size() != prev) {
      os << "frame " << t << " has " << f.survival.size() << " survival flags for " << prev
         << " previous targets";
      throw ConfigError(os.str());
    }
    std::size_t survivors = static_cast<std::size_t>(
        std::count_if(f.survival.begin(), f.survival.end(), [](std::uint8_t c) { return c != 0; }));
    if (f.births < 0 || f.states.size() != survivors + static_cast<std::size_t>(f.births)) {
      os << "frame " << t << " has " << f.states.size() << " states for " << survivors
         << " survivors and " << f.births << " births";
      throw ConfigError(os.str());
    }
    prev = f.states.size();
  }
}

bool ordering_holds(const MttSequence& seq) {
  for (const auto& f : seq.frames) {
    std::size_t first = f.states.size() - static_cast<std::size_t>(f.births);
    for (std::size_t j = first + 1; j < f.states.size(); ++j)
      if (!newborn_less(f.states[j - 1], f.states[j])) return false;
  }
  return true;
}

void canonicalize(TrackSet& tracks) {
  std::stable_sort(tracks.begin(), tracks.end(), [](const Track& l, const Track& r) {
    if (l.birth != r.birth) return l.birth < r.birth;
    return newborn_less(l.states.front(), r.states.front());
  });
  for (std::size_t i = 0; i < tracks.size(); ++i) tracks[i].label = static_cast<int>(i) + 1;
}

TrackSet tracks_from_mtt(const MttSequence& seq) {
  validate_sequence(seq);
  TrackSet tracks;
  std::vector<std::size_t> owner;  // track index of each target in the previous frame
  for (int t = 1; t <= seq.size(); ++t) {
    const MttFrame& f = seq.frame(t);
    std::vector<std::size_t> next;
    std::size_t j = 0;
    for (std::size_t i = 0; i < f.survival.size(); ++i) {
      if (!f.survival[i]) continue;
      tracks[owner[i]].states.push_back(f.states[j++]);
      next.push_back(owner[i]);
    }
    for (int b = 0; b < f.births; ++b) {
      Track tr;
      tr.birth = t;
      tr.states.push_back(f.states[j++]);
      tracks.push_back(std::move(tr));
      next.push_back(tracks.size() - 1);
    }
    owner = std::move(next);
  }
  canonicalize(tracks);
  return tracks;
}

MttSequence mtt_from_tracks(const TrackSet& input, int frames) {
  TrackSet tracks = input;
  canonicalize(tracks);
  for (const auto& tr : tracks)
    if (tr.states.empty() || tr.birth < 1 || tr.last() > frames)
      throw ConfigError("track lies outside the frame range");
  MttSequence seq;
  seq.frames.resize(static_cast<std::size_t>(frames));
  std::vector<std::size_t> prev;
  for (int t = 1; t <= frames; ++t) {
    MttFrame& f = seq.frames[static_cast<std::size_t>(t - 1)];
    std::vector<std::size_t> cur;
    for (std::size_t k : prev) {
      bool alive = tracks[k].alive_at(t);
      f.survival.push_back(alive ? 1 : 0);
      if (alive) {
        cur.push_back(k);
        f.states.push_back(tracks[k].at(t));
      }
    }
    for (std::size_t k = 0; k < tracks.size(); ++k) {
      if (tracks[k].birth != t) continue;
      cur.push_back(k);
      f.states.push_back(tracks[k].states.front());
      f.births++;
    }
    prev = std::move(cur);
  }
  return seq;
}

double log_joint(const MttSequence& seq, const ModelParams& params, const ImageStack& y) {
  if (seq.size() != params.frames)
    throw FormatError(FormatErrorKind::dimension_mismatch, "sequence length differs from frame count");
  if (!ordering_holds(seq)) return -std::numeric_limits<double>::infinity();
  return log_joint(tracks_from_mtt(seq), params, y);
}

}  // namespace mtt
