#pragma once

#include <compare>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace mtt {

using Image = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec2 = Eigen::Vector2d;

struct Pixel {
  int row = 0;
  int col = 0;
  auto operator<=>(const Pixel&) const = default;
};

/// Single target state: intensity, position and velocity. Positions are spatial
/// coordinates; pixel (r, c) sits at (r * pitch, c * pitch).
struct TargetState {
  double a = 0.0;
  Vec2 s = Vec2::Zero();
  Vec2 v = Vec2::Zero();

  Eigen::Matrix<double, 5, 1> to_vector() const;
  static TargetState from_vector(const Eigen::Matrix<double, 5, 1>& x);
};

/// Contiguous lifespan of one target. Frames are numbered from 1.
struct Track {
  int label = 0;
  int birth = 1;
  std::vector<TargetState> states;

  int length() const { return static_cast<int>(states.size()); }
  int last() const { return birth + length() - 1; }
  /// First frame at which the target is no longer alive.
  int death() const { return birth + length(); }
  bool alive_at(int t) const { return t >= birth && t <= last(); }
  const TargetState& at(int t) const { return states[static_cast<std::size_t>(t - birth)]; }
  TargetState& at(int t) { return states[static_cast<std::size_t>(t - birth)]; }
};

using TrackSet = std::vector<Track>;

/// Frames 1..n of equal-sized images.
class ImageStack {
 public:
  ImageStack() = default;
  ImageStack(int frames, int rows, int cols);

  int frames() const { return static_cast<int>(frames_.size()); }
  int rows() const { return rows_; }
  int cols() const { return cols_; }

  const Image& frame(int t) const { return frames_.at(static_cast<std::size_t>(t - 1)); }
  Image& frame(int t) { return frames_.at(static_cast<std::size_t>(t - 1)); }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<Image> frames_;
};

}  // namespace mtt
