#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "mtt/metrics.hpp"
#include "mtt/model.hpp"
#include "mtt/sampler.hpp"

namespace mtt {

/// Binary image stack: "MTS1", little-endian u32 frames, rows, cols, then little-endian
/// float32 values frame by frame in row-major order.
void write_mts(const std::filesystem::path& path, const ImageStack& y);
ImageStack read_mts(const std::filesystem::path& path);

/// Directory of frame_0001.csv, frame_0002.csv, ... with one image row per line.
void write_csv_frames(const std::filesystem::path& dir, const ImageStack& y);
ImageStack read_csv_frames(const std::filesystem::path& dir);

/// Reads either format, choosing by whether the path is a directory.
ImageStack read_images(const std::filesystem::path& path);

/// Checks that images match the geometry and frame count of the parameters.
void check_dimensions(const ImageStack& y, const ModelParams& params);

inline constexpr const char* kTracksHeader = "sample,track,frame,a,sx,sy,vx,vy";

void write_tracks_header(std::ostream& os);
void write_tracks_rows(std::ostream& os, long sample, const TrackSet& tracks);
void write_tracks_csv(const std::filesystem::path& path, const TrackSet& tracks);

/// Track sets by sample index.
std::map<long, TrackSet> read_tracks_csv(const std::filesystem::path& path);

nlohmann::json diagnostics_json(const SampleRecord& record);
void write_params_header(std::ostream& os, int frames);
void write_params_row(std::ostream& os, long iteration, const ModelParams& params);

struct ParamsTable {
  std::vector<std::string> names;
  std::vector<long> iterations;
  std::vector<std::vector<double>> rows;
};
ParamsTable read_params_csv(const std::filesystem::path& path);

nlohmann::json params_to_json(const ModelParams& params);
ModelParams params_from_json(const nlohmann::json& j);

std::vector<double> read_log_joint_trace(const std::filesystem::path& diagnostics);

void write_image_csv(const std::filesystem::path& path, const Image& img);

}  // namespace mtt
