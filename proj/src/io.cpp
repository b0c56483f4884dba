#include "mtt/io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstring>
#include <fstream>
#include <regex>
#include <sstream>

#include "mtt/errors.hpp"
#include "mtt/representation.hpp"

namespace mtt {

namespace fs = std::filesystem;

namespace {

std::string fmt(double x) {
  std::array<char, 32> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), res.ptr);
}

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(const unsigned char* b) {
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

double parse_double(const std::string& field, const std::string& where) {
  const char* first = field.data();
  const char* last = field.data() + field.size();
  while (first < last && std::isspace(static_cast<unsigned char>(*first))) ++first;
  while (last > first && std::isspace(static_cast<unsigned char>(last[-1]))) --last;
  double v = 0.0;
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last)
    throw FormatError(FormatErrorKind::parse, "cannot parse '" + field + "' in " + where);
  return v;
}

long parse_long(const std::string& field, const std::string& where) {
  long v = 0;
  auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size())
    throw FormatError(FormatErrorKind::parse, "cannot parse '" + field + "' in " + where);
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string chomp(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == '\n')) s.pop_back();
  return s;
}

std::ofstream open_out(const fs::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw FormatError(FormatErrorKind::io, "cannot create " + path.parent_path().string() + ": " + ec.message());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError(FormatErrorKind::io, "cannot open " + path.string() + " for writing");
  return os;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError(FormatErrorKind::io, "cannot open " + path.string());
  return is;
}

}  // namespace

void write_mts(const fs::path& path, const ImageStack& y) {
  auto os = open_out(path);
  os.write("MTS1", 4);
  put_u32(os, static_cast<std::uint32_t>(y.frames()));
  put_u32(os, static_cast<std::uint32_t>(y.rows()));
  put_u32(os, static_cast<std::uint32_t>(y.cols()));
  for (int t = 1; t <= y.frames(); ++t) {
    const Image& img = y.frame(t);
    for (Eigen::Index i = 0; i < img.size(); ++i) {
      const float f = static_cast<float>(img.data()[i]);
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      put_u32(os, bits);
    }
  }
  if (!os) throw FormatError(FormatErrorKind::io, "failed writing " + path.string());
}

ImageStack read_mts(const fs::path& path) {
  auto is = open_in(path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "MTS1", 4) != 0)
    throw FormatError(FormatErrorKind::bad_magic, path.string() + " is not an MTS1 image stack");
  if (bytes.size() < 16) throw FormatError(FormatErrorKind::truncated, path.string() + " has a truncated header");
  const std::uint64_t n = get_u32(&bytes[4]);
  const std::uint64_t rows = get_u32(&bytes[8]);
  const std::uint64_t cols = get_u32(&bytes[12]);
  if (n == 0 || rows == 0 || cols == 0)
    throw FormatError(FormatErrorKind::dimension_mismatch, path.string() + " declares an empty stack");
  const std::uint64_t expected = 16 + 4 * n * rows * cols;
  if (bytes.size() < expected)
    throw FormatError(FormatErrorKind::truncated, path.string() + " is shorter than its declared size");
  if (bytes.size() > expected)
    throw FormatError(FormatErrorKind::dimension_mismatch, path.string() + " is longer than its declared size");
  ImageStack y(static_cast<int>(n), static_cast<int>(rows), static_cast<int>(cols));
  std::size_t off = 16;
  for (int t = 1; t <= y.frames(); ++t) {
    Image& img = y.frame(t);
    for (Eigen::Index i = 0; i < img.size(); ++i, off += 4) {
      const std::uint32_t bits = get_u32(&bytes[off]);
      float f;
      std::memcpy(&f, &bits, 4);
      img.data()[i] = f;
    }
  }
  return y;
}

void write_image_csv(const fs::path& path, const Image& img) {
  auto os = open_out(path);
  for (Eigen::Index r = 0; r < img.rows(); ++r) {
    for (Eigen::Index c = 0; c < img.cols(); ++c) {
      if (c) os << ',';
      os << fmt(img(r, c));
    }
    os << '\n';
  }
}

void write_csv_frames(const fs::path& dir, const ImageStack& y) {
  fs::create_directories(dir);
  for (int t = 1; t <= y.frames(); ++t) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%04d.csv", t);
    write_image_csv(dir / name, y.frame(t));
  }
}

ImageStack read_csv_frames(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw FormatError(FormatErrorKind::io, dir.string() + " is not a directory");
  const std::regex pattern(R"(frame_(\d+)\.csv)");
  std::vector<std::pair<long, fs::path>> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) files.emplace_back(std::stol(m[1].str()), entry.path());
  }
  if (files.empty()) throw FormatError(FormatErrorKind::truncated, dir.string() + " contains no frame files");
  std::sort(files.begin(), files.end());
  for (std::size_t i = 0; i < files.size(); ++i)
    if (files[i].first != static_cast<long>(i) + 1)
      throw FormatError(FormatErrorKind::truncated, dir.string() + " has a gap in its frame numbering");
  std::vector<Image> frames;
  for (const auto& [idx, path] : files) {
    auto is = open_in(path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(is, line)) {
      line = chomp(line);
      if (line.empty()) continue;
      std::vector<double> row;
      for (const auto& f : split_csv(line)) row.push_back(parse_double(f, path.string()));
      if (!rows.empty() && row.size() != rows.front().size())
        throw FormatError(FormatErrorKind::dimension_mismatch, path.string() + " has ragged rows");
      rows.push_back(std::move(row));
    }
    if (rows.empty()) throw FormatError(FormatErrorKind::truncated, path.string() + " is empty");
    Image img(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t c = 0; c < rows[r].size(); ++c)
        img(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    if (!frames.empty() && (img.rows() != frames.front().rows() || img.cols() != frames.front().cols()))
      throw FormatError(FormatErrorKind::dimension_mismatch, path.string() + " differs in size from frame 1");
    frames.push_back(std::move(img));
  }
  ImageStack y(static_cast<int>(frames.size()), static_cast<int>(frames.front().rows()),
               static_cast<int>(frames.front().cols()));
  for (int t = 1; t <= y.frames(); ++t) y.frame(t) = frames[static_cast<std::size_t>(t - 1)];
  return y;
}

ImageStack read_images(const fs::path& path) {
  return fs::is_directory(path) ? read_csv_frames(path) : read_mts(path);
}

void check_dimensions(const ImageStack& y, const ModelParams& params) {
  if (y.frames() != params.frames || y.rows() != params.geom.rows || y.cols() != params.geom.cols) {
    std::ostringstream os;
    os << "images are " << y.frames() << "x" << y.rows() << "x" << y.cols() << " but parameters expect "
       << params.frames << "x" << params.geom.rows << "x" << params.geom.cols;
    throw FormatError(FormatErrorKind::dimension_mismatch, os.str());
  }
}

void write_tracks_header(std::ostream& os) { os << kTracksHeader << '\n'; }

void write_tracks_rows(std::ostream& os, long sample, const TrackSet& tracks) {
  for (std::size_t k = 0; k < tracks.size(); ++k) {
    const auto& tr = tracks[k];
    const int label = tr.label > 0 ? tr.label : static_cast<int>(k) + 1;
    for (int t = tr.birth; t <= tr.last(); ++t) {
      const auto& x = tr.at(t);
      os << sample << ',' << label << ',' << t << ',' << fmt(x.a) << ',' << fmt(x.s(0)) << ','
         << fmt(x.s(1)) << ',' << fmt(x.v(0)) << ',' << fmt(x.v(1)) << '\n';
    }
  }
}

void write_tracks_csv(const fs::path& path, const TrackSet& tracks) {
  auto os = open_out(path);
  write_tracks_header(os);
  write_tracks_rows(os, 0, tracks);
}

std::map<long, TrackSet> read_tracks_csv(const fs::path& path) {
  auto is = open_in(path);
  std::string line;
  if (!std::getline(is, line) || chomp(line) != kTracksHeader)
    throw FormatError(FormatErrorKind::parse, path.string() + " lacks the track table header");
  std::map<long, std::map<int, Track>> acc;
  long lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    line = chomp(line);
    if (line.empty()) continue;
    const auto f = split_csv(line);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (f.size() != 8) throw FormatError(FormatErrorKind::parse, "expected 8 fields at " + where);
    const long sample = parse_long(f[0], where);
    const int label = static_cast<int>(parse_long(f[1], where));
    const int frame = static_cast<int>(parse_long(f[2], where));
    TargetState x;
    x.a = parse_double(f[3], where);
    x.s = Vec2(parse_double(f[4], where), parse_double(f[5], where));
    x.v = Vec2(parse_double(f[6], where), parse_double(f[7], where));
    auto& tr = acc[sample][label];
    if (tr.states.empty()) {
      tr.label = label;
      tr.birth = frame;
    } else if (frame != tr.last() + 1) {
      throw FormatError(FormatErrorKind::parse, "non-contiguous frames for track " + f[1] + " at " + where);
    }
    tr.states.push_back(x);
  }
  std::map<long, TrackSet> out;
  for (auto& [sample, tracks] : acc) {
    TrackSet ts;
    for (auto& [label, tr] : tracks) ts.push_back(std::move(tr));
    out[sample] = std::move(ts);
  }
  return out;
}

nlohmann::json diagnostics_json(const SampleRecord& rec) {
  nlohmann::json j;
  j["iter"] = rec.iteration;
  j["log_joint"] = rec.log_joint;
  j["K"] = rec.tracks.size();
  j["acc"] = {{"bd", rec.stats.rate(MoveType::birth_death)},
              {"ms", rec.stats.rate(MoveType::multi_step)},
              {"os", rec.stats.rate(MoveType::one_step)},
              {"ss", rec.stats.rate(MoveType::state_swap)}};
  j["counts"] = rec.counts;
  return j;
}

void write_params_header(std::ostream& os, int frames) {
  os << "iter";
  for (const auto& n : param_names(frames)) os << ',' << n;
  os << '\n';
}

void write_params_row(std::ostream& os, long iteration, const ModelParams& params) {
  os << iteration;
  for (double v : param_vector(params)) os << ',' << fmt(v);
  os << '\n';
}

ParamsTable read_params_csv(const fs::path& path) {
  auto is = open_in(path);
  std::string line;
  if (!std::getline(is, line)) throw FormatError(FormatErrorKind::truncated, path.string() + " is empty");
  auto header = split_csv(chomp(line));
  if (header.empty() || header.front() != "iter")
    throw FormatError(FormatErrorKind::parse, path.string() + " lacks the parameter table header");
  ParamsTable table;
  table.names.assign(header.begin() + 1, header.end());
  long lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    line = chomp(line);
    if (line.empty()) continue;
    const auto f = split_csv(line);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (f.size() != header.size()) throw FormatError(FormatErrorKind::parse, "wrong field count at " + where);
    table.iterations.push_back(parse_long(f[0], where));
    std::vector<double> row;
    for (std::size_t i = 1; i < f.size(); ++i) row.push_back(parse_double(f[i], where));
    table.rows.push_back(std::move(row));
  }
  return table;
}

nlohmann::json params_to_json(const ModelParams& p) {
  nlohmann::json j;
  j["rows"] = p.geom.rows;
  j["cols"] = p.geom.cols;
  j["frames"] = p.frames;
  j["pitch"] = p.geom.pitch;
  j["psf_sigma"] = p.geom.psf_sigma;
  j["trunc"] = p.geom.trunc;
  j["dt"] = p.dt;
  j["mu_bi"] = p.dyn.mu_bi;
  j["mu_bx"] = p.dyn.mu_bx;
  j["mu_by"] = p.dyn.mu_by;
  j["var_bi"] = p.dyn.var_bi;
  j["var_bp"] = p.dyn.var_bp;
  j["var_bv"] = p.dyn.var_bv;
  j["var_i"] = p.dyn.var_i;
  j["var_x"] = p.dyn.var_x;
  j["var_y"] = p.dyn.var_y;
  j["p_s"] = p.p_s;
  j["lambda_b"] = p.lambda_b;
  j["background"] = p.background;
  j["noise_var"] = p.noise_var;
  j["max_targets_per_frame"] = p.max_targets_per_frame;
  return j;
}

ModelParams params_from_json(const nlohmann::json& j) {
  try {
    ModelParams p;
    p.geom.rows = j.at("rows").get<int>();
    p.geom.cols = j.at("cols").get<int>();
    p.frames = j.at("frames").get<int>();
    p.geom.pitch = j.value("pitch", 1.0);
    p.geom.psf_sigma = j.value("psf_sigma", 1.0);
    p.geom.trunc = j.value("trunc", default_truncation(p.geom.psf_sigma, p.geom.pitch));
    p.dt = j.value("dt", 1.0);
    p.dyn.mu_bi = j.at("mu_bi").get<double>();
    p.dyn.mu_bx = j.at("mu_bx").get<double>();
    p.dyn.mu_by = j.at("mu_by").get<double>();
    p.dyn.var_bi = j.at("var_bi").get<double>();
    p.dyn.var_bp = j.at("var_bp").get<double>();
    p.dyn.var_bv = j.at("var_bv").get<double>();
    p.dyn.var_i = j.at("var_i").get<double>();
    p.dyn.var_x = j.at("var_x").get<double>();
    p.dyn.var_y = j.at("var_y").get<double>();
    p.p_s = j.at("p_s").get<double>();
    p.lambda_b = j.at("lambda_b").get<double>();
    auto per_frame = [&](const char* key) {
      const auto& v = j.at(key);
      if (v.is_number()) return std::vector<double>(static_cast<std::size_t>(p.frames), v.get<double>());
      return v.get<std::vector<double>>();
    };
    p.background = per_frame("background");
    p.noise_var = per_frame("noise_var");
    p.max_targets_per_frame = j.value("max_targets_per_frame", 0);
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid parameter description: ") + e.what());
  }
}

std::vector<double> read_log_joint_trace(const fs::path& diagnostics) {
  auto is = open_in(diagnostics);
  std::vector<double> out;
  std::string line;
  while (std::getline(is, line)) {
    if (chomp(line).empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line).at("log_joint").get<double>());
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(FormatErrorKind::parse, diagnostics.string() + ": " + e.what());
    }
  }
  return out;
}

}  // namespace mtt
