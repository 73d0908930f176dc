#include "ctin/dataio.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ctin/errors.hpp"

namespace ctin {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<const char*, 14> kColumns = {
    "t", "gx", "gy", "gz", "ax", "ay", "az", "qw", "qx", "qy", "qz", "px", "py", "pz"};

constexpr double kQuatTolerance = 1e-3;
constexpr double kSpacingTolerance = 1e-9;

std::string row_label(std::size_t data_row) { return "row " + std::to_string(data_row); }

}  // namespace

DatasetKind parse_dataset_kind(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "ridi") return DatasetKind::kRidi;
  if (lower == "oxiod") return DatasetKind::kOxiod;
  if (lower == "ronin") return DatasetKind::kRonin;
  if (lower == "idol") return DatasetKind::kIdol;
  if (lower == "ctin") return DatasetKind::kCtin;
  if (lower == "synthetic") return DatasetKind::kSynthetic;
  throw ConfigError("unknown dataset kind '" + std::string(name) + "'");
}

std::string to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::kRidi: return "ridi";
    case DatasetKind::kOxiod: return "oxiod";
    case DatasetKind::kRonin: return "ronin";
    case DatasetKind::kIdol: return "idol";
    case DatasetKind::kCtin: return "ctin";
    case DatasetKind::kSynthetic: return "synthetic";
  }
  return "unknown";
}

OrientationSource parse_orientation_source(std::string_view name) {
  if (name == "ground_truth" || name == "gt") return OrientationSource::kGroundTruth;
  if (name == "device" || name == "device_estimated") return OrientationSource::kDeviceEstimated;
  if (name == "imu" || name == "imu_integrated") return OrientationSource::kImuIntegrated;
  throw ConfigError("unknown orientation source '" + std::string(name) + "'");
}

std::string to_string(OrientationSource source) {
  switch (source) {
    case OrientationSource::kGroundTruth: return "ground_truth";
    case OrientationSource::kDeviceEstimated: return "device_estimated";
    case OrientationSource::kImuIntegrated: return "imu_integrated";
  }
  return "unknown";
}

void ImuSequence::validate() const {
  const std::size_t n = timestamps.size();
  if (n < 2) throw DataError("sequence needs at least 2 samples, got " + std::to_string(n));
  if (gyro.size() != n || accel.size() != n || orientations.size() != n ||
      gt_positions.size() != n) {
    throw DataError("sequence channels have different lengths");
  }
  if (!device_orientations.empty() && device_orientations.size() != n) {
    throw DataError("device orientation channel length differs from sequence length");
  }
  if (!(meta.sample_rate_hz > 0.0) || !std::isfinite(meta.sample_rate_hz)) {
    throw DataError("sample rate must be positive");
  }
  const double expected_dt = 1.0 / meta.sample_rate_hz;
  for (std::size_t i = 1; i < n; ++i) {
    const double step = timestamps[i] - timestamps[i - 1];
    if (!(step > 0.0)) {
      throw DataError("timestamps not strictly increasing at " + row_label(i + 1));
    }
    if (std::abs(step - expected_dt) > kSpacingTolerance) {
      throw DataError("non-uniform sample spacing at " + row_label(i + 1));
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!gyro[i].allFinite() || !accel[i].allFinite() || !gt_positions[i].allFinite()) {
      throw DataError("non-finite value at " + row_label(i + 1));
    }
  }
}

OrientationSource select_orientation(DatasetKind kind, Phase phase) {
  switch (kind) {
    case DatasetKind::kRidi:
      return OrientationSource::kImuIntegrated;
    case DatasetKind::kOxiod:
      return phase == Phase::kTest ? OrientationSource::kDeviceEstimated
                                   : OrientationSource::kGroundTruth;
    case DatasetKind::kRonin:
      return phase == Phase::kTest ? OrientationSource::kDeviceEstimated
                                   : OrientationSource::kGroundTruth;
    case DatasetKind::kIdol:
    case DatasetKind::kCtin:
    case DatasetKind::kSynthetic:
      return OrientationSource::kGroundTruth;
  }
  throw ConfigError("unknown dataset kind");
}

std::vector<UnitQuaternion> orientation_stream(const ImuSequence& seq,
                                               OrientationSource source) {
  switch (source) {
    case OrientationSource::kGroundTruth:
      return seq.orientations;
    case OrientationSource::kDeviceEstimated:
      if (seq.device_orientations.empty()) {
        throw DataError("sequence has no device-estimated orientation channel");
      }
      return seq.device_orientations;
    case OrientationSource::kImuIntegrated: {
      if (seq.orientations.empty()) throw DataError("sequence has no initial orientation");
      std::vector<UnitQuaternion> out;
      out.reserve(seq.size());
      UnitQuaternion q = seq.orientations.front();
      const double dt = seq.dt();
      for (std::size_t i = 0; i < seq.size(); ++i) {
        out.push_back(q);
        q = quat_mul(q, quat_exp(seq.gyro[i], dt));
      }
      return out;
    }
  }
  throw ConfigError("unknown orientation source");
}

// ---------------------------------------------------------------------------
// CSV

fs::path sidecar_path(const fs::path& csv_path) {
  fs::path p = csv_path;
  p.replace_extension(".meta.json");
  return p;
}

std::vector<fs::path> list_sequences(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& text, std::size_t data_row, const char* column) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw FormatError("cannot parse '" + text + "' in column '" + column + "' at " +
                      row_label(data_row));
  }
}

void append_number(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

ImuSequence load_sequence(const fs::path& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw DataError("cannot open " + csv_path.string());

  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty file " + csv_path.string());
  const auto header = split_csv_line(line);
  for (std::size_t i = 0; i < kColumns.size(); ++i) {
    if (i >= header.size()) {
      throw FormatError("missing column '" + std::string(kColumns[i]) + "'");
    }
    if (header[i] != kColumns[i]) {
      throw FormatError("unexpected column '" + header[i] + "' at position " +
                        std::to_string(i + 1) + ", expected '" + kColumns[i] + "'");
    }
  }
  if (header.size() > kColumns.size()) {
    throw FormatError("unexpected column '" + header[kColumns.size()] + "'");
  }

  ImuSequence seq;
  std::size_t data_row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++data_row;
    const auto cells = split_csv_line(line);
    if (cells.size() != kColumns.size()) {
      throw FormatError(row_label(data_row) + " has " + std::to_string(cells.size()) +
                        " fields, expected " + std::to_string(kColumns.size()));
    }
    std::array<double, 14> v{};
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = parse_double(cells[i], data_row, kColumns[i]);

    if (!seq.timestamps.empty() && !(v[0] > seq.timestamps.back())) {
      throw DataError("timestamps not strictly increasing at " + row_label(data_row));
    }
    const double qn = quat_norm(v[7], v[8], v[9], v[10]);
    if (!(std::abs(qn - 1.0) <= kQuatTolerance)) {
      throw DataError("orientation quaternion norm " + std::to_string(qn) + " at " +
                      row_label(data_row));
    }
    seq.timestamps.push_back(v[0]);
    seq.gyro.emplace_back(v[1], v[2], v[3]);
    seq.accel.emplace_back(v[4], v[5], v[6]);
    seq.orientations.emplace_back(v[7], v[8], v[9], v[10]);
    seq.gt_positions.emplace_back(v[11], v[12], v[13]);
  }
  if (seq.timestamps.size() < 2) {
    throw DataError("sequence needs at least 2 samples in " + csv_path.string());
  }

  const fs::path meta_path = sidecar_path(csv_path);
  if (fs::exists(meta_path)) {
    std::ifstream mf(meta_path);
    json j;
    try {
      mf >> j;
      seq.meta.sample_rate_hz = j.at("sample_rate_hz").get<double>();
      seq.meta.dataset_kind = j.at("dataset_kind").get<std::string>();
      seq.meta.subject = j.at("subject").get<std::string>();
      seq.meta.gravity = j.at("gravity").get<double>();
    } catch (const json::exception& e) {
      throw FormatError("bad sidecar " + meta_path.string() + ": " + e.what());
    }
  } else {
    seq.meta.sample_rate_hz = 1.0 / (seq.timestamps[1] - seq.timestamps[0]);
    seq.meta.subject = csv_path.stem().string();
  }
  seq.validate();
  return seq;
}

void save_sequence(const ImuSequence& seq, const fs::path& csv_path) {
  seq.validate();
  std::string text;
  text.reserve(seq.size() * 14 * 24 + 64);
  for (std::size_t i = 0; i < kColumns.size(); ++i) {
    if (i) text += ',';
    text += kColumns[i];
  }
  text += '\n';
  for (std::size_t k = 0; k < seq.size(); ++k) {
    const UnitQuaternion& q = seq.orientations[k];
    const std::array<double, 14> row = {
        seq.timestamps[k], seq.gyro[k].x(), seq.gyro[k].y(), seq.gyro[k].z(),
        seq.accel[k].x(),  seq.accel[k].y(), seq.accel[k].z(), q.w(),
        q.x(),             q.y(),            q.z(),            seq.gt_positions[k].x(),
        seq.gt_positions[k].y(), seq.gt_positions[k].z()};
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) text += ',';
      append_number(text, row[i]);
    }
    text += '\n';
  }
  {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw DataError("cannot write " + csv_path.string());
    out << text;
    if (!out) throw DataError("write failed for " + csv_path.string());
  }
  json meta = {{"sample_rate_hz", seq.meta.sample_rate_hz},
               {"dataset_kind", seq.meta.dataset_kind},
               {"subject", seq.meta.subject},
               {"gravity", seq.meta.gravity}};
  std::ofstream mf(sidecar_path(csv_path), std::ios::binary);
  if (!mf) throw DataError("cannot write sidecar for " + csv_path.string());
  mf << meta.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Synthetic trajectories

TrajectoryKind parse_trajectory_kind(std::string_view name) {
  if (name == "line") return TrajectoryKind::kLine;
  if (name == "circle") return TrajectoryKind::kCircle;
  if (name == "figure-eight" || name == "figure_eight") return TrajectoryKind::kFigureEight;
  if (name == "random-heading-walk" || name == "random_heading_walk") {
    return TrajectoryKind::kRandomHeadingWalk;
  }
  throw ConfigError("unknown trajectory kind '" + std::string(name) + "'");
}

std::string to_string(TrajectoryKind kind) {
  switch (kind) {
    case TrajectoryKind::kLine: return "line";
    case TrajectoryKind::kCircle: return "circle";
    case TrajectoryKind::kFigureEight: return "figure-eight";
    case TrajectoryKind::kRandomHeadingWalk: return "random-heading-walk";
  }
  return "unknown";
}

void SyntheticSpec::validate() const {
  if (!(duration_s > 0.0)) throw ConfigError("synthetic duration must be positive");
  if (!(sample_rate_hz > 0.0)) throw ConfigError("synthetic sample rate must be positive");
  if (!(speed_mps >= 0.0)) throw ConfigError("synthetic speed must be nonnegative");
  if (!(gyro_noise_std >= 0.0) || !(accel_noise_std >= 0.0) || !(device_yaw_walk_std >= 0.0)) {
    throw ConfigError("noise standard deviations must be nonnegative");
  }
  if ((trajectory_kind == TrajectoryKind::kCircle ||
       trajectory_kind == TrajectoryKind::kFigureEight) &&
      !(radius_m > 0.0)) {
    throw ConfigError("radius must be positive");
  }
  if (gait.step_frequency_hz < 0.0) throw ConfigError("step frequency must be nonnegative");
  if (std::abs(gait.surge_fraction) >= 1.0) throw ConfigError("surge fraction must be below 1");
}

namespace {

// Planar path with piecewise-constant curvature, parametrized by arc length.
struct Segment {
  double start = 0.0;  // arc length at which the segment begins
  double length = std::numeric_limits<double>::infinity();
  Vec2 origin = Vec2::Zero();
  double heading = 0.0;
  double curvature = 0.0;
};

struct PathPoint {
  Vec2 position;
  double heading;
  double curvature;
};

class PlanarPath {
 public:
  explicit PlanarPath(std::vector<Segment> segments) : segments_(std::move(segments)) {}

  PathPoint at(double s) const {
    auto it = std::upper_bound(segments_.begin(), segments_.end(), s,
                               [](double v, const Segment& seg) { return v < seg.start; });
    const Segment& seg = (it == segments_.begin()) ? segments_.front() : *std::prev(it);
    const double l = s - seg.start;
    const double psi = seg.heading + seg.curvature * l;
    Vec2 p;
    if (seg.curvature == 0.0) {
      p = seg.origin + l * Vec2(std::cos(seg.heading), std::sin(seg.heading));
    } else {
      const double r = 1.0 / seg.curvature;
      p = seg.origin + r * Vec2(std::sin(psi) - std::sin(seg.heading),
                                -std::cos(psi) + std::cos(seg.heading));
    }
    return {p, psi, seg.curvature};
  }

 private:
  std::vector<Segment> segments_;
};

// Appends a segment that starts where the previous one ends.
void append_segment(std::vector<Segment>& segs, double length, double curvature) {
  Segment next;
  next.length = length;
  next.curvature = curvature;
  if (!segs.empty()) {
    const Segment& prev = segs.back();
    const PlanarPath tail({prev});
    const PathPoint end = tail.at(prev.start + prev.length);
    next.start = prev.start + prev.length;
    next.origin = end.position;
    next.heading = end.heading;
  }
  segs.push_back(next);
}

PlanarPath build_path(const SyntheticSpec& spec, double total_length) {
  std::vector<Segment> segs;
  Segment first;
  first.heading = spec.initial_heading_rad;
  switch (spec.trajectory_kind) {
    case TrajectoryKind::kLine:
      segs.push_back(first);
      break;
    case TrajectoryKind::kCircle:
      first.curvature = 1.0 / spec.radius_m;
      segs.push_back(first);
      break;
    case TrajectoryKind::kFigureEight: {
      const double loop = 2.0 * std::numbers::pi * spec.radius_m;
      first.curvature = 1.0 / spec.radius_m;
      first.length = loop;
      segs.push_back(first);
      double sign = -1.0;
      while (segs.back().start + segs.back().length < total_length) {
        append_segment(segs, loop, sign / spec.radius_m);
        sign = -sign;
      }
      break;
    }
    case TrajectoryKind::kRandomHeadingWalk: {
      std::mt19937_64 rng(spec.rng_seed ^ 0x5eed9a7bULL);
      std::uniform_real_distribution<double> straight(2.0, 8.0);
      std::uniform_real_distribution<double> radius(2.0, 6.0);
      std::uniform_real_distribution<double> turn(std::numbers::pi / 6.0,
                                                  2.0 * std::numbers::pi / 3.0);
      std::bernoulli_distribution left(0.5);
      first.length = straight(rng);
      segs.push_back(first);
      while (segs.back().start + segs.back().length < total_length) {
        const double r = radius(rng);
        const double angle = turn(rng);
        const double sign = left(rng) ? 1.0 : -1.0;
        append_segment(segs, r * angle, sign / r);
        append_segment(segs, straight(rng), 0.0);
      }
      break;
    }
  }
  segs.back().length = std::numeric_limits<double>::infinity();
  return PlanarPath(std::move(segs));
}

}  // namespace

ImuSequence gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const auto n = static_cast<std::size_t>(std::llround(spec.duration_s * spec.sample_rate_hz));
  if (n < 2) throw ConfigError("synthetic sequence would have fewer than 2 samples");

  const double v0 = spec.speed_mps;
  const double f = spec.gait.step_frequency_hz;
  const double eps = f > 0.0 ? spec.gait.surge_fraction : 0.0;
  const double bounce = f > 0.0 ? spec.gait.bounce_amplitude_m : 0.0;
  const double sway = f > 0.0 ? spec.gait.pitch_sway_rad : 0.0;
  const double w = 2.0 * std::numbers::pi * f;

  const double max_length = v0 * spec.duration_s * (1.0 + std::abs(eps)) + 1.0;
  const PlanarPath path = build_path(spec, max_length);

  ImuSequence seq;
  seq.meta.sample_rate_hz = spec.sample_rate_hz;
  seq.meta.dataset_kind = "synthetic";
  seq.meta.subject = spec.subject;
  seq.meta.gravity = spec.gravity;
  seq.timestamps.reserve(n);
  seq.gyro.reserve(n);
  seq.accel.reserve(n);
  seq.orientations.reserve(n);
  seq.gt_positions.reserve(n);
  seq.device_orientations.reserve(n);

  std::mt19937_64 noise_rng(spec.rng_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::mt19937_64 walk_rng(spec.rng_seed ^ 0xd1ce5eedULL);
  const double dt = 1.0 / spec.sample_rate_hz;
  double device_yaw_error = 0.0;

  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / spec.sample_rate_hz;
    const double phase = w * t;
    const double sin_p = std::sin(phase);
    const double cos_p = std::cos(phase);

    // Arc-length progress s(t) and its derivatives.
    double s = v0 * t;
    double s_dot = v0;
    double s_ddot = 0.0;
    if (w > 0.0) {
      s += v0 * eps * (1.0 - cos_p) / w;
      s_dot = v0 * (1.0 + eps * sin_p);
      s_ddot = v0 * eps * w * cos_p;
    }
    const PathPoint pp = path.at(s);
    const double c = std::cos(pp.heading);
    const double sn = std::sin(pp.heading);
    const double heading_rate = pp.curvature * s_dot;

    const double z = bounce * sin_p;
    const double z_ddot = -bounce * w * w * sin_p;
    const Vec3 accel_nav(pp.curvature * s_dot * s_dot * (-sn) + s_ddot * c,
                         pp.curvature * s_dot * s_dot * c + s_ddot * sn, z_ddot);

    const double pitch = sway * sin_p;
    const double pitch_rate = sway * w * cos_p;
    const UnitQuaternion q = quat_mul(yaw_rotation(pp.heading), pitch_rotation(pitch));
    const Vec3 gyro_true(-std::sin(pitch) * heading_rate, pitch_rate,
                         std::cos(pitch) * heading_rate);
    const Vec3 accel_true =
        rotate_vec(quat_conj(q), accel_nav + Vec3(0.0, 0.0, spec.gravity));

    Vec3 gn, an;
    for (int i = 0; i < 3; ++i) gn[i] = normal(noise_rng);
    for (int i = 0; i < 3; ++i) an[i] = normal(noise_rng);

    seq.timestamps.push_back(t);
    seq.gyro.push_back(gyro_true + spec.gyro_bias + spec.gyro_noise_std * gn);
    seq.accel.push_back(accel_true + spec.accel_bias + spec.accel_noise_std * an);
    seq.orientations.push_back(q);
    seq.gt_positions.emplace_back(pp.position.x(), pp.position.y(), z);

    if (k > 0 && spec.device_yaw_walk_std > 0.0) {
      device_yaw_error += spec.device_yaw_walk_std * std::sqrt(dt) * normal(walk_rng);
    }
    seq.device_orientations.push_back(quat_mul(yaw_rotation(device_yaw_error), q));
  }
  return seq;
}

std::vector<SyntheticSpec> make_corpus_specs(int count, double duration_s, std::uint64_t seed) {
  if (count < 1) throw ConfigError("corpus needs at least one sequence");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  constexpr std::array<TrajectoryKind, 4> kinds = {
      TrajectoryKind::kCircle, TrajectoryKind::kLine, TrajectoryKind::kRandomHeadingWalk,
      TrajectoryKind::kFigureEight};
  std::vector<SyntheticSpec> specs;
  specs.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    SyntheticSpec s;
    s.trajectory_kind = kinds[static_cast<std::size_t>(i) % kinds.size()];
    s.duration_s = duration_s;
    s.sample_rate_hz = 200.0;
    s.speed_mps = uniform(0.8, 1.5);
    s.radius_m = uniform(3.0, 8.0);
    s.initial_heading_rad = uniform(-std::numbers::pi, std::numbers::pi);
    s.gait.step_frequency_hz = uniform(1.6, 2.2);
    s.gait.surge_fraction = uniform(0.15, 0.3);
    s.gait.bounce_amplitude_m = uniform(0.03, 0.06);
    s.gait.pitch_sway_rad = uniform(0.02, 0.08);
    for (int a = 0; a < 3; ++a) s.gyro_bias[a] = uniform(-0.01, 0.01);
    for (int a = 0; a < 3; ++a) s.accel_bias[a] = uniform(-0.1, 0.1);
    s.gyro_noise_std = 0.005;
    s.accel_noise_std = 0.05;
    s.rng_seed = rng();
    char name[32];
    std::snprintf(name, sizeof(name), "synth_%03d", i);
    s.subject = name;
    specs.push_back(s);
  }
  return specs;
}

namespace {

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const char* what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(std::string(what) + ": unknown key '" + key + "'");
    }
  }
}

json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(std::string(what) + " must have 3 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

json to_json(const SyntheticSpec& spec) {
  return {{"trajectory_kind", to_string(spec.trajectory_kind)},
          {"duration_s", spec.duration_s},
          {"sample_rate_hz", spec.sample_rate_hz},
          {"speed_mps", spec.speed_mps},
          {"radius_m", spec.radius_m},
          {"initial_heading_rad", spec.initial_heading_rad},
          {"gyro_bias", vec3_json(spec.gyro_bias)},
          {"accel_bias", vec3_json(spec.accel_bias)},
          {"gyro_noise_std", spec.gyro_noise_std},
          {"accel_noise_std", spec.accel_noise_std},
          {"rng_seed", spec.rng_seed},
          {"gait",
           {{"step_frequency_hz", spec.gait.step_frequency_hz},
            {"surge_fraction", spec.gait.surge_fraction},
            {"bounce_amplitude_m", spec.gait.bounce_amplitude_m},
            {"pitch_sway_rad", spec.gait.pitch_sway_rad}}},
          {"device_yaw_walk_std", spec.device_yaw_walk_std},
          {"gravity", spec.gravity},
          {"subject", spec.subject}};
}

SyntheticSpec synthetic_spec_from_json(const json& j) {
  check_keys(j,
             {"trajectory_kind", "duration_s", "sample_rate_hz", "speed_mps", "radius_m",
              "initial_heading_rad", "gyro_bias", "accel_bias", "gyro_noise_std",
              "accel_noise_std", "rng_seed", "gait", "device_yaw_walk_std", "gravity", "subject"},
             "synthetic spec");
  SyntheticSpec s;
  try {
    if (j.contains("trajectory_kind")) {
      s.trajectory_kind = parse_trajectory_kind(j.at("trajectory_kind").get<std::string>());
    }
    read(j, "duration_s", s.duration_s);
    read(j, "sample_rate_hz", s.sample_rate_hz);
    read(j, "speed_mps", s.speed_mps);
    read(j, "radius_m", s.radius_m);
    read(j, "initial_heading_rad", s.initial_heading_rad);
    if (j.contains("gyro_bias")) s.gyro_bias = vec3_from(j.at("gyro_bias"), "gyro_bias");
    if (j.contains("accel_bias")) s.accel_bias = vec3_from(j.at("accel_bias"), "accel_bias");
    read(j, "gyro_noise_std", s.gyro_noise_std);
    read(j, "accel_noise_std", s.accel_noise_std);
    read(j, "rng_seed", s.rng_seed);
    if (j.contains("gait")) {
      const json& g = j.at("gait");
      check_keys(g, {"step_frequency_hz", "surge_fraction", "bounce_amplitude_m", "pitch_sway_rad"},
                 "gait");
      read(g, "step_frequency_hz", s.gait.step_frequency_hz);
      read(g, "surge_fraction", s.gait.surge_fraction);
      read(g, "bounce_amplitude_m", s.gait.bounce_amplitude_m);
      read(g, "pitch_sway_rad", s.gait.pitch_sway_rad);
    }
    read(j, "device_yaw_walk_std", s.device_yaw_walk_std);
    read(j, "gravity", s.gravity);
    read(j, "subject", s.subject);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synthetic spec: ") + e.what());
  }
  s.validate();
  return s;
}

std::vector<SyntheticSpec> generation_plan_from_json(const json& j) {
  check_keys(j, {"corpus", "sequences"}, "generation spec");
  if (j.contains("corpus") == j.contains("sequences")) {
    throw ConfigError("generation spec needs exactly one of 'corpus' or 'sequences'");
  }
  if (j.contains("corpus")) {
    const json& c = j.at("corpus");
    check_keys(c, {"count", "duration_s", "seed"}, "corpus");
    int count = 100;
    double duration = 60.0;
    std::uint64_t seed = 0;
    try {
      read(c, "count", count);
      read(c, "duration_s", duration);
      read(c, "seed", seed);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("corpus: ") + e.what());
    }
    return make_corpus_specs(count, duration, seed);
  }
  const json& seqs = j.at("sequences");
  if (!seqs.is_array() || seqs.empty()) throw ConfigError("'sequences' must be a non-empty array");
  std::vector<SyntheticSpec> out;
  for (const auto& s : seqs) out.push_back(synthetic_spec_from_json(s));
  return out;
}

}  // namespace ctin
