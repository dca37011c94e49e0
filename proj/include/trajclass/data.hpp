#pragma once

// Labelled trajectories and the preprocessing pipeline: test split, k-fold
// partitioning, rotation augmentation, normalisation, prefix truncation and
// the long-format CSV interchange.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "trajclass/rng.hpp"
#include "trajclass/sim.hpp"

namespace trajclass {

inline constexpr int kNumClasses = 3;

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

/// One labelled pursuit: U's path (the classifier input) plus V's path,
/// which is carried along for export only.
struct LabeledTrajectory {
  std::size_t id = 0;
  int label = 0;  // 0 = random walk, 1 = chasing, 2 = following
  std::vector<Point> u;
  std::vector<Point> v;

  std::size_t size() const noexcept { return u.size(); }

  friend bool operator==(const LabeledTrajectory&, const LabeledTrajectory&) = default;
};

using Dataset = std::vector<LabeledTrajectory>;

inline LabeledTrajectory to_labeled(const TrajectoryPair& pair, std::size_t id) {
  LabeledTrajectory out;
  out.id = id;
  out.label = pair.label;
  out.u.reserve(pair.u_path.size());
  out.v.reserve(pair.v_path.size());
  for (auto p : pair.u_path) out.u.push_back({static_cast<double>(p.x), static_cast<double>(p.y)});
  for (auto p : pair.v_path) out.v.push_back({static_cast<double>(p.x), static_cast<double>(p.y)});
  return out;
}

/// Ids follow input order.
inline Dataset to_dataset(const std::vector<TrajectoryPair>& pairs) {
  Dataset out;
  out.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) out.push_back(to_labeled(pairs[i], i));
  return out;
}

// ---------------------------------------------------------------------------
// Strong types

class TimestepGroup {
 public:
  static constexpr std::size_t kStep = 500;
  static constexpr std::size_t kMax = 6000;

  explicit TimestepGroup(std::size_t t) : t_(t) {
    if (t == 0 || t % kStep != 0 || t > kMax) {
      throw std::invalid_argument("timestep group must be a multiple of 500 in [500, 6000], got " +
                                  std::to_string(t));
    }
  }

  std::size_t value() const noexcept { return t_; }

  static std::vector<TimestepGroup> all() {
    std::vector<TimestepGroup> out;
    for (std::size_t t = kStep; t <= kMax; t += kStep) out.emplace_back(t);
    return out;
  }

  friend auto operator<=>(const TimestepGroup&, const TimestepGroup&) = default;

 private:
  std::size_t t_;
};

/// Angle in radians, reduced to [0, 2*pi).
class RotationAngle {
 public:
  explicit RotationAngle(double theta) {
    if (!std::isfinite(theta)) throw std::invalid_argument("rotation angle must be finite");
    constexpr double two_pi = 2.0 * std::numbers::pi;
    theta_ = std::fmod(theta, two_pi);
    if (theta_ < 0.0) theta_ += two_pi;
    if (theta_ >= two_pi) theta_ = 0.0;
  }

  double radians() const noexcept { return theta_; }

 private:
  double theta_ = 0.0;
};

struct SplitSpec {
  std::size_t test_per_class = 15;
  std::size_t k_folds = 5;
  std::uint64_t seed = 0;

  void validate() const {
    if (test_per_class < 1) throw std::invalid_argument("SplitSpec: test_per_class must be >= 1");
    if (k_folds < 2) throw std::invalid_argument("SplitSpec: k_folds must be >= 2");
  }
};

class InsufficientClassCount : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Splitting

/// Holds out exactly `test_per_class` trajectories of every class. Both
/// halves are shuffled afterwards.
inline std::pair<Dataset, Dataset> split_test(const Dataset& data, const SplitSpec& spec, Rng& rng) {
  spec.validate();
  std::vector<std::vector<std::size_t>> by_class(kNumClasses);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int label = data[i].label;
    if (label < 0 || label >= kNumClasses) throw std::invalid_argument("split_test: unknown label");
    by_class[static_cast<std::size_t>(label)].push_back(i);
  }
  Dataset train, test;
  for (int c = 0; c < kNumClasses; ++c) {
    auto& idx = by_class[static_cast<std::size_t>(c)];
    if (idx.size() < spec.test_per_class) {
      throw InsufficientClassCount("split_test: class " + std::to_string(c) + " has " +
                                   std::to_string(idx.size()) + " trajectories, need " +
                                   std::to_string(spec.test_per_class));
    }
    rng.shuffle(idx.begin(), idx.end());
    for (std::size_t j = 0; j < idx.size(); ++j) {
      (j < spec.test_per_class ? test : train).push_back(data[idx[j]]);
    }
  }
  rng.shuffle(train.begin(), train.end());
  rng.shuffle(test.begin(), test.end());
  return {std::move(train), std::move(test)};
}

struct Fold {
  std::vector<std::size_t> train;  // indices into the partitioned set
  std::vector<std::size_t> val;
};

/// Shuffles indices 0..n-1 and cuts them into k contiguous folds; the first
/// n % k folds get one extra element.
inline std::vector<Fold> kfold_split(std::size_t n, std::size_t k, Rng& rng) {
  if (k < 2) throw std::invalid_argument("kfold_split: k must be >= 2");
  if (k > n) {
    throw std::invalid_argument("kfold_split: k = " + std::to_string(k) + " exceeds " +
                                std::to_string(n) + " samples");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order.begin(), order.end());

  std::vector<Fold> folds(k);
  std::size_t begin = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t len = n / k + (f < n % k ? 1 : 0);
    for (std::size_t i = 0; i < n; ++i) {
      (i >= begin && i < begin + len ? folds[f].val : folds[f].train).push_back(order[i]);
    }
    begin += len;
  }
  return folds;
}

inline std::vector<Fold> kfold_split(const Dataset& train, std::size_t k, Rng& rng) {
  return kfold_split(train.size(), k, rng);
}

inline Dataset select(const Dataset& data, std::span<const std::size_t> idx) {
  Dataset out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(data.at(i));
  return out;
}

// ---------------------------------------------------------------------------
// Per-trajectory transforms

inline Point rotate(Point p, double cos_t, double sin_t) {
  return {cos_t * p.x - sin_t * p.y, sin_t * p.x + cos_t * p.y};
}

/// Rotation about the coordinate origin, applied to both boats.
inline LabeledTrajectory rotate_trajectory(LabeledTrajectory traj, RotationAngle theta) {
  const double c = std::cos(theta.radians());
  const double s = std::sin(theta.radians());
  for (auto& p : traj.u) p = rotate(p, c, s);
  for (auto& p : traj.v) p = rotate(p, c, s);
  return traj;
}

/// One independently drawn angle per trajectory; the rotated copy replaces
/// the original.
inline Dataset augment_rotations(const Dataset& data, Rng& rng) {
  Dataset out;
  out.reserve(data.size());
  for (const auto& traj : data) {
    const RotationAngle theta(rng.uniform(0.0, 2.0 * std::numbers::pi));
    out.push_back(rotate_trajectory(traj, theta));
  }
  return out;
}

inline constexpr double kGridExtent = 4096.0;

/// Uniform scaling by the grid extent; no translation.
inline LabeledTrajectory normalize(LabeledTrajectory traj, double extent = kGridExtent) {
  const double inv = 1.0 / extent;
  for (auto& p : traj.u) p = {p.x * inv, p.y * inv};
  for (auto& p : traj.v) p = {p.x * inv, p.y * inv};
  return traj;
}

inline LabeledTrajectory truncate(const LabeledTrajectory& traj, std::size_t length) {
  if (length == 0 || length > traj.size()) {
    throw std::out_of_range("truncate: prefix length " + std::to_string(length) +
                            " outside [1, " + std::to_string(traj.size()) + "]");
  }
  LabeledTrajectory out;
  out.id = traj.id;
  out.label = traj.label;
  out.u.assign(traj.u.begin(), traj.u.begin() + static_cast<std::ptrdiff_t>(length));
  out.v.assign(traj.v.begin(), traj.v.begin() + static_cast<std::ptrdiff_t>(std::min(length, traj.v.size())));
  return out;
}

inline LabeledTrajectory truncate(const LabeledTrajectory& traj, TimestepGroup group) {
  return truncate(traj, group.value());
}

/// Number of leading steps before the constant (padded) tail of U and V.
inline std::size_t active_length(const LabeledTrajectory& traj) {
  std::size_t n = traj.u.size();
  while (n > 1 && traj.u[n - 1] == traj.u[n - 2] &&
         (traj.v.size() < n || traj.v[n - 1] == traj.v[n - 2])) {
    --n;
  }
  return n;
}

// ---------------------------------------------------------------------------
// CSV interchange
//
// Long format, one row per (trajectory, step):
//   traj_id,label,t,ux,uy,vx,vy
// Integral coordinates are written as integers, everything else with 9
// significant digits.

inline constexpr std::string_view kCsvHeader = "traj_id,label,t,ux,uy,vx,vy";

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t row, const std::string& what)
      : std::runtime_error("row " + std::to_string(row) + ": " + what), row_(row) {}

  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

inline void append_number(std::string& out, double v) {
  char buf[40];
  int n;
  if (v == std::floor(v) && std::fabs(v) < 9.0e15) {
    n = std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(v));
  } else {
    n = std::snprintf(buf, sizeof buf, "%.9g", v);
  }
  out.append(buf, static_cast<std::size_t>(n));
}

inline void write_csv(const Dataset& data, std::ostream& os) {
  os << kCsvHeader << '\n';
  std::string line;
  for (const auto& traj : data) {
    if (traj.v.size() != traj.u.size()) throw std::invalid_argument("write_csv: u/v length mismatch");
    for (std::size_t t = 0; t < traj.u.size(); ++t) {
      line.clear();
      line += std::to_string(traj.id);
      line += ',';
      line += std::to_string(traj.label);
      line += ',';
      line += std::to_string(t);
      for (double v : {traj.u[t].x, traj.u[t].y, traj.v[t].x, traj.v[t].y}) {
        line += ',';
        append_number(line, v);
      }
      line += '\n';
      os << line;
    }
  }
}

inline void export_csv(const Dataset& data, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_csv(data, os);
  if (!os) throw std::runtime_error("write failed: " + path);
}

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

template <typename T>
T parse_field(std::string_view s, std::size_t row, std::string_view name) {
  T value{};
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc{} || ptr != end || s.empty()) {
    throw ParseError(row, "bad " + std::string(name) + " '" + std::string(s) + "'");
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) throw ParseError(row, "non-finite " + std::string(name));
  }
  return value;
}

}  // namespace detail

/// Rows of one trajectory must be contiguous with t = 0, 1, 2, ...; every
/// trajectory must have the same length. Row numbers count the header as 1.
inline Dataset read_csv(std::istream& is) {
  std::string line;
  std::size_t row = 1;
  if (!std::getline(is, line)) throw ParseError(row, "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) throw ParseError(row, "unexpected header '" + line + "'");

  Dataset out;
  std::size_t expected_len = 0;
  auto close_current = [&](std::size_t at_row) {
    if (out.empty()) return;
    const auto len = out.back().u.size();
    if (expected_len == 0) {
      expected_len = len;
    } else if (len != expected_len) {
      throw ParseError(at_row, "trajectory " + std::to_string(out.back().id) + " has " +
                                   std::to_string(len) + " steps, expected " +
                                   std::to_string(expected_len));
    }
  };

  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split_fields(line);
    if (f.size() != 7) throw ParseError(row, "expected 7 fields, got " + std::to_string(f.size()));
    const auto id = detail::parse_field<std::size_t>(f[0], row, "traj_id");
    const auto label = detail::parse_field<int>(f[1], row, "label");
    const auto t = detail::parse_field<std::size_t>(f[2], row, "t");
    if (label < 0 || label >= kNumClasses) throw ParseError(row, "unknown label " + std::to_string(label));
    const Point u{detail::parse_field<double>(f[3], row, "ux"), detail::parse_field<double>(f[4], row, "uy")};
    const Point v{detail::parse_field<double>(f[5], row, "vx"), detail::parse_field<double>(f[6], row, "vy")};

    if (t == 0) {
      close_current(row);
      out.push_back(LabeledTrajectory{id, label, {}, {}});
      if (expected_len) {
        out.back().u.reserve(expected_len);
        out.back().v.reserve(expected_len);
      }
    } else {
      if (out.empty() || out.back().id != id) throw ParseError(row, "trajectory does not start at t = 0");
      if (t != out.back().u.size()) throw ParseError(row, "non-consecutive t " + std::to_string(t));
      if (out.back().label != label) throw ParseError(row, "label changes within trajectory");
    }
    out.back().u.push_back(u);
    out.back().v.push_back(v);
  }
  close_current(row);
  return out;
}

inline Dataset import_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_csv(is);
}

}  // namespace trajclass
