#pragma once

// Entropy-threshold clustering baseline.
//
// U's path is turned into a stream of direction symbols, a sliding buffer of
// b symbols gives an empirical distribution per position, and the mean
// Shannon entropy (bits) over all buffers summarises the trajectory. Three
// centroids fitted on full-length training trajectories (class means or 1-D
// k-means) then split the entropy axis into three classes.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "trajclass/data.hpp"

namespace trajclass {

enum class Direction : std::uint8_t { N, NE, E, SE, S, SW, W, NW, Stay };

inline constexpr std::size_t kNumDirections = 9;
inline const double kMaxEntropyBits = std::log2(static_cast<double>(kNumDirections));

/// Symbol of the displacement p -> q, from the signs of dx and dy only.
constexpr Direction direction_symbol(Point p, Point q) noexcept {
  const int sx = (q.x > p.x) - (q.x < p.x);
  const int sy = (q.y > p.y) - (q.y < p.y);
  // indexed [sx + 1][sy + 1]
  constexpr Direction table[3][3] = {
      {Direction::SW, Direction::W, Direction::NW},
      {Direction::S, Direction::Stay, Direction::N},
      {Direction::SE, Direction::E, Direction::NE},
  };
  return table[sx + 1][sy + 1];
}

/// Shannon entropy in bits of the empirical symbol distribution.
inline double buffer_entropy(std::span<const Direction> window) {
  if (window.empty()) throw std::invalid_argument("buffer_entropy: empty window");
  std::array<std::size_t, kNumDirections> counts{};
  for (auto d : window) ++counts[static_cast<std::size_t>(d)];
  const double n = static_cast<double>(window.size());
  double h = 0.0;
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return h;
}

struct EntropyConfig {
  std::size_t buffer_size = 128;  // b
  std::size_t symbol_lag = 5;     // steps spanned by one symbol
  bool exclude_padding = true;    // drop the constant tail of early-terminated runs

  void validate() const {
    if (buffer_size < 2) throw std::invalid_argument("EntropyConfig: buffer_size must be >= 2");
    if (symbol_lag < 1) throw std::invalid_argument("EntropyConfig: symbol_lag must be >= 1");
  }
};

/// Symbols d(p[i], p[i + lag]) for every i with i + lag < length.
inline std::vector<Direction> symbol_stream(std::span<const Point> pts, std::size_t length,
                                            std::size_t lag) {
  std::vector<Direction> out;
  if (length > pts.size()) throw std::out_of_range("symbol_stream: length exceeds trajectory");
  if (length <= lag) return out;
  out.reserve(length - lag);
  for (std::size_t i = 0; i + lag < length; ++i) out.push_back(direction_symbol(pts[i], pts[i + lag]));
  return out;
}

/// Mean buffer entropy over windows [i, i + b) of a symbol stream, stride 1.
/// Counts are updated incrementally; each window's entropy is bitwise equal
/// to buffer_entropy() on that window.
inline double mean_window_entropy(std::span<const Direction> symbols, std::size_t b) {
  if (b == 0 || symbols.size() < b) throw std::invalid_argument("mean_window_entropy: stream shorter than buffer");
  std::vector<double> plogp(b + 1, 0.0);
  for (std::size_t c = 1; c <= b; ++c) {
    const double p = static_cast<double>(c) / static_cast<double>(b);
    plogp[c] = p * std::log2(p);
  }
  std::array<std::size_t, kNumDirections> counts{};
  for (std::size_t i = 0; i < b; ++i) ++counts[static_cast<std::size_t>(symbols[i])];

  double total = 0.0;
  const std::size_t windows = symbols.size() - b + 1;
  for (std::size_t i = 0;; ++i) {
    double h = 0.0;
    for (auto c : counts) {
      if (c) h -= plogp[c];
    }
    total += h;
    if (i + 1 == windows) break;
    --counts[static_cast<std::size_t>(symbols[i])];
    ++counts[static_cast<std::size_t>(symbols[i + b])];
  }
  return total / static_cast<double>(windows);
}

/// Entropy summary of the first `length` points of U's path.
inline double trajectory_entropy(const LabeledTrajectory& traj, const EntropyConfig& cfg, std::size_t length) {
  cfg.validate();
  if (length <= cfg.buffer_size + cfg.symbol_lag - 1) {
    throw std::invalid_argument("trajectory_entropy: prefix of " + std::to_string(length) +
                                " steps too short for buffer " + std::to_string(cfg.buffer_size));
  }
  if (length > traj.size()) throw std::out_of_range("trajectory_entropy: prefix longer than trajectory");
  std::size_t n = length;
  if (cfg.exclude_padding) {
    n = std::min(n, active_length(traj));
    n = std::max(n, cfg.buffer_size + cfg.symbol_lag);
    n = std::min(n, length);
  }
  const auto symbols = symbol_stream(traj.u, n, cfg.symbol_lag);
  return mean_window_entropy(symbols, cfg.buffer_size);
}

inline double trajectory_entropy(const LabeledTrajectory& traj, const EntropyConfig& cfg, TimestepGroup t) {
  return trajectory_entropy(traj, cfg, t.value());
}

inline std::vector<double> dataset_entropies(const Dataset& data, const EntropyConfig& cfg, std::size_t length) {
  std::vector<double> out;
  out.reserve(data.size());
  for (const auto& traj : data) out.push_back(trajectory_entropy(traj, cfg, length));
  return out;
}

// ---------------------------------------------------------------------------
// Thresholds

enum class ThresholdMethod { SupervisedWeighted, SupervisedVoronoi, KMeansWeighted, KMeansVoronoi };

inline constexpr ThresholdMethod kAllThresholdMethods[] = {
    ThresholdMethod::SupervisedWeighted, ThresholdMethod::SupervisedVoronoi,
    ThresholdMethod::KMeansWeighted, ThresholdMethod::KMeansVoronoi};

inline std::string_view to_string(ThresholdMethod m) {
  switch (m) {
    case ThresholdMethod::SupervisedWeighted: return "supervised_weighted";
    case ThresholdMethod::SupervisedVoronoi: return "supervised_voronoi";
    case ThresholdMethod::KMeansWeighted: return "kmeans_weighted";
    case ThresholdMethod::KMeansVoronoi: return "kmeans_voronoi";
  }
  return "?";
}

inline ThresholdMethod parse_threshold_method(std::string_view s) {
  for (auto m : kAllThresholdMethods) {
    if (to_string(m) == s) return m;
  }
  throw std::invalid_argument("unknown entropy method '" + std::string(s) + "'");
}

inline bool is_weighted(ThresholdMethod m) {
  return m == ThresholdMethod::SupervisedWeighted || m == ThresholdMethod::KMeansWeighted;
}

inline bool is_kmeans(ThresholdMethod m) {
  return m == ThresholdMethod::KMeansWeighted || m == ThresholdMethod::KMeansVoronoi;
}

inline constexpr double kSigmaFloor = 1e-6;

struct EntropyThresholds {
  ThresholdMethod method = ThresholdMethod::SupervisedVoronoi;
  std::array<double, 3> t{};      // sorted centroids t1 <= t2 <= t3
  std::array<double, 3> sigma{};  // per-centroid spread
  std::array<int, 3> class_order{1, 2, 0};  // label owning each centroid

  /// Decision points between adjacent centroids.
  std::array<double, 2> boundaries() const {
    std::array<double, 2> out{};
    for (std::size_t i = 0; i < 2; ++i) {
      if (is_weighted(method)) {
        const double s1 = std::max(sigma[i], kSigmaFloor);
        const double s2 = std::max(sigma[i + 1], kSigmaFloor);
        out[i] = (s2 * t[i] + s1 * t[i + 1]) / (s1 + s2);
      } else {
        out[i] = 0.5 * (t[i] + t[i + 1]);
      }
    }
    return out;
  }
};

/// Label for an entropy value; values on a boundary go to the lower centroid.
inline int classify(double entropy, const EntropyThresholds& thr) {
  const auto b = thr.boundaries();
  std::size_t idx = 2;
  if (entropy <= b[0]) {
    idx = 0;
  } else if (entropy <= b[1]) {
    idx = 1;
  }
  return thr.class_order[idx];
}

namespace detail {

inline double population_sd(std::span<const double> xs, double mean) {
  if (xs.empty()) return 0.0;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size()));
}

}  // namespace detail

/// Centroids are the per-class mean entropies, sorted ascending.
inline EntropyThresholds fit_supervised(std::span<const double> entropies, std::span<const int> labels,
                                        bool weighted) {
  if (entropies.size() != labels.size()) throw std::invalid_argument("fit_supervised: size mismatch");
  std::array<std::vector<double>, kNumClasses> groups;
  for (std::size_t i = 0; i < entropies.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= kNumClasses) throw std::invalid_argument("fit_supervised: unknown label");
    groups[static_cast<std::size_t>(labels[i])].push_back(entropies[i]);
  }
  struct Centroid {
    double mean, sd;
    int label;
  };
  std::array<Centroid, 3> cs{};
  for (int c = 0; c < kNumClasses; ++c) {
    auto& g = groups[static_cast<std::size_t>(c)];
    if (g.empty()) throw std::invalid_argument("fit_supervised: class " + std::to_string(c) + " has no samples");
    // Sort first so the sum is independent of sample order.
    std::sort(g.begin(), g.end());
    const double mean = std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(g.size());
    cs[static_cast<std::size_t>(c)] = {mean, detail::population_sd(g, mean), c};
  }
  std::stable_sort(cs.begin(), cs.end(), [](const Centroid& a, const Centroid& b) { return a.mean < b.mean; });

  EntropyThresholds thr;
  thr.method = weighted ? ThresholdMethod::SupervisedWeighted : ThresholdMethod::SupervisedVoronoi;
  for (std::size_t i = 0; i < 3; ++i) {
    thr.t[i] = cs[i].mean;
    thr.sigma[i] = std::max(cs[i].sd, kSigmaFloor);
    thr.class_order[i] = cs[i].label;
  }
  return thr;
}

struct KMeansResult {
  std::vector<double> centroids;        // ascending
  std::vector<std::size_t> assignment;  // cluster per input value
  std::vector<double> inertia;          // within-cluster SS after each iteration
  std::size_t iterations = 0;
};

enum class KMeansInit {
  Quantile,  // (2j+1)/(2q) quantiles of the sorted values
  Optimal,   // means of the exact minimum-SS contiguous partition
};

namespace detail {

inline double quantile_sorted(std::span<const double> sorted, double q) {
  const double pos = static_cast<double>(sorted.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Exact 1-D k-means by dynamic programming over contiguous partitions of
/// the sorted values (optimal 1-D clusters are intervals). O(q n^2).
inline std::vector<double> optimal_partition_means(std::span<const double> sorted, std::size_t q) {
  const std::size_t n = sorted.size();
  std::vector<double> s1(n + 1, 0.0), s2(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    s1[i + 1] = s1[i] + sorted[i];
    s2[i + 1] = s2[i] + sorted[i] * sorted[i];
  }
  auto cost = [&](std::size_t a, std::size_t b) {  // SS of sorted[a, b)
    const double m = static_cast<double>(b - a);
    const double sum = s1[b] - s1[a];
    return std::max(0.0, (s2[b] - s2[a]) - sum * sum / m);
  };
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> best(q + 1, std::vector<double>(n + 1, inf));
  std::vector<std::vector<std::size_t>> cut(q + 1, std::vector<std::size_t>(n + 1, 0));
  best[0][0] = 0.0;
  for (std::size_t k = 1; k <= q; ++k) {
    for (std::size_t j = k; j <= n; ++j) {
      for (std::size_t i = k - 1; i < j; ++i) {
        if (best[k - 1][i] == inf) continue;
        const double c = best[k - 1][i] + cost(i, j);
        if (c < best[k][j]) {
          best[k][j] = c;
          cut[k][j] = i;
        }
      }
    }
  }
  std::vector<double> means(q);
  std::size_t end = n;
  for (std::size_t k = q; k >= 1; --k) {
    const std::size_t begin = cut[k][end];
    means[k - 1] = (s1[end] - s1[begin]) / static_cast<double>(end - begin);
    end = begin;
  }
  return means;
}

}  // namespace detail

/// Lloyd's algorithm on scalars: alternate nearest-centroid assignment and
/// mean update until assignments no longer change or `max_iter` rounds.
/// An emptied cluster keeps its centroid.
inline KMeansResult kmeans_1d(std::span<const double> values, std::size_t q, KMeansInit init = KMeansInit::Optimal,
                              std::size_t max_iter = 100) {
  if (q == 0) throw std::invalid_argument("kmeans_1d: q must be positive");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  {
    std::vector<double> uniq = sorted;
    const auto distinct = static_cast<std::size_t>(std::unique(uniq.begin(), uniq.end()) - uniq.begin());
    if (distinct < q) {
      throw std::invalid_argument("kmeans_1d: " + std::to_string(distinct) + " distinct values, need " +
                                  std::to_string(q));
    }
  }

  KMeansResult res;
  if (init == KMeansInit::Optimal) {
    res.centroids = detail::optimal_partition_means(sorted, q);
  } else {
    res.centroids.resize(q);
    for (std::size_t j = 0; j < q; ++j) {
      res.centroids[j] =
          detail::quantile_sorted(sorted, static_cast<double>(2 * j + 1) / static_cast<double>(2 * q));
    }
  }

  auto nearest = [&](double x) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < q; ++j) {
      if (std::fabs(x - res.centroids[j]) < std::fabs(x - res.centroids[best])) best = j;
    }
    return best;
  };

  res.assignment.assign(values.size(), q);  // q = unassigned
  for (std::size_t it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const auto j = nearest(values[i]);
      if (j != res.assignment[i]) {
        res.assignment[i] = j;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<double> sum(q, 0.0);
    std::vector<std::size_t> count(q, 0);
    for (std::size_t i = 0; i < values.size(); ++i) {
      sum[res.assignment[i]] += values[i];
      ++count[res.assignment[i]];
    }
    for (std::size_t j = 0; j < q; ++j) {
      if (count[j]) res.centroids[j] = sum[j] / static_cast<double>(count[j]);
    }
    double ss = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double d = values[i] - res.centroids[res.assignment[i]];
      ss += d * d;
    }
    res.inertia.push_back(ss);
    res.iterations = it + 1;
  }
  return res;
}

/// K-means (q = 3) centroids. Each centroid is handed to a label by the
/// permutation that agrees with the most training labels; ties keep the
/// lowest permutation in lexicographic order.
inline EntropyThresholds fit_kmeans(std::span<const double> entropies, std::span<const int> labels, bool weighted) {
  if (entropies.size() != labels.size()) throw std::invalid_argument("fit_kmeans: size mismatch");
  const auto km = kmeans_1d(entropies, 3);

  EntropyThresholds thr;
  thr.method = weighted ? ThresholdMethod::KMeansWeighted : ThresholdMethod::KMeansVoronoi;
  std::array<std::array<std::size_t, kNumClasses>, 3> agree{};
  std::array<std::vector<double>, 3> members;
  for (std::size_t i = 0; i < entropies.size(); ++i) {
    const auto j = km.assignment[i];
    members[j].push_back(entropies[i]);
    if (labels[i] >= 0 && labels[i] < kNumClasses) ++agree[j][static_cast<std::size_t>(labels[i])];
  }
  for (std::size_t j = 0; j < 3; ++j) {
    thr.t[j] = km.centroids[j];
    thr.sigma[j] = std::max(detail::population_sd(members[j], km.centroids[j]), kSigmaFloor);
  }

  std::array<int, 3> perm{0, 1, 2};
  std::size_t best_score = 0;
  bool first = true;
  do {
    std::size_t score = 0;
    for (std::size_t j = 0; j < 3; ++j) score += agree[j][static_cast<std::size_t>(perm[j])];
    if (first || score > best_score) {
      best_score = score;
      thr.class_order = perm;
      first = false;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return thr;
}

inline EntropyThresholds fit_thresholds(ThresholdMethod method, std::span<const double> entropies,
                                        std::span<const int> labels) {
  return is_kmeans(method) ? fit_kmeans(entropies, labels, is_weighted(method))
                           : fit_supervised(entropies, labels, is_weighted(method));
}

struct ThresholdEvaluation {
  double accuracy = 0.0;
  std::vector<int> predictions;
};

inline ThresholdEvaluation evaluate_thresholds_detailed(const Dataset& test, const EntropyThresholds& thr,
                                                        const EntropyConfig& cfg, std::size_t length) {
  if (test.empty()) throw std::invalid_argument("evaluate_thresholds: empty test set");
  ThresholdEvaluation out;
  std::size_t correct = 0;
  for (const auto& traj : test) {
    const int pred = classify(trajectory_entropy(traj, cfg, length), thr);
    out.predictions.push_back(pred);
    correct += pred == traj.label;
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
  return out;
}

inline double evaluate_thresholds(const Dataset& test, const EntropyThresholds& thr, const EntropyConfig& cfg,
                                  std::size_t length) {
  return evaluate_thresholds_detailed(test, thr, cfg, length).accuracy;
}

// ---------------------------------------------------------------------------
// CSV outputs

inline void write_thresholds_csv(std::span<const EntropyThresholds> rows, std::ostream& os) {
  os << "method,t1,t2,t3,sigma1,sigma2,sigma3\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", std::string(to_string(r.method)).c_str(),
                  r.t[0], r.t[1], r.t[2], r.sigma[0], r.sigma[1], r.sigma[2]);
    os << buf;
  }
}

inline void write_entropies_csv(const Dataset& data, std::span<const double> entropies, std::ostream& os) {
  if (data.size() != entropies.size()) throw std::invalid_argument("write_entropies_csv: size mismatch");
  os << "traj_id,label,entropy\n";
  char buf[96];
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%d,%.9g\n", data[i].id, data[i].label, entropies[i]);
    os << buf;
  }
}

}  // namespace trajclass
