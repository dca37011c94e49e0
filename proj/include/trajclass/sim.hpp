#pragma once

// Two-boat pursuit simulator. Boat U (the possible threat) starts at the grid
// centre and moves under one of three strategies; boat V (the target) starts
// at a random point and drifts east. Trajectories are fixed-length: a run
// that ends early is padded by repeating its final positions.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "trajclass/rng.hpp"

namespace trajclass {

struct GridPoint {
  std::int64_t x = 0;
  std::int64_t y = 0;

  friend constexpr auto operator<=>(const GridPoint&, const GridPoint&) = default;
};

constexpr std::int64_t chebyshev(GridPoint a, GridPoint b) noexcept {
  const auto dx = a.x > b.x ? a.x - b.x : b.x - a.x;
  const auto dy = a.y > b.y ? a.y - b.y : b.y - a.y;
  return dx > dy ? dx : dy;
}

enum class StrategyKind : int { RandomWalk = 0, Chasing = 1, Following = 2 };

inline constexpr StrategyKind kAllStrategies[] = {StrategyKind::RandomWalk, StrategyKind::Chasing,
                                                  StrategyKind::Following};

enum class Termination { Caught, TimeLimit, OutOfBounds };

inline std::string_view to_string(StrategyKind s) {
  switch (s) {
    case StrategyKind::RandomWalk: return "random_walk";
    case StrategyKind::Chasing: return "chasing";
    case StrategyKind::Following: return "following";
  }
  return "?";
}

inline std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::Caught: return "caught";
    case Termination::TimeLimit: return "time_limit";
    case Termination::OutOfBounds: return "out_of_bounds";
  }
  return "?";
}

struct SimConfig {
  std::int64_t grid_size = 4096;
  std::size_t max_steps = 6000;
  GridPoint u_start{2048, 2048};
  std::int64_t v_move_period = 5;
  std::int64_t random_walk_period = 5;
  std::uint64_t seed = 0;
  std::int64_t catch_radius = 1;

  // Quantities the strategy descriptions leave open.
  std::int64_t max_wait = 4;  // random-walk wait drawn from {0..max_wait}
  std::int64_t chase_speed_min = 1;
  std::int64_t chase_speed_max = 3;
  std::int64_t follow_mode_min = 20;  // sub-mode duration bounds, in steps
  std::int64_t follow_mode_max = 100;
  std::int64_t zigzag_period = 8;
  std::int64_t min_start_separation = 64;

  bool inside(GridPoint p) const noexcept {
    return p.x >= 0 && p.y >= 0 && p.x <= grid_size && p.y <= grid_size;
  }

  void validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("SimConfig: " + what); };
    if (grid_size <= 0) fail("grid_size must be positive");
    if (max_steps == 0) fail("max_steps must be positive");
    if (v_move_period < 1 || random_walk_period < 1 || zigzag_period < 2) fail("periods must be >= 1");
    if (!inside(u_start)) fail("u_start outside grid");
    if (catch_radius < 0) fail("catch_radius must be non-negative");
    if (max_wait < 0) fail("max_wait must be non-negative");
    if (chase_speed_min < 1 || chase_speed_max < chase_speed_min) fail("bad chase speed range");
    if (follow_mode_min < 1 || follow_mode_max < follow_mode_min) fail("bad following interval range");
    if (min_start_separation < 0 || min_start_separation * 2 >= grid_size) fail("bad min_start_separation");
  }
};

struct TrajectoryPair {
  std::vector<GridPoint> u_path;
  std::vector<GridPoint> v_path;
  int label = 0;
  StrategyKind strategy = StrategyKind::RandomWalk;
  Termination termination = Termination::TimeLimit;
  std::size_t active_len = 0;
  GridPoint v_start{};
  std::int64_t chase_speed = 0;  // 0 unless strategy == Chasing

  friend bool operator==(const TrajectoryPair&, const TrajectoryPair&) = default;
};

// ---------------------------------------------------------------------------
// Bresenham rasterisation

/// Incremental all-octant Bresenham walk from `from` (exclusive) to `to`.
class BresenhamWalker {
 public:
  BresenhamWalker(GridPoint from, GridPoint to)
      : cur_(from),
        to_(to),
        dx_(std::llabs(to.x - from.x)),
        dy_(-std::llabs(to.y - from.y)),
        sx_(from.x < to.x ? 1 : -1),
        sy_(from.y < to.y ? 1 : -1),
        err_(dx_ + dy_) {}

  bool done() const noexcept { return cur_ == to_; }

  /// Advances one raster point. Must not be called once done().
  GridPoint next() noexcept {
    const auto e2 = 2 * err_;
    if (e2 >= dy_) {
      err_ += dy_;
      cur_.x += sx_;
    }
    if (e2 <= dx_) {
      err_ += dx_;
      cur_.y += sy_;
    }
    return cur_;
  }

 private:
  GridPoint cur_;
  GridPoint to_;
  std::int64_t dx_, dy_, sx_, sy_, err_;
};

/// Raster from a (exclusive) to b (inclusive); max(|dx|,|dy|) points.
inline std::vector<GridPoint> bresenham_line(GridPoint a, GridPoint b) {
  std::vector<GridPoint> out;
  out.reserve(static_cast<std::size_t>(chebyshev(a, b)));
  BresenhamWalker walk(a, b);
  while (!walk.done()) out.push_back(walk.next());
  return out;
}

/// Position reached after `n` raster points toward b, stopping at b.
inline GridPoint bresenham_advance(GridPoint a, GridPoint b, std::int64_t n) {
  BresenhamWalker walk(a, b);
  GridPoint p = a;
  for (std::int64_t i = 0; i < n && !walk.done(); ++i) p = walk.next();
  return p;
}

// ---------------------------------------------------------------------------
// Per-step movement rules. Step t runs from 1 to max_steps - 1; index 0 holds
// the start positions.

/// Target drift: one unit east on every step divisible by the move period.
/// Only U leaving the grid ends a run, so V holds at the east edge.
inline GridPoint step_target(GridPoint v, std::size_t t, const SimConfig& cfg) {
  if (t % static_cast<std::size_t>(cfg.v_move_period) == 0 && v.x < cfg.grid_size) ++v.x;
  return v;
}

enum class Heading : int { North = 0, East = 1, South = 2, West = 3 };

inline GridPoint moved(GridPoint p, Heading h) {
  switch (h) {
    case Heading::North: ++p.y; break;
    case Heading::East: ++p.x; break;
    case Heading::South: --p.y; break;
    case Heading::West: --p.x; break;
  }
  return p;
}

struct RandomWalkState {
  Heading heading = Heading::North;
  std::int64_t wait = 0;
  std::size_t redraws = 0;
};

/// Every `random_walk_period` steps a heading and a wait are drawn; the boat
/// idles for the wait and then moves one unit per step along the heading.
inline GridPoint step_random_walk(GridPoint u, std::size_t t, RandomWalkState& st,
                                  const SimConfig& cfg, Rng& rng) {
  if ((t - 1) % static_cast<std::size_t>(cfg.random_walk_period) == 0) {
    st.heading = static_cast<Heading>(rng.below(4));
    st.wait = rng.uniform_int(0, cfg.max_wait);
    ++st.redraws;
  }
  if (st.wait > 0) {
    --st.wait;
    return u;
  }
  return moved(u, st.heading);
}

/// Advance `speed` raster points along the Bresenham line toward v.
inline GridPoint step_chasing(GridPoint u, GridPoint v, std::int64_t speed) {
  return bresenham_advance(u, v, speed);
}

enum class FollowMode : int { Zigzag = 0, Chase = 1, RandomWalk = 2 };

struct FollowingState {
  FollowMode mode = FollowMode::Chase;
  std::int64_t remaining = 0;
  std::int64_t zig_phase = 0;
  RandomWalkState walk;
};

/// Mixes zigzag, chase and random-walk segments of random length while
/// staying strictly west of the target (u.x <= v.x - 1). `v` is the target
/// position after its move on this step.
inline GridPoint step_following(GridPoint u, GridPoint v, std::size_t t, FollowingState& st,
                                const SimConfig& cfg, Rng& rng) {
  if (st.remaining == 0) {
    st.mode = static_cast<FollowMode>(rng.below(3));
    st.remaining = rng.uniform_int(cfg.follow_mode_min, cfg.follow_mode_max);
    st.zig_phase = 0;
  }
  --st.remaining;

  GridPoint next = u;
  switch (st.mode) {
    case FollowMode::Zigzag: {
      const auto half = cfg.zigzag_period / 2;
      next.y += (st.zig_phase % cfg.zigzag_period) < half ? 1 : -1;
      if (t % static_cast<std::size_t>(cfg.v_move_period) == 0) ++next.x;
      ++st.zig_phase;
      break;
    }
    case FollowMode::Chase:
      next = step_chasing(u, v, 1);
      break;
    case FollowMode::RandomWalk:
      next = step_random_walk(u, t, st.walk, cfg, rng);
      break;
  }
  next.x = std::min(next.x, v.x - 1);
  return next;
}

// ---------------------------------------------------------------------------

/// Uniform start for V at least min_start_separation (Chebyshev) from U's
/// start. For Following, V also starts strictly east of U so that "behind"
/// holds from the first step.
inline GridPoint draw_target_start(const SimConfig& cfg, StrategyKind strategy, Rng& rng) {
  for (;;) {
    GridPoint v{rng.uniform_int(0, cfg.grid_size), rng.uniform_int(0, cfg.grid_size)};
    if (chebyshev(v, cfg.u_start) < cfg.min_start_separation) continue;
    if (strategy == StrategyKind::Following && v.x <= cfg.u_start.x) continue;
    return v;
  }
}

/// Runs one pursuit. Draw order from `rng`: V start (unless given), chase
/// speed (Chasing only), then per-step draws.
inline TrajectoryPair simulate(const SimConfig& cfg, StrategyKind strategy, Rng& rng,
                               std::optional<GridPoint> v_start = std::nullopt) {
  cfg.validate();
  TrajectoryPair out;
  out.strategy = strategy;
  out.label = static_cast<int>(strategy);
  out.v_start = v_start ? *v_start : draw_target_start(cfg, strategy, rng);
  if (!cfg.inside(out.v_start)) throw std::invalid_argument("simulate: v_start outside grid");
  if (strategy == StrategyKind::Chasing) {
    out.chase_speed = rng.uniform_int(cfg.chase_speed_min, cfg.chase_speed_max);
  }

  out.u_path.reserve(cfg.max_steps);
  out.v_path.reserve(cfg.max_steps);
  GridPoint u = cfg.u_start;
  GridPoint v = out.v_start;
  out.u_path.push_back(u);
  out.v_path.push_back(v);

  RandomWalkState walk;
  FollowingState follow;
  out.termination = Termination::TimeLimit;
  if (chebyshev(u, v) <= cfg.catch_radius) {
    out.termination = Termination::Caught;
  } else {
    for (std::size_t t = 1; t < cfg.max_steps; ++t) {
      const GridPoint v_next = step_target(v, t, cfg);
      GridPoint u_next = u;
      switch (strategy) {
        case StrategyKind::RandomWalk: u_next = step_random_walk(u, t, walk, cfg, rng); break;
        case StrategyKind::Chasing: u_next = step_chasing(u, v_next, out.chase_speed); break;
        case StrategyKind::Following: u_next = step_following(u, v_next, t, follow, cfg, rng); break;
      }
      if (!cfg.inside(u_next)) {
        out.termination = Termination::OutOfBounds;
        break;
      }
      u = u_next;
      v = v_next;
      out.u_path.push_back(u);
      out.v_path.push_back(v);
      if (chebyshev(u, v) <= cfg.catch_radius) {
        out.termination = Termination::Caught;
        break;
      }
    }
  }

  out.active_len = out.u_path.size();
  out.u_path.resize(cfg.max_steps, out.u_path.back());
  out.v_path.resize(cfg.max_steps, out.v_path.back());
  return out;
}

/// 3 * n_per_class runs, class-major (all random walks, then chasing, then
/// following). Run i of class c uses stream derive_seed(seed, "sim", 3*i + c).
inline std::vector<TrajectoryPair> generate_dataset(const SimConfig& cfg, std::size_t n_per_class) {
  if (n_per_class == 0) throw std::invalid_argument("generate_dataset: n_per_class must be >= 1");
  cfg.validate();
  std::vector<TrajectoryPair> out;
  out.reserve(3 * n_per_class);
  for (StrategyKind s : kAllStrategies) {
    for (std::size_t i = 0; i < n_per_class; ++i) {
      Rng rng(derive_seed(cfg.seed, "sim", 3 * i + static_cast<std::uint64_t>(s)));
      out.push_back(simulate(cfg, s, rng));
    }
  }
  return out;
}

}  // namespace trajclass
