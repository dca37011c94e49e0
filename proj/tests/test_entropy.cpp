#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "trajclass/entropy.hpp"

using namespace trajclass;
using D = Direction;

namespace {

LabeledTrajectory from_moves(const std::vector<Point>& steps, Point start = {0, 0}) {
  LabeledTrajectory t;
  t.u.push_back(start);
  for (auto s : steps) t.u.push_back({t.u.back().x + s.x, t.u.back().y + s.y});
  t.v = t.u;
  return t;
}

// Minimum within-cluster sum of squares over every assignment of the values
// to 3 non-empty clusters (3^n enumeration).
double brute_force_min_ss(const std::vector<double>& xs) {
  const std::size_t n = xs.size();
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= 3;
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> a(n);
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    std::array<double, 3> sum{}, cnt{};
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<int>(c % 3);
      c /= 3;
      sum[a[i]] += xs[i];
      cnt[a[i]] += 1;
    }
    if (cnt[0] == 0 || cnt[1] == 0 || cnt[2] == 0) continue;
    double ss = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = xs[i] - sum[a[i]] / cnt[a[i]];
      ss += d * d;
    }
    best = std::min(best, ss);
  }
  return best;
}

}  // namespace

TEST_CASE("direction_symbol examples", "[entropy]") {
  CHECK(direction_symbol({0, 0}, {1, 0}) == D::E);
  CHECK(direction_symbol({5, 5}, {5, 5}) == D::Stay);
  CHECK(direction_symbol({2, 2}, {1, 3}) == D::NW);
  CHECK(direction_symbol({0, 0}, {0, 7}) == D::N);
  CHECK(direction_symbol({0, 0}, {-3, -1}) == D::SW);
  CHECK(direction_symbol({0, 0}, {0.5, -2}) == D::SE);
}

TEST_CASE("buffer_entropy equality cases", "[entropy][property]") {
  const std::vector<D> constant{D::E, D::E, D::E, D::E};
  const std::vector<D> two{D::E, D::N, D::E, D::N};
  const std::vector<D> all{D::N, D::NE, D::E, D::SE, D::S, D::SW, D::W, D::NW, D::Stay};
  CHECK(buffer_entropy(constant) == 0.0);
  CHECK(buffer_entropy(two) == 1.0);
  CHECK(buffer_entropy(all) == Catch::Approx(std::log2(9.0)).epsilon(1e-15));
  CHECK(kMaxEntropyBits == Catch::Approx(3.169925).margin(1e-6));
}

TEST_CASE("buffer_entropy stays within [0, log2 9]", "[entropy][property]") {
  Rng rng(12);
  for (int k = 0; k < 2000; ++k) {
    const auto len = static_cast<std::size_t>(rng.uniform_int(1, 100));
    const auto alphabet = static_cast<std::size_t>(rng.uniform_int(1, 9));
    std::vector<D> w(len);
    for (auto& d : w) d = static_cast<D>(rng.below(alphabet));
    const double h = buffer_entropy(w);
    REQUIRE(h >= 0.0);
    REQUIRE(h <= kMaxEntropyBits + 1e-12);
    const bool constant = std::all_of(w.begin(), w.end(), [&](D d) { return d == w[0]; });
    REQUIRE((h == 0.0) == constant);
  }
}

TEST_CASE("mean_window_entropy agrees with direct window sums", "[entropy][property]") {
  Rng rng(5);
  for (int k = 0; k < 50; ++k) {
    std::vector<D> s(300);
    for (auto& d : s) d = static_cast<D>(rng.below(rng.below(2) ? 9 : 3));
    for (std::size_t b : {2u, 7u, 64u}) {
      double total = 0;
      const std::size_t windows = s.size() - b + 1;
      for (std::size_t i = 0; i < windows; ++i) total += buffer_entropy(std::span<const D>(s).subspan(i, b));
      CHECK(mean_window_entropy(s, b) == Catch::Approx(total / static_cast<double>(windows)).epsilon(1e-12));
    }
  }
}

TEST_CASE("trajectory_entropy examples", "[entropy]") {
  EntropyConfig lag1{.buffer_size = 2, .symbol_lag = 1, .exclude_padding = false};

  const auto east = from_moves(std::vector<Point>(299, {1, 0}));
  CHECK(trajectory_entropy(east, lag1, 100) == 0.0);
  CHECK(trajectory_entropy(east, EntropyConfig{}, 300) == 0.0);
  CHECK_THROWS_AS(trajectory_entropy(east, EntropyConfig{}, 100), std::invalid_argument);

  // 10 east moves then 10 north moves: 20 symbols, 19 windows of 2, one mixed.
  std::vector<Point> moves(10, {1, 0});
  moves.insert(moves.end(), 10, {0, 1});
  const auto bent = from_moves(moves);
  CHECK(trajectory_entropy(bent, lag1, 21) == Catch::Approx(1.0 / 19.0).epsilon(1e-15));

  CHECK_THROWS_AS(trajectory_entropy(bent, lag1, 2), std::invalid_argument);
  CHECK_THROWS_AS(trajectory_entropy(east, EntropyConfig{}, 100 - 1), std::invalid_argument);
}

TEST_CASE("trajectory_entropy is invariant under translation and quarter turns", "[entropy][property]") {
  SimConfig sc;
  sc.seed = 3;
  sc.max_steps = 1000;
  const auto data = to_dataset(generate_dataset(sc, 2));
  const EntropyConfig cfg;
  for (const auto& t : data) {
    const double h = trajectory_entropy(t, cfg, 1000);
    auto moved = t;
    for (auto& p : moved.u) p = {p.x + 17, p.y - 250};
    CHECK(trajectory_entropy(moved, cfg, 1000) == h);
    auto turned = t;
    for (auto& p : turned.u) p = {-p.y, p.x};
    CHECK(trajectory_entropy(turned, cfg, 1000) == Catch::Approx(h).epsilon(1e-12));
  }
}

TEST_CASE("seeded random walk has high entropy", "[entropy]") {
  SimConfig sc;
  sc.seed = 0;
  Rng rng(derive_seed(0, "sim", 0));
  const auto run = simulate(sc, StrategyKind::RandomWalk, rng);
  const auto traj = to_labeled(run, 0);
  const double h = trajectory_entropy(traj, EntropyConfig{}, 6000);
  CHECK(h >= 2.4);
  CHECK(h <= kMaxEntropyBits);
}

TEST_CASE("fit_supervised exact means and order invariance", "[entropy]") {
  const std::vector<double> e{0, 2, 3, 0, 2, 3};
  const std::vector<int> l{1, 2, 0, 1, 2, 0};
  const auto thr = fit_supervised(e, l, false);
  CHECK(thr.t == std::array<double, 3>{0, 2, 3});
  CHECK(thr.class_order == std::array<int, 3>{1, 2, 0});

  Rng rng(8);
  std::vector<double> xs(90);
  std::vector<int> ls(90);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    ls[i] = static_cast<int>(i % 3);
    xs[i] = rng.uniform(0, 3);
  }
  const auto a = fit_supervised(xs, ls, true);
  std::vector<std::size_t> perm(xs.size());
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm.begin(), perm.end());
  std::vector<double> px;
  std::vector<int> pl;
  for (auto i : perm) {
    px.push_back(xs[i]);
    pl.push_back(ls[i]);
  }
  const auto b = fit_supervised(px, pl, true);
  CHECK(a.t == b.t);
  CHECK(a.sigma == b.sigma);
  CHECK(a.class_order == b.class_order);

  CHECK_THROWS_AS(fit_supervised(std::vector<double>{1, 2}, std::vector<int>{0, 1}, false), std::invalid_argument);
}

TEST_CASE("classify with reference thresholds", "[entropy]") {
  EntropyThresholds thr;
  thr.method = ThresholdMethod::SupervisedVoronoi;
  thr.t = {0.0, 1.797, 2.819};
  thr.class_order = {1, 2, 0};
  CHECK(classify(0.1, thr) == 1);
  CHECK(classify(3.0, thr) == 0);
  CHECK(classify(1.7, thr) == 2);
  // tie at a midpoint goes to the lower centroid
  CHECK(classify(0.5 * (0.0 + 1.797), thr) == 1);
}

TEST_CASE("weighted boundaries follow the dispersions", "[entropy]") {
  EntropyThresholds thr;
  thr.method = ThresholdMethod::SupervisedWeighted;
  thr.t = {0.0, 2.0, 3.0};
  thr.sigma = {0.1, 0.3, 0.3};
  thr.class_order = {1, 2, 0};
  const auto b = thr.boundaries();
  CHECK(b[0] == Catch::Approx((0.3 * 0.0 + 0.1 * 2.0) / 0.4));
  CHECK(b[1] == Catch::Approx(2.5));
  CHECK(classify(0.49, thr) == 1);
  CHECK(classify(0.51, thr) == 2);

  thr.sigma = {0.0, 0.0, 0.0};  // floored, equal weights
  CHECK(thr.boundaries()[0] == Catch::Approx(1.0));
}

TEST_CASE("classify is a monotone step function", "[entropy][property]") {
  EntropyThresholds thr;
  thr.method = ThresholdMethod::KMeansWeighted;
  thr.t = {0.2, 1.5, 2.9};
  thr.sigma = {0.05, 0.4, 0.2};
  thr.class_order = {1, 2, 0};
  int changes = 0, prev_idx = 0;
  for (double x = 0; x <= 3.2; x += 1e-3) {
    const int label = classify(x, thr);
    const int idx = static_cast<int>(std::find(thr.class_order.begin(), thr.class_order.end(), label) -
                                     thr.class_order.begin());
    REQUIRE(idx >= prev_idx);
    changes += idx != prev_idx;
    prev_idx = idx;
  }
  CHECK(changes == 2);
}

TEST_CASE("kmeans_1d examples", "[entropy][kmeans]") {
  const std::vector<double> v{0, 0, 2, 2, 3, 3};
  const auto km = kmeans_1d(v, 3);
  CHECK(km.centroids == std::vector<double>{0, 2, 3});
  CHECK_THROWS_AS(kmeans_1d(std::vector<double>{1, 1, 2, 2}, 3), std::invalid_argument);
}

TEST_CASE("kmeans_1d matches exhaustive search on small sets", "[entropy][kmeans][property]") {
  Rng rng(77);
  for (int k = 0; k < 60; ++k) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(3, 12));
    std::vector<double> xs(n);
    for (auto& x : xs) x = k % 2 ? rng.uniform(0, 3.17) : static_cast<double>(rng.uniform_int(0, 6)) * 0.5;
    std::vector<double> uniq = xs;
    std::sort(uniq.begin(), uniq.end());
    if (std::unique(uniq.begin(), uniq.end()) - uniq.begin() < 3) continue;
    const auto km = kmeans_1d(xs, 3);
    double ss = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = xs[i] - km.centroids[km.assignment[i]];
      ss += d * d;
    }
    CHECK(ss == Catch::Approx(brute_force_min_ss(xs)).margin(1e-9));
  }
}

TEST_CASE("kmeans inertia never increases", "[entropy][kmeans][property]") {
  Rng rng(4);
  for (int k = 0; k < 40; ++k) {
    std::vector<double> xs(200);
    for (auto& x : xs) x = rng.uniform(0, 1) + static_cast<double>(rng.below(3));
    for (auto init : {KMeansInit::Quantile, KMeansInit::Optimal}) {
      const auto km = kmeans_1d(xs, 3, init);
      for (std::size_t i = 1; i < km.inertia.size(); ++i) REQUIRE(km.inertia[i] <= km.inertia[i - 1] + 1e-12);
      REQUIRE(std::is_sorted(km.centroids.begin(), km.centroids.end()));
    }
  }
}

TEST_CASE("fit_kmeans maps clusters to labels", "[entropy][kmeans]") {
  const std::vector<double> e{0, 0.1, 1.9, 2.1, 3.0, 3.1};
  const std::vector<int> l{1, 1, 2, 2, 0, 0};
  const auto thr = fit_kmeans(e, l, false);
  CHECK(thr.t[0] == Catch::Approx(0.05));
  CHECK(thr.t[1] == Catch::Approx(2.0));
  CHECK(thr.t[2] == Catch::Approx(3.05));
  CHECK(thr.class_order == std::array<int, 3>{1, 2, 0});
}

TEST_CASE("evaluate_thresholds on straight chasers", "[entropy]") {
  Dataset test;
  for (int i = 0; i < 5; ++i) {
    auto t = from_moves(std::vector<Point>(299, {1, static_cast<double>(i % 2)}));
    t.label = 1;
    test.push_back(t);
  }
  EntropyThresholds thr;
  thr.t = {0.0, 1.5, 3.0};
  thr.class_order = {1, 2, 0};
  CHECK(evaluate_thresholds(test, thr, EntropyConfig{}, 300) == 1.0);
  for (auto& t : test) t.label = 0;
  CHECK(evaluate_thresholds(test, thr, EntropyConfig{}, 300) == 0.0);
  CHECK_THROWS_AS(evaluate_thresholds(Dataset{}, thr, EntropyConfig{}, 300), std::invalid_argument);
}

TEST_CASE("padding tail is ignored when excluded", "[entropy]") {
  // 60 zigzag moves, then a long constant tail as left by early termination
  std::vector<Point> moves;
  for (int i = 0; i < 60; ++i) moves.push_back(i % 2 ? Point{0, 1} : Point{1, 0});
  moves.insert(moves.end(), 400, Point{0, 0});
  const auto padded = from_moves(moves);
  REQUIRE(active_length(padded) == 61);

  EntropyConfig keep{.buffer_size = 8, .symbol_lag = 1, .exclude_padding = false};
  EntropyConfig drop = keep;
  drop.exclude_padding = true;
  const double active_only = trajectory_entropy(padded, keep, 61);
  CHECK(trajectory_entropy(padded, drop, 61) == active_only);
  CHECK(trajectory_entropy(padded, drop, 461) == active_only);
  CHECK(trajectory_entropy(padded, keep, 461) < active_only);
}
