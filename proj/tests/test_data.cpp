#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "trajclass/data.hpp"

using namespace trajclass;

namespace {

Dataset small_raw(std::uint64_t seed, std::size_t per_class, std::size_t steps = 400) {
  SimConfig cfg;
  cfg.seed = seed;
  cfg.max_steps = steps;
  return to_dataset(generate_dataset(cfg, per_class));
}

std::string to_csv(const Dataset& d) {
  std::ostringstream os;
  write_csv(d, os);
  return os.str();
}

Dataset from_csv(const std::string& s) {
  std::istringstream is(s);
  return read_csv(is);
}

std::size_t parse_error_row(const std::string& text) {
  try {
    from_csv(text);
  } catch (const ParseError& e) {
    return e.row();
  }
  return 0;
}

}  // namespace

TEST_CASE("strong types reject bad values", "[data]") {
  CHECK_NOTHROW(TimestepGroup(500));
  CHECK_NOTHROW(TimestepGroup(6000));
  CHECK_THROWS_AS(TimestepGroup(750), std::invalid_argument);
  CHECK_THROWS_AS(TimestepGroup(0), std::invalid_argument);
  CHECK_THROWS_AS(TimestepGroup(6500), std::invalid_argument);
  CHECK(TimestepGroup::all().size() == 12);
  CHECK_THROWS_AS(RotationAngle(std::nan("")), std::invalid_argument);
  CHECK(RotationAngle(2.0 * std::numbers::pi + 0.5).radians() == Catch::Approx(0.5));
}

TEST_CASE("split_test holds out a fixed count per class", "[data]") {
  const auto raw = small_raw(1, 30, 50);
  Rng rng(4);
  const auto [train, test] = split_test(raw, SplitSpec{}, rng);
  CHECK(train.size() == 90 - 45);
  CHECK(test.size() == 45);
  std::array<int, 3> per{};
  for (const auto& t : test) ++per[static_cast<std::size_t>(t.label)];
  CHECK(per == std::array<int, 3>{15, 15, 15});
  std::set<std::size_t> ids;
  for (const auto& t : train) ids.insert(t.id);
  for (const auto& t : test) CHECK(ids.insert(t.id).second);
  CHECK(ids.size() == 90);

  Rng rng2(4);
  const auto few = small_raw(1, 10, 50);
  CHECK_THROWS_AS(split_test(few, SplitSpec{}, rng2), InsufficientClassCount);
}

TEST_CASE("kfold_split partitions the index set", "[data][property]") {
  for (std::size_t n : {5u, 10u, 12u, 13u, 17u, 255u}) {
    Rng rng(n);
    const auto folds = kfold_split(n, 5, rng);
    REQUIRE(folds.size() == 5);
    std::vector<int> seen(n, 0);
    for (const auto& f : folds) {
      CHECK(f.train.size() + f.val.size() == n);
      CHECK(f.val.size() >= n / 5);
      CHECK(f.val.size() <= n / 5 + 1);
      std::set<std::size_t> tr(f.train.begin(), f.train.end());
      CHECK(tr.size() == f.train.size());
      for (auto i : f.val) {
        CHECK(tr.count(i) == 0);
        ++seen[i];
      }
    }
    // every index validates exactly once
    for (int s : seen) CHECK(s == 1);
  }
  Rng rng(1);
  CHECK_THROWS_AS(kfold_split(4, 5, rng), std::invalid_argument);
}

TEST_CASE("rotation is an isometry and composes additively", "[data][property]") {
  Rng rng(31);
  for (int k = 0; k < 1000; ++k) {
    const Point p{rng.uniform(-4096, 4096), rng.uniform(-4096, 4096)};
    const Point q{rng.uniform(-4096, 4096), rng.uniform(-4096, 4096)};
    const double a = rng.uniform(0, 2 * std::numbers::pi), b = rng.uniform(0, 2 * std::numbers::pi);
    const auto rp = rotate(p, std::cos(a), std::sin(a));
    const auto rq = rotate(q, std::cos(a), std::sin(a));
    CHECK(std::hypot(rp.x - rq.x, rp.y - rq.y) == Catch::Approx(std::hypot(p.x - q.x, p.y - q.y)).margin(1e-9));
    CHECK(std::hypot(rp.x, rp.y) == Catch::Approx(std::hypot(p.x, p.y)).margin(1e-9));
    const auto ab = rotate(rotate(p, std::cos(b), std::sin(b)), std::cos(a), std::sin(a));
    const auto sum = rotate(p, std::cos(a + b), std::sin(a + b));
    CHECK(ab.x == Catch::Approx(sum.x).margin(1e-9));
    CHECK(ab.y == Catch::Approx(sum.y).margin(1e-9));
  }
}

TEST_CASE("rotation examples", "[data]") {
  const auto r = rotate({1, 0}, std::cos(std::numbers::pi / 2), std::sin(std::numbers::pi / 2));
  CHECK(r.x == Catch::Approx(0).margin(1e-12));
  CHECK(r.y == Catch::Approx(1).margin(1e-12));
  const auto z = rotate({3, 4}, std::cos(0.0), std::sin(0.0));
  CHECK(z == Point{3, 4});
}

TEST_CASE("augment_rotations draws one angle per trajectory", "[data]") {
  const auto raw = small_raw(2, 4, 50);
  Rng rng(9);
  const auto rot = augment_rotations(raw, rng);
  REQUIRE(rot.size() == raw.size());
  std::set<double> angles;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    CHECK(rot[i].id == raw[i].id);
    CHECK(rot[i].label == raw[i].label);
    // both boats turn by the same angle
    const double au = std::atan2(rot[i].u[0].y, rot[i].u[0].x) - std::atan2(raw[i].u[0].y, raw[i].u[0].x);
    const double av = std::atan2(rot[i].v[0].y, rot[i].v[0].x) - std::atan2(raw[i].v[0].y, raw[i].v[0].x);
    CHECK(std::remainder(au - av, 2 * std::numbers::pi) == Catch::Approx(0).margin(1e-9));
    angles.insert(std::round(std::remainder(au, 2 * std::numbers::pi) * 1e9));
  }
  CHECK(angles.size() == raw.size());
}

TEST_CASE("normalize and truncate", "[data]") {
  const auto raw = small_raw(3, 1, 100);
  const auto n = normalize(raw[0]);
  CHECK(n.u[0] == Point{0.5, 0.5});
  const auto t = truncate(raw[0], 10);
  CHECK(t.u.size() == 10);
  CHECK(t.v.size() == 10);
  CHECK(std::equal(t.u.begin(), t.u.end(), raw[0].u.begin()));
  CHECK_THROWS_AS(truncate(raw[0], 101), std::out_of_range);
  CHECK_THROWS_AS(truncate(raw[0], 0), std::out_of_range);
}

TEST_CASE("active_length trims the padded tail", "[data]") {
  LabeledTrajectory t{0, 1, {{0, 0}, {1, 1}, {2, 2}, {2, 2}, {2, 2}}, {{5, 5}, {5, 5}, {6, 5}, {6, 5}, {6, 5}}};
  CHECK(active_length(t) == 3);
}

TEST_CASE("CSV round trip is the identity", "[data][csv][property]") {
  const auto raw = small_raw(5, 3, 200);
  const auto text = to_csv(raw);
  CHECK(text.rfind("traj_id,label,t,ux,uy,vx,vy\n", 0) == 0);
  CHECK(from_csv(text) == raw);

  // reals already at 9 significant digits survive unchanged
  Rng rng(2);
  auto rot = augment_rotations(raw, rng);
  const auto once = to_csv(rot);
  const auto back = from_csv(once);
  CHECK(to_csv(back) == once);
  CHECK(from_csv(to_csv(back)) == back);
}

TEST_CASE("CSV formatting of numbers", "[data][csv]") {
  std::string s;
  append_number(s, 42.0);
  s += ' ';
  append_number(s, -3.0);
  s += ' ';
  append_number(s, 0.1234567891234);
  CHECK(s == "42 -3 0.123456789");
}

TEST_CASE("CSV errors name the offending row", "[data][csv]") {
  const std::string h = "traj_id,label,t,ux,uy,vx,vy\n";
  CHECK(parse_error_row("bogus\n") == 1);
  CHECK(parse_error_row(h + "0,0,0,1,2,3,4\n0,0,1,1,2,3\n") == 3);
  CHECK(parse_error_row(h + "0,0,0,1,2,3,4\n0,0,2,1,2,3,4\n") == 3);
  CHECK(parse_error_row(h + "0,5,0,1,2,3,4\n") == 2);
  CHECK(parse_error_row(h + "0,0,0,1,x,3,4\n") == 2);
  CHECK(parse_error_row(h + "0,0,0,1,2,3,4\n0,1,1,1,2,3,4\n") == 3);
  CHECK(parse_error_row(h + "0,0,0,1,2,3,4\n0,0,1,1,2,3,4\n1,0,0,1,2,3,4\n2,0,0,1,2,3,4\n") == 5);
  CHECK(parse_error_row(h + "0,0,1,1,2,3,4\n") == 2);
  CHECK(parse_error_row(h + "0,0,0,1,2,3,4\n") == 0);
}
