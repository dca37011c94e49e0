#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "trajclass/nn/model.hpp"
#include "trajclass/nn/optimizer.hpp"
#include "trajclass/nn/train.hpp"

using namespace trajclass;
using namespace trajclass::nn;

namespace {

ModelSpec spec_for(Family f, std::size_t stride, std::vector<std::size_t> hidden, std::uint64_t seed = 1) {
  ModelSpec s;
  s.family = f;
  s.input_stride = stride;
  s.hidden_sizes = std::move(hidden);
  s.seed = seed;
  return s;
}

LabeledTrajectory constant_traj(std::size_t id, int label, Point at, std::size_t len) {
  LabeledTrajectory t;
  t.id = id;
  t.label = label;
  t.u.assign(len, at);
  t.v.assign(len, at);
  return t;
}

// Three constant trajectories per class at distinct positions.
Dataset toy_set(std::size_t len) {
  Dataset d;
  const Point centres[3] = {{0.2, 0.2}, {0.8, 0.2}, {0.5, 0.8}};
  std::size_t id = 0;
  for (int c = 0; c < 3; ++c) {
    for (int k = 0; k < 3; ++k) {
      const Point p{centres[c].x + 0.03 * k, centres[c].y - 0.02 * k};
      d.push_back(constant_traj(id++, c, p, len));
    }
  }
  return d;
}

}  // namespace

TEST_CASE("SGD arithmetic", "[nn][optimizer]") {
  std::vector<Parameter> ps{{"p", Tensor({1}, 1.0), Tensor({1}, 1.0)}};
  Optimizer sgd({OptimizerKind::SGD, 0.1});
  sgd.step(ps);
  CHECK(ps[0].value[0] == Catch::Approx(0.9));
  ps[0].grad.fill(0.0);
  sgd.step(ps);
  CHECK(ps[0].value[0] == Catch::Approx(0.9));
}

TEST_CASE("Adam first step moves each weight by about lr", "[nn][optimizer]") {
  for (double g : {1e-4, 1.0, 250.0, -3.0}) {
    std::vector<Parameter> ps{{"p", Tensor({2}, 0.5), Tensor({2}, g)}};
    OptimizerConfig cfg;
    cfg.learning_rate = 1e-3;
    Optimizer adam(cfg);
    adam.step(ps);
    // m_hat = g, v_hat = g^2 after bias correction
    const double expected = 0.5 - 1e-3 * g / (std::fabs(g) + 1e-8);
    CHECK(ps[0].value[0] == Catch::Approx(expected).epsilon(1e-12));
    CHECK(std::fabs(ps[0].value[1] - 0.5) == Catch::Approx(1e-3).epsilon(1e-3));
    CHECK(adam.steps_taken() == 1);
  }
}

TEST_CASE("build_model shapes", "[nn][model]") {
  Model dense(spec_for(Family::Dense, 1, {4}), 6000);
  CHECK(dense.parameter("dense0.W").value.shape == std::vector<std::size_t>{4, 12000});
  CHECK(dense.sequence_length() == 6000);

  Model lstm(spec_for(Family::LSTM, 10, {5}), 6000);
  CHECK(lstm.sequence_length() == 600);
  CHECK(lstm.parameter("lstm.W").value.shape == std::vector<std::size_t>{20, 2});
  CHECK(lstm.parameter("lstm.U").value.shape == std::vector<std::size_t>{20, 5});
  CHECK(lstm.parameter("dense0.W").value.shape == std::vector<std::size_t>{3, 5});

  Model conv(spec_for(Family::Conv1D, 10, {4, 7}), 500);
  CHECK(conv.parameter("conv.K").value.shape == std::vector<std::size_t>{4, 2, 2});
  CHECK(conv.parameter("dense0.W").value.shape == std::vector<std::size_t>{7, 49 * 4});
  CHECK(conv.parameter("dense1.W").value.shape == std::vector<std::size_t>{3, 7});

  Model gru(spec_for(Family::GRU, 50, {6}), 500);
  CHECK(gru.sequence_length() == 10);
  CHECK(gru.parameter("gru.U").value.shape == std::vector<std::size_t>{18, 6});

  CHECK(sequence_length(501, 10) == 51);
  CHECK_THROWS_AS(Model(spec_for(Family::LSTM, 1, {}), 10), std::invalid_argument);
  CHECK_THROWS_AS(Model(spec_for(Family::Conv1D, 10, {4}), 5), ShapeError);
  CHECK_THROWS_AS(Model(spec_for(Family::Dense, 0, {4}), 10), std::invalid_argument);
}

TEST_CASE("initialisation is seeded and follows the Glorot limits", "[nn][model]") {
  Model a(spec_for(Family::LSTM, 10, {8, 4}, 42), 500);
  Model b(spec_for(Family::LSTM, 10, {8, 4}, 42), 500);
  Model c(spec_for(Family::LSTM, 10, {8, 4}, 43), 500);
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    CHECK(a.parameters()[i].value == b.parameters()[i].value);
  }
  CHECK(a.parameters()[0].value != c.parameters()[0].value);

  const auto& w = a.parameter("lstm.W").value;
  const double limit = std::sqrt(6.0 / (32 + 2));
  for (double v : w.values) CHECK(std::fabs(v) <= limit);
  const auto& bias = a.parameter("lstm.b").value;
  for (std::size_t j = 0; j < 32; ++j) CHECK(bias[j] == (j >= 8 && j < 16 ? 1.0 : 0.0));
  for (double v : a.parameter("dense0.b").value.values) CHECK(v == 0.0);
}

TEST_CASE("model_input samples back from the newest point", "[nn][model]") {
  LabeledTrajectory t;
  for (int i = 0; i < 10; ++i) t.u.push_back({static_cast<double>(i), -static_cast<double>(i)});
  t.v = t.u;
  const auto in = model_input(t, 10, 4);
  CHECK(in == std::vector<double>{1, -1, 5, -5, 9, -9});
  CHECK_THROWS_AS(model_input(t, 11, 1), ShapeError);
}

TEST_CASE("predict ties go to label 0", "[nn][model]") {
  Model m(spec_for(Family::Dense, 5, {4}), 50);
  for (auto& v : m.parameter("dense1.W").value.values) v = 0.0;
  const auto t = constant_traj(0, 1, {0.3, 0.6}, 50);
  CHECK(m.predict(t) == 0);
  CHECK_THROWS_AS(m.predict(constant_traj(0, 1, {0.3, 0.6}, 40)), ShapeError);
}

TEST_CASE("forward passes are deterministic", "[nn][model]") {
  for (auto f : kAllFamilies) {
    Model m(spec_for(f, 10, {4, 3}), 100);
    const auto t = constant_traj(0, 0, {0.4, 0.1}, 100);
    CHECK(m.logits(t) == m.logits(t));
  }
}

TEST_CASE("Dense learns the separable toy set within 50 epochs", "[nn][train]") {
  const auto data = toy_set(20);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.batch_size = 3;
  cfg.optimizer.learning_rate = 1e-2;
  auto res = train(build_model(spec_for(Family::Dense, 1, {16}), 20), data, data, cfg);
  REQUIRE(res.history.size() == 50);
  CHECK(res.history.back().val_accuracy == 1.0);
  for (const auto& t : data) CHECK(res.model.predict(t) == t.label);
}

TEST_CASE("every family fits the toy set", "[nn][train]") {
  const auto data = toy_set(20);
  for (auto f : kAllFamilies) {
    TrainConfig cfg;
    cfg.epochs = 150;
    cfg.batch_size = 3;
    cfg.optimizer.learning_rate = 1e-2;
    auto res = train(build_model(spec_for(f, 2, {8, 8}), 20), data, data, cfg);
    INFO(to_string(f));
    CHECK(res.history.back().val_accuracy == 1.0);
  }
}

TEST_CASE("zero epochs leave the model unchanged", "[nn][train]") {
  const auto data = toy_set(20);
  Model m(spec_for(Family::GRU, 2, {4}), 20);
  TrainConfig cfg;
  cfg.epochs = 0;
  auto res = train(m, data, data, cfg);
  CHECK(res.history.empty());
  for (std::size_t i = 0; i < m.parameters().size(); ++i) {
    CHECK(res.model.parameters()[i].value == m.parameters()[i].value);
  }
}

TEST_CASE("training is deterministic under fixed seeds", "[nn][train]") {
  const auto data = toy_set(20);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 4;
  cfg.seed = 9;
  auto a = train(build_model(spec_for(Family::LSTM, 4, {4}), 20), data, data, cfg);
  auto b = train(build_model(spec_for(Family::LSTM, 4, {4}), 20), data, data, cfg);
  CHECK(a.history == b.history);
  CHECK(a.model.parameters()[0].value == b.model.parameters()[0].value);
}

TEST_CASE("divergence is reported", "[nn][train]") {
  auto data = toy_set(20);
  data[0].u[3].x = std::numeric_limits<double>::infinity();
  TrainConfig cfg;
  cfg.epochs = 2;
  CHECK_THROWS_AS(train(build_model(spec_for(Family::Dense, 1, {4}), 20), data, data, cfg), TrainingDiverged);
  CHECK_THROWS_AS(train(build_model(spec_for(Family::Dense, 1, {4}), 20), Dataset{}, data, cfg),
                  std::invalid_argument);
}

TEST_CASE("model archive round trip", "[nn][model]") {
  for (auto f : kAllFamilies) {
    Model m(spec_for(f, 5, {3, 2}, 17), 50);
    std::stringstream ss;
    save_model(m, ss);
    Model back = load_model(ss);
    CHECK(back.spec() == m.spec());
    CHECK(back.timesteps() == 50);
    for (std::size_t i = 0; i < m.parameters().size(); ++i) {
      CHECK(back.parameters()[i].name == m.parameters()[i].name);
      CHECK(back.parameters()[i].value == m.parameters()[i].value);
    }
  }
  std::stringstream bad("trajclass-model 2\n");
  CHECK_THROWS(load_model(bad));
}
