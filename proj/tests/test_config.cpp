#include <catch2/catch_amalgamated.hpp>

#include "trajclass/config.hpp"

using namespace trajclass;

TEST_CASE("default config round trips through its text form", "[config]") {
  const RunConfig cfg;
  CHECK(parse_config(cfg.to_text()) == cfg);
  CHECK(parse_config(cfg.to_text()).to_text() == cfg.to_text());
}

TEST_CASE("edited config round trips", "[config]") {
  RunConfig cfg;
  cfg.apply("master_seed", "18446744073709551615");
  cfg.apply("families", "gru, dense");
  cfg.apply("baselines", "none");
  cfg.apply("timesteps", "6000,500,500");
  cfg.apply("conditions", "rotated");
  cfg.apply("lstm.learning_rate", "0.1");
  cfg.apply("dense.hidden", "7,3");
  cfg.apply("gru.optimizer", "sgd");
  cfg.apply("entropy.exclude_padding", "false");
  cfg.apply("output_dir", " /tmp/some where ");
  CHECK(cfg.master_seed == 18446744073709551615ull);
  CHECK(cfg.families == std::vector<nn::Family>{nn::Family::GRU, nn::Family::Dense});
  CHECK(cfg.baselines.empty());
  CHECK(cfg.timesteps == std::vector<std::size_t>{500, 6000});
  CHECK(cfg.output_dir == "/tmp/some where");
  CHECK(cfg.models.at(nn::Family::LSTM).train.optimizer.learning_rate == 0.1);

  const auto back = parse_config(cfg.to_text());
  CHECK(back == cfg);
  CHECK(back.models.at(nn::Family::Dense).spec.hidden_sizes == std::vector<std::size_t>{7, 3});
  CHECK(back.models.at(nn::Family::GRU).train.optimizer.kind == nn::OptimizerKind::SGD);
  CHECK_FALSE(back.entropy.exclude_padding);
}

TEST_CASE("awkward reals survive the round trip", "[config]") {
  RunConfig cfg;
  for (double lr : {1e-3, 0.1 + 0.2, 3.0000000000000004e-7, 123456.789}) {
    cfg.models[nn::Family::Conv1D].train.optimizer.learning_rate = lr;
    CHECK(parse_config(cfg.to_text()).models.at(nn::Family::Conv1D).train.optimizer.learning_rate == lr);
  }
}

TEST_CASE("bad config input is rejected", "[config]") {
  RunConfig cfg;
  CHECK_THROWS_AS(cfg.apply("nonsense", "1"), std::invalid_argument);
  CHECK_THROWS_AS(cfg.apply("dense.nonsense", "1"), std::invalid_argument);
  CHECK_THROWS_AS(cfg.apply("mlp.epochs", "1"), std::invalid_argument);
  CHECK_THROWS_AS(cfg.apply("folds", "x"), std::invalid_argument);
  CHECK_THROWS_AS(cfg.apply("timesteps", "750"), std::invalid_argument);
  CHECK_THROWS_AS(cfg.apply("families", "dense,mlp"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("master_seed 3\n"), std::invalid_argument);
  CHECK_NOTHROW(parse_config("# comment\n\nmaster_seed = 3\n"));
}

TEST_CASE("plan built from config", "[config]") {
  RunConfig cfg;
  cfg.apply("families", "none");
  cfg.apply("baselines", "none");
  CHECK_THROWS_AS(cfg.plan().validate(), std::invalid_argument);
  cfg = RunConfig{};
  cfg.jobs = 3;
  const auto p = cfg.plan();
  CHECK(p.families.size() == 4);
  CHECK(p.baselines.size() == 4);
  CHECK(p.timesteps.size() == 12);
  CHECK(p.jobs == 3);
  CHECK(p.folds == 5);
  CHECK(p.seeds.master == cfg.master_seed);
}

TEST_CASE("derived seeds are functions of the master seed", "[config]") {
  RunConfig a, b;
  a.master_seed = b.master_seed = 42;
  CHECK(a.seeds().sim() == b.seeds().sim());
  CHECK(a.seeds().sim() == derive_seed(42, "sim"));
  CHECK(a.seeds().shuffle(2) == derive_seed(42, "shuffle", 2));
  b.master_seed = 43;
  CHECK(a.seeds().sim() != b.seeds().sim());
}
