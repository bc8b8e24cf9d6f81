// SPDX-License-Identifier: Apache-2.0
#include "tpflow/parallel.hpp"
#include "tpflow/train/config.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace tpflow;
using train::ExperimentConfig;

TEST_CASE("defaults survive a JSON round trip") {
  const ExperimentConfig c;
  const auto back = train::config_from_json(train::to_json(c));
  CHECK(train::to_json(back) == train::to_json(c));
  CHECK(back.train.group_size == 24);
  CHECK(back.sampler.steps == 10);
  CHECK(back.sampler.alpha == 0.7);
  CHECK(back.loss.kl_beta == 0.0004);
}

TEST_CASE("overrides") {
  nlohmann::json doc = nlohmann::json::object();
  train::apply_override(doc, "train.lr=5e-4");
  train::apply_override(doc, "loss.variant=tp-constrained");
  train::apply_override(doc, "model.hidden=[32,32]");
  train::apply_override(doc, "sampler.final_step_sde=true");
  const auto c = train::config_from_json(doc);
  CHECK(c.train.lr == 5e-4);
  CHECK(c.loss.variant == grpo::Variant::TpConstrained);
  CHECK(c.model.hidden == std::vector<int>{32, 32});
  CHECK(c.sampler.final_step_sde);
}

TEST_CASE("unknown keys name themselves") {
  nlohmann::json doc = nlohmann::json::object();
  try {
    train::apply_override(doc, "train.learning_rate=1");
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "train.learning_rate");
  }
  try {
    train::config_from_json({{"sampler", {{"stepz", 4}}}});
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "sampler.stepz");
  }
  CHECK_THROWS_AS(train::apply_override(doc, "sampler"), ConfigError);
  CHECK_THROWS_AS(train::apply_override(doc, "sampler=3"), ConfigError);
}

TEST_CASE("invalid values") {
  const auto rejects = [](const std::string& o, const std::string& key) {
    nlohmann::json doc = nlohmann::json::object();
    train::apply_override(doc, o);
    try {
      train::config_from_json(doc);
      return false;
    } catch (const ConfigError& e) {
      return e.key() == key;
    }
  };
  CHECK(rejects("train.samples_per_iteration=50", "train.samples_per_iteration"));
  CHECK(rejects("train.group_size=1", "train.group_size"));
  CHECK(rejects("sampler.window=11", "sampler.window"));
  CHECK(rejects("loss.clip_eps=0", "loss.clip_eps"));
  CHECK(rejects("sampler.steps=\"ten\"", "sampler.steps"));
  CHECK(rejects("loss.variant=ppo", "loss.variant"));
}

TEST_CASE("config file plus overrides") {
  const auto path = std::filesystem::temp_directory_path() / "tpflow-unit-config.json";
  std::ofstream(path) << R"({"seed": 9, "train": {"iterations": 12}})";
  const auto c = train::load_config(path, {"train.iterations=4"});
  CHECK(c.seed == 9);
  CHECK(c.train.iterations == 4);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(train::load_config(path), ConfigError);
}

TEST_CASE("seed derivation") {
  CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
  CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 2));
  CHECK(derive_seed(0, 0, 0) != derive_seed(0, 0, 1));
}

TEST_CASE("parallel_for fills every slot and forwards exceptions") {
  std::vector<int> out(1000, 0);
  parallel_for(out.size(), [&](std::size_t i) { out[i] = int(i) * 2; });
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == int(i) * 2);
  CHECK_THROWS_AS(parallel_for(10, [](std::size_t i) {
    if (i == 7) throw NumericError("boom");
  }), NumericError);
}
