// SPDX-License-Identifier: Apache-2.0
#include "oracles.hpp"

#include "tpflow/grpo/advantage.hpp"
#include "tpflow/grpo/credit.hpp"

#include <doctest.h>

#include <random>

using namespace tpflow;
using namespace tpflow::grpo;

namespace {

/// Listing x_T .. x_0 as written in examples, re-indexed by t.
std::vector<double> by_t(std::vector<double> listing_T_to_0) { return {listing_T_to_0.rbegin(), listing_T_to_0.rend()}; }

std::vector<bool> all_steps(int steps) {
  std::vector<bool> mask(std::size_t(steps + 1), true);
  mask[0] = false;
  return mask;
}

std::vector<int> points(const std::vector<double>& v, Variant variant) {
  return detect_turning_points(std::span<const double>(v), variant);
}

}  // namespace

TEST_CASE("increments") {
  const auto v = by_t({0.4, 0.7, 0.9});
  const auto r = step_increments(std::span<const double>(v));
  CHECK(r[2] == doctest::Approx(0.3));
  CHECK(r[1] == doctest::Approx(0.2));
  CHECK(r[1] + r[2] == doctest::Approx(v[0] - v[2]));
  const std::vector<double> flat(5, 0.3);
  for (double x : step_increments(std::span<const double>(flat))) CHECK(x == 0.0);
}

TEST_CASE("trend signs") {
  const auto v = by_t({0.5, 0.6, 0.4, 0.7, 0.9});
  const auto s = trend_signs(std::span<const double>(v));
  CHECK(s[4] == 1);
  CHECK(s[3] == -1);
  CHECK(s[2] == 1);
  CHECK(s[1] == 1);

  const auto up = by_t({0.1, 0.2, 0.3, 0.4});
  for (int t = 1; t <= 3; ++t) CHECK(trend_signs(std::span<const double>(up))[std::size_t(t)] == 1);
  const auto tie = by_t({0.1, 0.2, 0.2, 0.4});
  CHECK(trend_signs(std::span<const double>(tie))[2] == 0);
}

TEST_CASE("turning point shared by both definitions") {
  const auto v = by_t({0.5, 0.6, 0.4, 0.7, 0.9});
  CHECK(points(v, Variant::TpUnconstrained) == std::vector<int>{2});
  CHECK(points(v, Variant::TpConstrained) == std::vector<int>{2});
  CHECK(step_increments(std::span<const double>(v))[2] == doctest::Approx(0.3));
  CHECK(aggregated_reward(std::span<const double>(v), 2) == doctest::Approx(0.5));
}

TEST_CASE("turning point only without the constraint") {
  const auto v = by_t({0.5, 0.7, 0.3, 1.0, 0.8});
  CHECK(points(v, Variant::TpUnconstrained) == std::vector<int>{2});
  CHECK(points(v, Variant::TpConstrained).empty());
  CHECK(step_increments(std::span<const double>(v))[2] == doctest::Approx(0.7));
  CHECK(aggregated_reward(std::span<const double>(v), 2) == doctest::Approx(0.5));
}

TEST_CASE("monotone sequences have no turning points") {
  const auto v = by_t({0.1, 0.3, 0.35, 0.8, 0.9});
  CHECK(points(v, Variant::TpUnconstrained).empty());
  CHECK(points(v, Variant::TpConstrained).empty());
  CHECK_THROWS_AS(points(v, Variant::BaselineTerminal), ContractError);
}

TEST_CASE("detector agrees with the listing-order oracle") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> listing(8);
    for (auto& x : listing) x = u(rng);
    const auto v = by_t(listing);
    for (bool constrained : {false, true}) {
      const auto got = points(v, constrained ? Variant::TpConstrained : Variant::TpUnconstrained);
      const auto want = oracle::turning_points(listing, constrained);
      CHECK(std::set<int>(got.begin(), got.end()) == want);
    }
  }
}

TEST_CASE("first-step rule") {
  CHECK(select_first_step(std::span<const double>(by_t({0.5, 0.6, 0.7, 0.9}))));
  CHECK_FALSE(select_first_step(std::span<const double>(by_t({0.5, 0.5, 0.7, 0.9}))));
  CHECK_FALSE(select_first_step(std::span<const double>(by_t({0.5, 0.4, 0.7, 0.9}))));
}

TEST_CASE("aggregated reward") {
  const auto v = by_t({0.5, 0.6, 0.4, 0.7, 0.9});
  CHECK(aggregated_reward(std::span<const double>(v), 1) == step_increments(std::span<const double>(v))[1]);
  const std::vector<double> flat(4, 0.2);
  for (int t = 1; t <= 3; ++t) CHECK(aggregated_reward(std::span<const double>(flat), t) == 0.0);
}

TEST_CASE("step table per variant") {
  const auto v = by_t({0.5, 0.6, 0.4, 0.7, 0.9});
  const auto base = build_step_table<double>(v, {Variant::BaselineTerminal, true}, all_steps(4));
  for (int t = 1; t <= 4; ++t) CHECK(base.effective[std::size_t(t)] == 0.9);

  const auto tp = build_step_table<double>(v, {Variant::TpUnconstrained, true}, all_steps(4));
  CHECK(tp.flags[2] == StepFlag::TurningPoint);
  CHECK(tp.effective[2] == doctest::Approx(0.5));
  CHECK(tp.flags[4] == StepFlag::FirstStepSelected);
  CHECK(tp.effective[4] == doctest::Approx(0.4));
  CHECK(tp.flags[3] == StepFlag::None);
  CHECK(tp.effective[3] == doctest::Approx(-0.2));

  const auto no_first = build_step_table<double>(v, {Variant::TpUnconstrained, false}, all_steps(4));
  CHECK(no_first.flags[4] == StepFlag::None);
  CHECK(no_first.effective[4] == doctest::Approx(0.1));

  auto mask = all_steps(4);
  mask[2] = false;
  const auto masked = build_step_table<double>(v, {Variant::TpUnconstrained, true}, mask);
  CHECK(masked.flags[2] == StepFlag::None);
}

TEST_CASE("balancing keeps the largest of each sign") {
  const std::vector<ReplacementCandidate> c{{0, 1, 0.5}, {1, 1, 0.2}, {2, 1, -0.3}};
  const auto kept = balance_replacements(c);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].trajectory == 0);
  CHECK(kept[1].trajectory == 2);

  const std::vector<ReplacementCandidate> positive{{0, 1, 0.5}, {1, 2, 0.2}};
  CHECK(balance_replacements(positive).empty());
  const std::vector<ReplacementCandidate> even{{0, 1, 0.5}, {1, 2, -0.2}};
  CHECK(balance_replacements(even).size() == 2);
}

TEST_CASE("balancing tables reverts dropped replacements") {
  // Three trajectories whose step 2 is a turning point with r_agg +0.5, +0.2, -0.3.
  std::vector<StepRewardTable<double>> tables{
      build_step_table<double>(by_t({0.5, 0.6, 0.4, 0.7, 0.9}), {Variant::TpUnconstrained, false}, all_steps(4)),
      build_step_table<double>(by_t({0.5, 0.6, 0.4, 0.5, 0.6}), {Variant::TpUnconstrained, false}, all_steps(4)),
      build_step_table<double>(by_t({0.5, 0.4, 0.6, 0.3, 0.3}), {Variant::TpUnconstrained, false}, all_steps(4)),
  };
  REQUIRE(tables[0].flags[2] == StepFlag::TurningPoint);
  REQUIRE(tables[1].flags[2] == StepFlag::TurningPoint);
  REQUIRE(tables[2].flags[2] == StepFlag::TurningPoint);
  CHECK(tables[1].effective[2] == doctest::Approx(0.2));
  CHECK(tables[2].effective[2] == doctest::Approx(-0.3));

  CHECK(balance_tables(std::span<StepRewardTable<double>>(tables), 2) == 2);
  CHECK(tables[0].flags[2] == StepFlag::TurningPoint);
  CHECK(tables[1].flags[2] == StepFlag::None);
  CHECK(tables[1].effective[2] == tables[1].increments[2]);
  CHECK(tables[2].flags[2] == StepFlag::TurningPoint);
}

TEST_CASE("advantages by hand") {
  std::vector<StepRewardTable<double>> group(2);
  for (auto& t : group) {
    t.values.assign(3, 0.0);
    t.effective.assign(3, 0.0);
  }
  group[0].effective[1] = 1.0;
  group[0].effective[2] = 0.4;
  group[1].effective[2] = 0.4;
  const auto adv = compute_advantages(std::span<const StepRewardTable<double>>(group));
  CHECK(adv(0, 0) == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(adv(1, 0) == doctest::Approx(-1.0).epsilon(1e-7));
  CHECK(adv(0, 1) == 0.0);
  CHECK(adv(1, 1) == 0.0);
  CHECK_THROWS_AS(compute_advantages(std::span<const StepRewardTable<double>>(group.data(), 1)), ConfigError);
}

TEST_CASE("variant names") {
  CHECK(variant_from_string("flow-grpo") == Variant::BaselineTerminal);
  CHECK(variant_from_string("tp") == Variant::TpUnconstrained);
  CHECK(variant_from_string("tp-constrained") == Variant::TpConstrained);
  CHECK(to_string(Variant::TpConstrained) == "tp-constrained");
  CHECK_THROWS_AS(variant_from_string("grpo"), ConfigError);
}
