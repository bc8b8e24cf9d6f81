// SPDX-License-Identifier: Apache-2.0
#include "tpflow/train/config.hpp"

#include "tpflow/io/json_codec.hpp"

#include <fstream>
#include <sstream>

namespace tpflow {
namespace io {

nlohmann::json to_json(const nn::MlpSpec& spec) {
  return {{"input_dim", spec.input_dim},
          {"hidden", spec.hidden_dims},
          {"output_dim", spec.output_dim},
          {"activation", nn::to_string(spec.activation)}};
}

nn::MlpSpec mlp_spec_from_json(const nlohmann::json& j) {
  try {
    nn::MlpSpec spec{j.at("input_dim").get<int>(), j.at("hidden").get<std::vector<int>>(),
                     j.at("output_dim").get<int>(),
                     nn::activation_from_string(j.at("activation").get<std::string>())};
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("model spec", e.what());
  }
}

}  // namespace io

namespace train {
namespace {

using nlohmann::json;

std::string to_string(BalanceScope scope) {
  return scope == BalanceScope::GradientBatch ? "gradient-batch" : "iteration";
}

BalanceScope balance_scope_from_string(const std::string& name) {
  if (name == "gradient-batch") return BalanceScope::GradientBatch;
  if (name == "iteration") return BalanceScope::Iteration;
  throw ConfigError("train.balance_scope", "unknown scope '" + name + "'");
}

void merge_strict(json& into, const json& from, const std::string& prefix) {
  if (!from.is_object()) throw ConfigError(prefix.empty() ? "<root>" : prefix, "expected an object");
  for (auto it = from.begin(); it != from.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!into.contains(it.key())) throw ConfigError(key, "unknown key");
    json& slot = into[it.key()];
    if (slot.is_object()) {
      merge_strict(slot, it.value(), key);
    } else {
      slot = it.value();
    }
  }
}

/// Reads doc[a][b]... for a dotted path, reporting the path on type errors.
template <class T>
T field(const json& doc, const std::string& path) {
  const json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string part = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part)) throw ConfigError(path, "missing");
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  try {
    return node->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path, "has the wrong type (" + std::string(node->type_name()) + ")");
  }
}

}  // namespace

nn::MlpSpec ExperimentConfig::mlp_spec() const {
  return nn::MlpSpec::velocity_field(reward.num_conditions(), model.hidden, model.activation);
}

flow::SamplerConfig<double> ExperimentConfig::sampler_config() const {
  return {sampler.alpha, flow::TimeGrid<double>::uniform(sampler.steps, sampler.tau_max), sampler.window,
          sampler.final_step_sde};
}

flow::TimeGrid<double> ExperimentConfig::eval_grid() const {
  return flow::TimeGrid<double>::uniform(eval.steps, sampler.tau_max);
}

void ExperimentConfig::validate() const {
  reward.validate();
  mlp_spec().validate();
  sampler_config().validate();
  loss.validate();
  if (data.samples_per_condition < 1) throw ConfigError("data.samples_per_condition", "must be positive");
  if (!(data.spread >= 0.0)) throw ConfigError("data.spread", "must be non-negative");
  if (pretrain.iterations < 0) throw ConfigError("pretrain.iterations", "must be non-negative");
  if (pretrain.batch_size < 1) throw ConfigError("pretrain.batch_size", "must be positive");
  if (!(pretrain.lr > 0.0)) throw ConfigError("pretrain.lr", "must be positive");
  if (train.iterations < 0) throw ConfigError("train.iterations", "must be non-negative");
  if (train.group_size < 2) throw ConfigError("train.group_size", "must be at least 2");
  if (train.samples_per_iteration < 1 || train.samples_per_iteration % train.group_size != 0) {
    throw ConfigError("train.samples_per_iteration", "must be a positive multiple of train.group_size");
  }
  if (train.inner_epochs < 1) throw ConfigError("train.inner_epochs", "must be at least 1");
  if (!(train.lr > 0.0)) throw ConfigError("train.lr", "must be positive");
  if (train.checkpoint_every < 0) throw ConfigError("train.checkpoint_every", "must be non-negative");
  if (eval.steps < 1) throw ConfigError("eval.steps", "must be at least 1");
  if (eval.samples_per_condition < 1) throw ConfigError("eval.samples_per_condition", "must be positive");
  if (eval.every < 0) throw ConfigError("eval.every", "must be non-negative");
}

nlohmann::json to_json(const ExperimentConfig& c) {
  json centers = json::array();
  for (const auto& p : c.reward.centers) centers.push_back({p.x(), p.y()});
  return {
      {"seed", c.seed},
      {"model", {{"hidden", c.model.hidden}, {"activation", nn::to_string(c.model.activation)}}},
      {"reward",
       {{"kind", reward::to_string(c.reward.kind)}, {"centers", centers}, {"bandwidth", c.reward.bandwidth}}},
      {"data",
       {{"spread", c.data.spread},
        {"samples_per_condition", c.data.samples_per_condition},
        {"seed", c.data.seed}}},
      {"pretrain",
       {{"iterations", c.pretrain.iterations},
        {"batch_size", c.pretrain.batch_size},
        {"lr", c.pretrain.lr},
        {"holdout_size", c.pretrain.holdout_size},
        {"seed", c.pretrain.seed}}},
      {"sampler",
       {{"steps", c.sampler.steps},
        {"alpha", c.sampler.alpha},
        {"window", c.sampler.window},
        {"final_step_sde", c.sampler.final_step_sde},
        {"tau_max", c.sampler.tau_max}}},
      {"loss",
       {{"variant", grpo::to_string(c.loss.variant)},
        {"clip_eps", c.loss.clip_eps},
        {"kl_beta", c.loss.kl_beta},
        {"balance", c.loss.balance},
        {"first_step_rule", c.loss.first_step_rule}}},
      {"train",
       {{"iterations", c.train.iterations},
        {"samples_per_iteration", c.train.samples_per_iteration},
        {"group_size", c.train.group_size},
        {"inner_epochs", c.train.inner_epochs},
        {"lr", c.train.lr},
        {"checkpoint_every", c.train.checkpoint_every},
        {"balance_scope", to_string(c.train.balance_scope)}}},
      {"eval",
       {{"steps", c.eval.steps},
        {"samples_per_condition", c.eval.samples_per_condition},
        {"every", c.eval.every},
        {"seed", c.eval.seed}}},
  };
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  json doc = to_json(ExperimentConfig{});
  merge_strict(doc, j, "");

  ExperimentConfig c;
  c.seed = field<std::uint64_t>(doc, "seed");
  c.model.hidden = field<std::vector<int>>(doc, "model.hidden");
  c.model.activation = nn::activation_from_string(field<std::string>(doc, "model.activation"));

  c.reward.kind = reward::reward_kind_from_string(field<std::string>(doc, "reward.kind"));
  c.reward.bandwidth = field<double>(doc, "reward.bandwidth");
  c.reward.centers.clear();
  for (const auto& p : field<std::vector<std::vector<double>>>(doc, "reward.centers")) {
    if (p.size() != std::size_t(kStateDim)) throw ConfigError("reward.centers", "each center needs 2 coordinates");
    c.reward.centers.emplace_back(p[0], p[1]);
  }

  c.data.spread = field<double>(doc, "data.spread");
  c.data.samples_per_condition = field<int>(doc, "data.samples_per_condition");
  c.data.seed = field<std::uint64_t>(doc, "data.seed");

  c.pretrain.iterations = field<int>(doc, "pretrain.iterations");
  c.pretrain.batch_size = field<int>(doc, "pretrain.batch_size");
  c.pretrain.lr = field<double>(doc, "pretrain.lr");
  c.pretrain.holdout_size = field<int>(doc, "pretrain.holdout_size");
  c.pretrain.seed = field<std::uint64_t>(doc, "pretrain.seed");

  c.sampler.steps = field<int>(doc, "sampler.steps");
  c.sampler.alpha = field<double>(doc, "sampler.alpha");
  c.sampler.window = field<int>(doc, "sampler.window");
  c.sampler.final_step_sde = field<bool>(doc, "sampler.final_step_sde");
  c.sampler.tau_max = field<double>(doc, "sampler.tau_max");

  c.loss.variant = grpo::variant_from_string(field<std::string>(doc, "loss.variant"));
  c.loss.clip_eps = field<double>(doc, "loss.clip_eps");
  c.loss.kl_beta = field<double>(doc, "loss.kl_beta");
  c.loss.balance = field<bool>(doc, "loss.balance");
  c.loss.first_step_rule = field<bool>(doc, "loss.first_step_rule");

  c.train.iterations = field<int>(doc, "train.iterations");
  c.train.samples_per_iteration = field<int>(doc, "train.samples_per_iteration");
  c.train.group_size = field<int>(doc, "train.group_size");
  c.train.inner_epochs = field<int>(doc, "train.inner_epochs");
  c.train.lr = field<double>(doc, "train.lr");
  c.train.checkpoint_every = field<int>(doc, "train.checkpoint_every");
  c.train.balance_scope = balance_scope_from_string(field<std::string>(doc, "train.balance_scope"));

  c.eval.steps = field<int>(doc, "eval.steps");
  c.eval.samples_per_condition = field<int>(doc, "eval.samples_per_condition");
  c.eval.every = field<int>(doc, "eval.every");
  c.eval.seed = field<std::uint64_t>(doc, "eval.seed");

  c.validate();
  return c;
}

void apply_override(nlohmann::json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError(assignment, "override must look like key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);

  const json defaults = to_json(ExperimentConfig{});
  const json* known = &defaults;
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!known->is_object() || !known->contains(part)) throw ConfigError(key, "unknown key");
    known = &(*known)[part];
    if (!node->is_object()) *node = json::object();
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (known->is_object()) throw ConfigError(key, "cannot override a whole section");
  json value = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = text;
  *node = std::move(value);
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  json doc = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open " + path.string());
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("config", std::string("invalid JSON: ") + e.what());
    }
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return config_from_json(doc);
}

}  // namespace train
}  // namespace tpflow
