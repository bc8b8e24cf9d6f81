// SPDX-License-Identifier: Apache-2.0
#include "tpflow/io/trajectory_io.hpp"

#include <charconv>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace tpflow::io {
namespace {

std::string exact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

grpo::StepFlag step_flag_from_string(const std::string& name) {
  if (name == "none") return grpo::StepFlag::None;
  if (name == "turning_point") return grpo::StepFlag::TurningPoint;
  if (name == "first_step_selected") return grpo::StepFlag::FirstStepSelected;
  throw ConfigError("unknown step flag '" + name + "'");
}

nlohmann::json to_json(const flow::Trajectory<double>& traj, std::size_t index, const std::vector<double>* rewards) {
  nlohmann::json states = nlohmann::json::array();
  for (const auto& x : traj.states) states.push_back({x.x(), x.y()});
  nlohmann::json used = nlohmann::json::array();
  nlohmann::json stds = nlohmann::json::array();
  nlohmann::json log_probs = nlohmann::json::array();
  for (int t = 1; t <= traj.num_steps(); ++t) {
    used.push_back(traj.step(t).used_sde);
    stds.push_back(traj.step(t).std);
    log_probs.push_back(traj.step(t).log_prob);
  }
  nlohmann::json j = {{"index", index},       {"condition", traj.condition}, {"seed", traj.seed},
                      {"states", states},     {"used_sde", used},            {"std", stds},
                      {"log_prob", log_probs}};
  if (rewards) j["rewards"] = *rewards;
  return j;
}

void write_trajectories_jsonl(std::ostream& out, const std::vector<train::TracedTrajectory>& traced) {
  for (std::size_t i = 0; i < traced.size(); ++i) {
    out << to_json(traced[i].trajectory, i, &traced[i].table.values).dump() << '\n';
  }
}

void write_step_tables_csv(std::ostream& out, const std::vector<train::TracedTrajectory>& traced) {
  out << "trajectory,condition,t,value,r,s,flag,effective\n";
  for (std::size_t i = 0; i < traced.size(); ++i) {
    const auto& table = traced[i].table;
    const int c = traced[i].trajectory.condition;
    for (int t = table.steps(); t >= 1; --t) {
      out << i << ',' << c << ',' << t << ',' << exact(table.values[std::size_t(t)]) << ','
          << exact(table.increments[std::size_t(t)]) << ',' << table.s[std::size_t(t)] << ','
          << grpo::to_string(table.flags[std::size_t(t)]) << ',' << exact(table.effective[std::size_t(t)]) << '\n';
    }
    out << i << ',' << c << ",0," << exact(table.values[0]) << ",,,,\n";
  }
}

std::vector<CsvTrace> read_step_tables_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "trajectory,condition,t,value,r,s,flag,effective") {
    throw ConfigError("trace CSV has an unexpected header");
  }
  std::map<std::size_t, CsvTrace> by_index;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 8) throw ConfigError("trace CSV row has " + std::to_string(cells.size()) + " cells");
    const std::size_t index = std::stoull(cells[0]);
    const int t = std::stoi(cells[2]);
    CsvTrace& trace = by_index[index];
    trace.condition = std::stoi(cells[1]);
    if (trace.values.size() <= std::size_t(t)) {
      trace.values.resize(std::size_t(t) + 1, 0.0);
      trace.flags.resize(std::size_t(t) + 1, grpo::StepFlag::None);
      trace.effective.resize(std::size_t(t) + 1, 0.0);
    }
    trace.values[std::size_t(t)] = std::stod(cells[3]);
    if (t > 0) {
      trace.flags[std::size_t(t)] = step_flag_from_string(cells[6]);
      trace.effective[std::size_t(t)] = std::stod(cells[7]);
    }
  }
  std::vector<CsvTrace> out;
  for (auto& [index, trace] : by_index) out.push_back(std::move(trace));
  return out;
}

}  // namespace tpflow::io
