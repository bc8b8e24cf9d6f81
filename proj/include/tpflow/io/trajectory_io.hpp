// SPDX-License-Identifier: Apache-2.0
//
// Trajectory dumps (JSONL, one record per trajectory) and step reward tables
// (CSV, one row per trajectory and step).
//
// JSONL record fields: index, condition, seed, states ([x, y] for t = 0..T),
// used_sde / std / log_prob (for t = 1..T), and rewards (t = 0..T) when known.
//
// CSV header: trajectory,condition,t,value,r,s,flag,effective. The t = 0 row
// carries only the value; the other columns are empty.

#pragma once

#include "tpflow/grpo/credit.hpp"
#include "tpflow/train/trainer.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <vector>

namespace tpflow::io {

nlohmann::json to_json(const flow::Trajectory<double>& traj, std::size_t index,
                       const std::vector<double>* rewards = nullptr);

void write_trajectories_jsonl(std::ostream& out, const std::vector<train::TracedTrajectory>& traced);
void write_step_tables_csv(std::ostream& out, const std::vector<train::TracedTrajectory>& traced);

struct CsvTrace {
  int condition = 0;
  std::vector<double> values;           // t = 0..T
  std::vector<grpo::StepFlag> flags;    // t = 0..T, entry 0 unused
  std::vector<double> effective;        // t = 0..T, entry 0 unused
};

/// Parses a CSV written by write_step_tables_csv.
std::vector<CsvTrace> read_step_tables_csv(std::istream& in);

grpo::StepFlag step_flag_from_string(const std::string& name);

}  // namespace tpflow::io
