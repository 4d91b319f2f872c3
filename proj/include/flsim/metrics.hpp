#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "flsim/agents.hpp"
#include "flsim/errors.hpp"

namespace flsim::harness {

// One row of the training records table: a per-episode snapshot of one run.
// "episode_budget" is the step budget that actually bounded the episode
// (the analytic round bound under sampling control, the fixed horizon
// otherwise). All numeric fields are finite.
struct MetricsRecord {
  std::string run_id;
  std::string agent;
  double axis_value = 0.0;  // NaN-free; 0 when no sweep axis
  std::uint64_t seed = 0;
  int episode = 0;
  int steps = 0;
  double total_reward = 0.0;
  double sampling_j = 0.0;
  double compute_j = 0.0;
  double transmit_j = 0.0;
  double p1_s = 0.0;
  double p2_bits = 0.0;
  double completion_s = 0.0;
  double episode_budget = 0.0;
};

inline constexpr const char* kRecordsHeader =
    "run_id,agent,axis_value,seed,episode,steps,total_reward,sampling_j,compute_j,transmit_j,"
    "p1_s,p2_bits,completion_s,episode_budget";

namespace detail {

// %.17g round-trips doubles exactly through text.
inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline void write_records_csv(const std::string& path, const std::vector<MetricsRecord>& records) {
  std::ofstream os(path);
  if (!os) throw ValidationError("metrics: cannot open for writing: " + path);
  os << kRecordsHeader << "\n";
  for (const auto& r : records) {
    os << r.run_id << ',' << r.agent << ',' << detail::fmt_double(r.axis_value) << ',' << r.seed
       << ',' << r.episode << ',' << r.steps << ',' << detail::fmt_double(r.total_reward) << ','
       << detail::fmt_double(r.sampling_j) << ',' << detail::fmt_double(r.compute_j) << ','
       << detail::fmt_double(r.transmit_j) << ',' << detail::fmt_double(r.p1_s) << ','
       << detail::fmt_double(r.p2_bits) << ',' << detail::fmt_double(r.completion_s) << ','
       << detail::fmt_double(r.episode_budget) << "\n";
  }
}

inline std::vector<MetricsRecord> read_records_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("metrics: cannot open: " + path);
  std::string line;
  if (!std::getline(is, line)) throw ValidationError("metrics: empty file: " + path);
  if (line != kRecordsHeader) throw ValidationError("metrics: unexpected header in " + path);
  std::vector<MetricsRecord> records;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    MetricsRecord r;
    auto next = [&]() {
      if (!std::getline(ss, field, ',')) throw ValidationError("metrics: short row in " + path);
      return field;
    };
    r.run_id = next();
    r.agent = next();
    r.axis_value = std::stod(next());
    r.seed = std::stoull(next());
    r.episode = std::stoi(next());
    r.steps = std::stoi(next());
    r.total_reward = std::stod(next());
    r.sampling_j = std::stod(next());
    r.compute_j = std::stod(next());
    r.transmit_j = std::stod(next());
    r.p1_s = std::stod(next());
    r.p2_bits = std::stod(next());
    r.completion_s = std::stod(next());
    r.episode_budget = std::stod(next());
    records.push_back(std::move(r));
  }
  return records;
}

// Seed-averaged digest per (agent, axis value) group; a pure function of the
// records so it can be recomputed offline from the CSV.
struct SummaryRow {
  std::string agent;
  double axis_value = 0.0;
  int num_runs = 0;
  int episodes_per_run = 0;
  double mean_reward = 0.0;
  double first_decile_reward = 0.0;  // mean over the first 10% of episodes
  double final_decile_reward = 0.0;  // mean over the last 10% of episodes
  double final_quartile_reward = 0.0;
  double mean_energy_j = 0.0;
  double mean_completion_s = 0.0;
};

inline std::vector<SummaryRow> summarize(const std::vector<MetricsRecord>& records) {
  std::map<std::pair<std::string, double>, std::map<std::string, std::vector<MetricsRecord>>>
      groups;
  for (const auto& r : records) groups[{r.agent, r.axis_value}][r.run_id].push_back(r);
  std::vector<SummaryRow> rows;
  for (const auto& [key, runs] : groups) {
    SummaryRow row;
    row.agent = key.first;
    row.axis_value = key.second;
    row.num_runs = static_cast<int>(runs.size());
    double sum_reward = 0.0, sum_first = 0.0, sum_final10 = 0.0, sum_final25 = 0.0;
    double sum_energy = 0.0, sum_completion = 0.0;
    long total_episodes = 0;
    for (const auto& [run_id, eps] : runs) {
      (void)run_id;
      const auto n = static_cast<long>(eps.size());
      total_episodes += n;
      const long decile = std::max<long>(1, n / 10);
      const long quartile = std::max<long>(1, n / 4);
      double first = 0.0, last10 = 0.0, last25 = 0.0, all = 0.0, energy = 0.0, completion = 0.0;
      for (long i = 0; i < n; ++i) {
        const auto& e = eps[static_cast<std::size_t>(i)];
        all += e.total_reward;
        energy += e.sampling_j + e.compute_j + e.transmit_j;
        completion += e.completion_s;
        if (i < decile) first += e.total_reward;
        if (i >= n - decile) last10 += e.total_reward;
        if (i >= n - quartile) last25 += e.total_reward;
      }
      sum_reward += all / static_cast<double>(n);
      sum_first += first / static_cast<double>(decile);
      sum_final10 += last10 / static_cast<double>(decile);
      sum_final25 += last25 / static_cast<double>(quartile);
      sum_energy += energy / static_cast<double>(n);
      sum_completion += completion / static_cast<double>(n);
    }
    const double inv = 1.0 / static_cast<double>(row.num_runs);
    row.episodes_per_run = static_cast<int>(total_episodes / row.num_runs);
    row.mean_reward = sum_reward * inv;
    row.first_decile_reward = sum_first * inv;
    row.final_decile_reward = sum_final10 * inv;
    row.final_quartile_reward = sum_final25 * inv;
    row.mean_energy_j = sum_energy * inv;
    row.mean_completion_s = sum_completion * inv;
    rows.push_back(std::move(row));
  }
  return rows;
}

inline constexpr const char* kSummaryHeader =
    "agent,axis_value,num_runs,episodes_per_run,mean_reward,first_decile_reward,"
    "final_decile_reward,final_quartile_reward,mean_energy_j,mean_completion_s";

inline void write_summary_csv(const std::string& path, const std::vector<SummaryRow>& rows) {
  std::ofstream os(path);
  if (!os) throw ValidationError("metrics: cannot open for writing: " + path);
  os << kSummaryHeader << "\n";
  for (const auto& r : rows) {
    os << r.agent << ',' << detail::fmt_double(r.axis_value) << ',' << r.num_runs << ','
       << r.episodes_per_run << ',' << detail::fmt_double(r.mean_reward) << ','
       << detail::fmt_double(r.first_decile_reward) << ','
       << detail::fmt_double(r.final_decile_reward) << ','
       << detail::fmt_double(r.final_quartile_reward) << ','
       << detail::fmt_double(r.mean_energy_j) << ',' << detail::fmt_double(r.mean_completion_s)
       << "\n";
  }
}

inline void write_manifest(const std::string& path, const nlohmann::json& manifest) {
  std::ofstream os(path);
  if (!os) throw ValidationError("metrics: cannot open for writing: " + path);
  os << manifest.dump(2) << "\n";
}

}  // namespace flsim::harness
