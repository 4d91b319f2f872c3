#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "flsim/config.hpp"
#include "flsim/metrics.hpp"

namespace flsim::harness {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Analytic bound sweep
// ---------------------------------------------------------------------------

struct SweepRow {
  double axis_value = 0.0;
  int k = 0;
  long i_glob = -1;     // -1 on divergent cells
  bool divergent = false;
};

struct SweepTable {
  std::string axis;
  std::vector<SweepRow> rows;
};

inline constexpr const char* kSweepHeader = "axis,axis_value,k,i_glob,divergent";

// Evaluates the global-iteration bound over k in [k_min, k_max] for every
// axis value. Divergent cells become explicit sentinel rows.
inline SweepTable run_bound_sweep(const ExperimentSpec& spec) {
  static const std::set<std::string> analytic_axes = {"tau", "L", "varrho", "U"};
  if (analytic_axes.find(spec.sweep.name) == analytic_axes.end())
    throw ValidationError("sweep: axis must be one of tau|L|varrho|U");
  SweepTable table;
  table.axis = spec.sweep.name;
  for (double value : spec.sweep.values) {
    const ExperimentSpec cell = spec.with_axis_value(value);
    for (int k = cell.net.k_min; k <= cell.net.k_max; ++k) {
      SweepRow row;
      row.axis_value = value;
      row.k = k;
      try {
        row.i_glob = convergence::global_iterations(cell.learn, cell.gap, static_cast<double>(k),
                                                    cell.net.tau_s, cell.net.num_users);
      } catch (const DivergentRegimeError&) {
        row.divergent = true;
      }
      table.rows.push_back(row);
    }
  }
  return table;
}

inline void write_sweep_csv(const std::string& path, const SweepTable& table) {
  std::ofstream os(path);
  if (!os) throw ValidationError("sweep: cannot open for writing: " + path);
  os << kSweepHeader << "\n";
  for (const auto& r : table.rows) {
    os << table.axis << ',' << detail::fmt_double(r.axis_value) << ',' << r.k << ',' << r.i_glob
       << ',' << (r.divergent ? 1 : 0) << "\n";
  }
}

inline SweepTable read_sweep_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("sweep: cannot open: " + path);
  std::string line;
  if (!std::getline(is, line) || line != kSweepHeader)
    throw ValidationError("sweep: unexpected header in " + path);
  SweepTable table;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    SweepRow row;
    std::getline(ss, field, ',');
    table.axis = field;
    std::getline(ss, field, ',');
    row.axis_value = std::stod(field);
    std::getline(ss, field, ',');
    row.k = std::stoi(field);
    std::getline(ss, field, ',');
    row.i_glob = std::stol(field);
    std::getline(ss, field, ',');
    row.divergent = field == "1";
    table.rows.push_back(row);
  }
  return table;
}

// ---------------------------------------------------------------------------
// Synthetic convergence curves
// ---------------------------------------------------------------------------

struct ConvergencePoint {
  double axis_value = 0.0;
  int k = 0;
  long round = 0;
  double loss_gap_fraction = 1.0;  // rho_c^round, normalized to the initial gap
};

// Loss-gap trajectories implied by the per-round contraction factor, emitted
// for the two ends of the admissible k range of every axis value. Each curve
// runs until the gap fraction reaches the global accuracy target, which by
// construction happens within the global-iteration bound.
inline std::vector<ConvergencePoint> synthetic_convergence_curves(const ExperimentSpec& spec) {
  std::vector<ConvergencePoint> points;
  const std::vector<double> axis_values =
      spec.sweep.name == "none" ? std::vector<double>{0.0} : spec.sweep.values;
  for (double value : axis_values) {
    const ExperimentSpec cell = spec.sweep.name == "none" ? spec : spec.with_axis_value(value);
    for (int k : {cell.net.k_min, cell.net.k_max}) {
      double factor;
      try {
        factor = convergence::contraction_factor(cell.learn, cell.gap, static_cast<double>(k),
                                                 cell.net.tau_s, cell.net.num_users);
      } catch (const DivergentRegimeError&) {
        continue;  // divergent ends carry no curve
      }
      double gap = 1.0;
      long round = 0;
      points.push_back({value, k, round, gap});
      while (gap > cell.learn.global_accuracy) {
        gap *= factor;
        round += 1;
        points.push_back({value, k, round, gap});
      }
    }
  }
  return points;
}

inline constexpr const char* kConvergenceHeader = "axis_value,k,round,loss_gap_fraction";

inline void write_convergence_csv(const std::string& path,
                                  const std::vector<ConvergencePoint>& points) {
  std::ofstream os(path);
  if (!os) throw ValidationError("sweep: cannot open for writing: " + path);
  os << kConvergenceHeader << "\n";
  for (const auto& p : points)
    os << detail::fmt_double(p.axis_value) << ',' << p.k << ',' << p.round << ','
       << detail::fmt_double(p.loss_gap_fraction) << "\n";
}

// ---------------------------------------------------------------------------
// Gap-constant calibration
// ---------------------------------------------------------------------------

struct CalibrationTarget {
  double k = 0.0;
  double i_glob = 0.0;
};

struct CalibrationResult {
  double c0 = 0.0;
  double c1 = 0.0;
  std::vector<double> residuals;  // per target, continuous-bound units
};

namespace detail {

inline double bound_at(const ExperimentSpec& spec, double c0, double c1, double k) {
  convergence::GapParams gap = spec.gap;
  gap.c0 = c0;
  gap.c1 = c1;
  return convergence::global_iteration_bound(spec.learn, gap, k, spec.net.tau_s,
                                             spec.net.num_users);
}

// Monotone bisection for f(x) = target on [lo, hi]; f must be increasing.
template <typename F>
double bisect_increasing(F f, double lo, double hi, double target, int iters = 200) {
  double flo = f(lo);
  double fhi = f(hi);
  if (!(flo <= target && target <= fhi)) {
    std::ostringstream err;
    err << "calibration: target " << target << " outside achievable range [" << flo << ", " << fhi
        << "]";
    throw ValidationError(err.str());
  }
  for (int i = 0; i < iters; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) < target) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

// Solves for (c0, c1) so the continuous global-iteration bound passes through
// the first and last target point; remaining points are residual-checked.
// The bound is increasing in c0 (for any k) and decreasing in c1 (for k > 0),
// which makes a nested bisection exact.
inline CalibrationResult calibrate_gap_constants(std::vector<CalibrationTarget> targets,
                                                 const ExperimentSpec& spec) {
  if (targets.size() < 2)
    throw ValidationError("calibration: need at least two (k, i_glob) targets");
  std::sort(targets.begin(), targets.end(),
            [](const CalibrationTarget& a, const CalibrationTarget& b) { return a.k < b.k; });
  if (targets.front().k == targets.back().k)
    throw ValidationError("calibration: targets must span distinct k");
  for (const auto& t : targets)
    if (t.k < 0 || !(t.i_glob > 0))
      throw ValidationError("calibration: targets need k >= 0 and i_glob > 0");

  const CalibrationTarget lo_t = targets.front();
  const CalibrationTarget hi_t = targets.back();
  const double h_pz = spec.gap.entropy_pz_nats;
  const double c0_lo = 1e-12;
  const double c0_hi = h_pz;  // psi requires c0 e^{-c1 k tau} <= H_pz for all k

  // c0 matching the first target, given c1.
  const auto solve_c0 = [&](double c1) {
    return detail::bisect_increasing(
        [&](double c0) { return detail::bound_at(spec, c0, c1, lo_t.k); }, c0_lo, c0_hi,
        lo_t.i_glob);
  };

  const double log_c1_lo = std::log(1e-8);
  const double log_c1_hi = std::log(1e8);
  const auto hi_value = [&](double log_c1) {
    const double c1 = std::exp(log_c1);
    return detail::bound_at(spec, solve_c0(c1), c1, hi_t.k);
  };
  // Larger c1 decays the information usage faster, enlarging the gap
  // statement at k > 0 and shrinking the bound there: hi_value is decreasing,
  // so bisect on its negation.
  const double log_c1 = detail::bisect_increasing(
      [&](double x) { return -hi_value(x); }, log_c1_lo, log_c1_hi, -hi_t.i_glob);

  CalibrationResult result;
  result.c1 = std::exp(log_c1);
  result.c0 = solve_c0(result.c1);
  for (const auto& t : targets) {
    const double got = detail::bound_at(spec, result.c0, result.c1, t.k);
    result.residuals.push_back(got - t.i_glob);
    if (std::abs(got - t.i_glob) >= 0.5) {
      std::ostringstream err;
      err << "calibration: residual " << got - t.i_glob << " at k=" << t.k
          << " exceeds 0.5 iterations (targets not jointly reachable)";
      throw ValidationError(err.str());
    }
  }
  return result;
}

inline std::vector<CalibrationTarget> read_targets_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("calibration: cannot open targets file " + path);
  std::vector<CalibrationTarget> targets;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("k,", 0) == 0) continue;
    std::stringstream ss(line);
    std::string field;
    CalibrationTarget t;
    if (!std::getline(ss, field, ',')) continue;
    t.k = std::stod(field);
    if (!std::getline(ss, field, ',')) throw ValidationError("calibration: bad row: " + line);
    t.i_glob = std::stod(field);
    targets.push_back(t);
  }
  return targets;
}

// ---------------------------------------------------------------------------
// Training runner
// ---------------------------------------------------------------------------

struct TrainingOutput {
  std::vector<MetricsRecord> records;
  std::vector<SummaryRow> summary;
};

// Executes agents x sweep-values x seeds. Tasks may run in parallel; results
// are assembled in enumeration order so the output files are byte-identical
// regardless of scheduling.
inline TrainingOutput run_training(const ExperimentSpec& spec, int jobs = 1) {
  struct Task {
    rl::AgentKind kind;
    double axis_value;
    bool has_axis;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  const bool has_axis = spec.sweep.name != "none";
  const std::vector<double> axis_values = has_axis ? spec.sweep.values : std::vector<double>{0.0};
  for (const auto kind : spec.agents)
    for (double v : axis_values)
      for (auto seed : spec.seeds) tasks.push_back({kind, v, has_axis, seed});

  std::vector<std::vector<MetricsRecord>> results(tasks.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  const auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      const Task& t = tasks[i];
      try {
        ExperimentSpec cell = t.has_axis ? spec.with_axis_value(t.axis_value) : spec;
        const auto episodes = rl::train(t.kind, cell.train_inputs(), t.seed);
        std::ostringstream run_id;
        run_id << agent_kind_name(t.kind);
        if (t.has_axis) run_id << "_" << spec.sweep.name << "=" << t.axis_value;
        run_id << "_s" << t.seed;
        std::vector<MetricsRecord> rows;
        rows.reserve(episodes.size());
        for (const auto& e : episodes) {
          MetricsRecord r;
          r.run_id = run_id.str();
          r.agent = agent_kind_name(t.kind);
          r.axis_value = t.axis_value;
          r.seed = t.seed;
          r.episode = e.episode;
          r.steps = e.steps;
          r.total_reward = e.total_reward;
          r.sampling_j = e.sampling_j;
          r.compute_j = e.compute_j;
          r.transmit_j = e.transmit_j;
          r.p1_s = e.p1_s;
          r.p2_bits = e.p2_bits;
          r.completion_s = e.completion_s;
          r.episode_budget = e.episode_budget;
          rows.push_back(std::move(r));
        }
        results[i] = std::move(rows);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  jobs = std::max(1, jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < jobs; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  TrainingOutput out;
  for (auto& rows : results)
    out.records.insert(out.records.end(), rows.begin(), rows.end());
  out.summary = summarize(out.records);
  return out;
}

inline std::vector<std::string> agent_names(const ExperimentSpec& spec) {
  std::vector<std::string> names;
  for (auto kind : spec.agents) names.push_back(agent_kind_name(kind));
  return names;
}

// Writes records.csv, summary.csv and manifest.json under out_dir.
inline void write_training_output(const ExperimentSpec& spec, const TrainingOutput& out,
                                  const std::string& out_dir) {
  fs::create_directories(out_dir);
  write_records_csv(out_dir + "/records.csv", out.records);
  write_summary_csv(out_dir + "/summary.csv", out.summary);
  nlohmann::json manifest;
  manifest["schema_version"] = 1;
  manifest["kind"] = "training";
  manifest["name"] = spec.name;
  manifest["config_hash"] = spec.config_hash;
  manifest["seeds"] = spec.seeds;
  manifest["agents"] = agent_names(spec);
  manifest["sweep_axis"] = spec.sweep.name;
  manifest["sweep_values"] = spec.sweep.values;
  manifest["files"] = {"records.csv", "summary.csv"};
  write_manifest(out_dir + "/manifest.json", manifest);
}

inline void write_sweep_output(const ExperimentSpec& spec, const SweepTable& table,
                               const std::string& out_dir) {
  fs::create_directories(out_dir);
  write_sweep_csv(out_dir + "/sweep.csv", table);
  write_convergence_csv(out_dir + "/convergence_curves.csv", synthetic_convergence_curves(spec));
  nlohmann::json manifest;
  manifest["schema_version"] = 1;
  manifest["kind"] = "bound_sweep";
  manifest["name"] = spec.name;
  manifest["config_hash"] = spec.config_hash;
  manifest["sweep_axis"] = spec.sweep.name;
  manifest["sweep_values"] = spec.sweep.values;
  manifest["files"] = {"sweep.csv", "convergence_curves.csv"};
  write_manifest(out_dir + "/manifest.json", manifest);
}

// ---------------------------------------------------------------------------
// Plot-data emission
// ---------------------------------------------------------------------------

enum class PlotKind { reward_curve, energy_vs_pmax, iteration_sweep };

inline PlotKind parse_plot_kind(const std::string& name) {
  if (name == "reward_curve") return PlotKind::reward_curve;
  if (name == "energy_vs_pmax") return PlotKind::energy_vs_pmax;
  if (name == "iteration_sweep") return PlotKind::iteration_sweep;
  throw ValidationError("plot-data: kind must be reward_curve|energy_vs_pmax|iteration_sweep");
}

// Reads the outputs of `train` or `sweep` from `dir` and emits one delimited
// series file per requested figure kind, plus a companion manifest naming the
// inputs it was derived from.
inline std::vector<std::string> emit_plot_data(const std::string& dir, PlotKind kind) {
  std::vector<std::string> written;
  nlohmann::json source_manifest;
  {
    std::ifstream is(dir + "/manifest.json");
    if (!is) throw ValidationError("plot-data: no manifest.json in " + dir);
    is >> source_manifest;
  }

  if (kind == PlotKind::iteration_sweep) {
    const SweepTable table = read_sweep_csv(dir + "/sweep.csv");
    if (table.rows.empty()) throw ValidationError("plot-data: sweep table is empty");
    const std::string path = dir + "/plot_iteration_sweep.csv";
    std::ofstream os(path);
    os << "axis,axis_value,k,i_glob,divergent\n";
    for (const auto& r : table.rows)
      os << table.axis << ',' << detail::fmt_double(r.axis_value) << ',' << r.k << ',' << r.i_glob
         << ',' << (r.divergent ? 1 : 0) << "\n";
    written.push_back(path);
  } else {
    const auto records = read_records_csv(dir + "/records.csv");
    if (records.empty()) throw ValidationError("plot-data: records.csv is empty");
    if (kind == PlotKind::reward_curve) {
      // Per agent (and axis value), seed-averaged reward per episode.
      std::map<std::pair<std::string, double>, std::map<int, std::vector<double>>> series;
      for (const auto& r : records)
        series[{r.agent, r.axis_value}][r.episode].push_back(r.total_reward);
      for (const auto& [key, episodes] : series) {
        std::ostringstream name;
        name << dir << "/plot_reward_curve_" << key.first;
        if (key.second != 0.0) name << "_" << key.second;
        name << ".csv";
        std::ofstream os(name.str());
        os << "episode,reward_mean,reward_min,reward_max,n_runs\n";
        for (const auto& [episode, rewards] : episodes) {
          double sum = 0.0, lo = rewards.front(), hi = rewards.front();
          for (double v : rewards) {
            sum += v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
          }
          os << episode << ',' << detail::fmt_double(sum / rewards.size()) << ','
             << detail::fmt_double(lo) << ',' << detail::fmt_double(hi) << ',' << rewards.size()
             << "\n";
        }
        written.push_back(name.str());
      }
    } else {  // energy_vs_pmax
      if (source_manifest.value("sweep_axis", std::string()) != "p_max")
        throw ValidationError("plot-data: energy_vs_pmax needs records from a p_max sweep");
      // Final-quartile per-episode energies, averaged over seeds.
      std::map<std::pair<std::string, double>, std::map<std::string, std::vector<MetricsRecord>>>
          groups;
      for (const auto& r : records) groups[{r.agent, r.axis_value}][r.run_id].push_back(r);
      const std::string path = dir + "/plot_energy_vs_pmax.csv";
      std::ofstream os(path);
      os << "agent,p_max_w,total_j,transmit_j,compute_j,sampling_j\n";
      for (const auto& [key, runs] : groups) {
        double e_s = 0.0, e_c = 0.0, e_t = 0.0;
        for (const auto& [run_id, eps] : runs) {
          (void)run_id;
          const long n = static_cast<long>(eps.size());
          const long quartile = std::max<long>(1, n / 4);
          double s = 0.0, c = 0.0, t = 0.0;
          for (long i = n - quartile; i < n; ++i) {
            s += eps[static_cast<std::size_t>(i)].sampling_j;
            c += eps[static_cast<std::size_t>(i)].compute_j;
            t += eps[static_cast<std::size_t>(i)].transmit_j;
          }
          e_s += s / quartile;
          e_c += c / quartile;
          e_t += t / quartile;
        }
        const double inv = 1.0 / static_cast<double>(runs.size());
        os << key.first << ',' << detail::fmt_double(key.second) << ','
           << detail::fmt_double((e_s + e_c + e_t) * inv) << ',' << detail::fmt_double(e_t * inv)
           << ',' << detail::fmt_double(e_c * inv) << ',' << detail::fmt_double(e_s * inv) << "\n";
      }
      written.push_back(path);
    }
  }

  nlohmann::json manifest;
  manifest["schema_version"] = 1;
  manifest["kind"] = "plot_data";
  manifest["source_manifest"] = source_manifest;
  manifest["files"] = std::vector<std::string>();
  for (const auto& f : written) manifest["files"].push_back(fs::path(f).filename().string());
  write_manifest(dir + "/plot_manifest.json", manifest);
  return written;
}

}  // namespace flsim::harness
