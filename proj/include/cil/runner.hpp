#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cil/data.hpp"
#include "cil/metrics.hpp"
#include "cil/strategies.hpp"
#include "cil/stream.hpp"

namespace cil {

// mad: threshold metrics on P(morphed), composite = mad_point (lower better).
// cls: top-1 accuracy (higher better).
enum class MetricProfile { mad, cls };

MetricProfile parse_profile(const std::string& name);
std::string to_string(MetricProfile profile);

struct RunConfig {
  StrategyConfig strategy;
  SizeSchedule schedule;
  std::vector<int> order;  // source visit order; empty = identity
  std::vector<std::size_t> hidden_widths{250, 125, 64};
  double learning_rate = 1e-2;
  double momentum = 0.9;
  MetricProfile profile = MetricProfile::mad;
  std::uint64_t seed = 0;
};

// One testing experience. Threshold metrics are NaN when the label space
// is not binary.
struct MetricRecord {
  int experience_index = 0;
  double eer = 0.0;
  double bpcer10 = 0.0;   // BPCER at APCER <= 0.10
  double bpcer1 = 0.0;    //                <= 0.01
  double bpcer01 = 0.0;   //                <= 0.001
  double top1 = 0.0;
  double mad_point = 0.0;
};

struct RunResult {
  std::uint64_t fingerprint = 0;
  std::vector<MetricRecord> records;  // one per training experience
  std::vector<std::size_t> dropped_per_source;
  double auc_eer = 0.0;
  double auc_bpcer10 = 0.0;
  double auc_bpcer1 = 0.0;
  double auc_bpcer01 = 0.0;
  double auc_top1 = 0.0;
  double auc_mad_point = 0.0;
  double auc_profile = 0.0;      // composite metric, divided by N
  double auc_profile_nm1 = 0.0;  // alternate N-1 normalization
  double wall_seconds = 0.0;
};

std::uint64_t config_fingerprint(const RunConfig& cfg);
std::string fingerprint_hex(std::uint64_t fp);

// Builds the stream, then alternates train_experience / evaluate-on-E.
// Joint collapses to a single experience over the union of all sources.
RunResult run_scenario(const std::vector<Dataset>& sources, const Dataset& test,
                       const RunConfig& cfg);

// Run-level identification attached to every CSV row.
struct RunMeta {
  std::string run_id;
  std::string strategy;
  double lambda = 0.0;
  std::string size_mode;   // "fixed:<s>" | "zipf-small" | "zipf-large" | "joint"
  std::string order_perm;  // source order digits, "-" for joint
  std::uint64_t seed = 0;  // effective seed of this run
};

struct TaggedRun {
  RunMeta meta;
  RunResult result;
};

struct GridConfig {
  RunConfig base;  // strategy.kind must be lwf
  std::vector<int> sizes;
  std::vector<double> lambdas;
  std::vector<std::vector<int>> orders;
  int reps = 5;
  int workers = 1;
};

// Cells share streams: the run seed hashes (base seed, size, order, rep)
// but not lambda, so every lambda candidate trains on identical chunks and
// the per-cell comparison is paired. Joint references hash (base seed, rep).
struct GridResult {
  std::vector<int> sizes;
  std::vector<double> lambdas;
  // metric name -> sizes x lambdas matrix of mean AUC-over-time
  std::vector<std::pair<std::string, std::vector<std::vector<double>>>> auc_matrices;
  std::vector<std::vector<double>> dev_vs_joint;  // % of the joint AUC
  std::vector<std::vector<double>> brot_matrix;   // lambdas ranked per experience
  std::vector<std::vector<int>> cell_runs;
  std::vector<TaggedRun> runs;
  std::vector<std::pair<std::string, std::string>> failures;  // (run_id, error)
};

GridResult grid_sweep(const std::vector<Dataset>& sources, const Dataset& test,
                      const GridConfig& cfg);

// Shortest round-trip decimal form (to_chars); parse with from_chars.
std::string format_double(double v);

void write_runs_csv(const std::string& path, const std::vector<TaggedRun>& runs);

struct RunRow {
  RunMeta meta;
  MetricRecord record;
};

std::vector<RunRow> read_runs_csv(const std::string& path);

void write_grid_csvs(const std::string& out_dir, const GridResult& grid);

void write_run_manifest(const std::string& path, const RunConfig& base,
                        const std::vector<TaggedRun>& runs, double wall_seconds);
void write_grid_manifest(const std::string& path, const GridConfig& cfg,
                         const GridResult& grid, double wall_seconds);

// Re-aggregates a runs.csv: per-algorithm summary (mean AUC, deviation vs
// matching joint runs) and a BRoT table across (strategy, lambda) pairs.
void write_report(const std::string& runs_csv, const std::string& out_dir,
                  MetricProfile profile);

}  // namespace cil
