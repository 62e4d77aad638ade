#include "cil/runner.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "cil/errors.hpp"
#include "cil/rng.hpp"

namespace cil {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

MetricProfile parse_profile(const std::string& name) {
  if (name == "mad") return MetricProfile::mad;
  if (name == "cls") return MetricProfile::cls;
  throw ConfigError("unknown metric profile '" + name + "'");
}

std::string to_string(MetricProfile profile) {
  return profile == MetricProfile::mad ? "mad" : "cls";
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string size_mode_string(const SizeSchedule& schedule) {
  switch (schedule.mode) {
    case SizeMode::fixed: return "fixed:" + std::to_string(schedule.fixed_size);
    case SizeMode::zipf_small: return "zipf-small";
    case SizeMode::zipf_large: return "zipf-large";
  }
  throw ConfigError("unknown size mode");
}

std::string order_string(const std::vector<int>& order) {
  std::string s;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i) s.push_back('.');
    s += std::to_string(order[i]);
  }
  return s;
}

std::uint64_t order_hash(const std::vector<int>& order) {
  std::uint64_t h = 0;
  for (int v : order) h = derive_seed(h, {static_cast<std::uint64_t>(v)});
  return h;
}

}  // namespace

std::uint64_t config_fingerprint(const RunConfig& cfg) {
  std::ostringstream s;
  s << "strategy=" << to_string(cfg.strategy.kind)
    << ";lambda=" << format_double(cfg.strategy.lambda_lwf)
    << ";T=" << format_double(cfg.strategy.distill_temperature)
    << ";lambda_ewc=" << format_double(cfg.strategy.lambda_ewc)
    << ";si_c=" << format_double(cfg.strategy.si_c)
    << ";si_xi=" << format_double(cfg.strategy.si_xi)
    << ";shrinkage=" << format_double(cfg.strategy.slda_shrinkage)
    << ";epochs=" << cfg.strategy.epochs_per_experience
    << ";batch=" << cfg.strategy.batch_size << ";schedule=" << size_mode_string(cfg.schedule)
    << ";zipf_a=" << format_double(cfg.schedule.zipf_exponent)
    << ";order=" << order_string(cfg.order) << ";hidden=";
  for (std::size_t w : cfg.hidden_widths) s << w << ",";
  s << ";lr=" << format_double(cfg.learning_rate)
    << ";momentum=" << format_double(cfg.momentum)
    << ";profile=" << to_string(cfg.profile) << ";seed=" << cfg.seed;
  return fnv1a64(s.str());
}

std::string fingerprint_hex(std::uint64_t fp) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[fp & 0xF];
    fp >>= 4;
  }
  return out;
}

namespace {

Matrix features_of(const Dataset& ds) {
  Matrix m(ds.samples.size(), ds.dim);
  for (std::size_t i = 0; i < ds.samples.size(); ++i)
    std::copy(ds.samples[i].features.begin(), ds.samples[i].features.end(), m.row(i));
  return m;
}

std::vector<int> labels_of(const Dataset& ds) {
  std::vector<int> labels(ds.samples.size());
  for (std::size_t i = 0; i < ds.samples.size(); ++i) labels[i] = ds.samples[i].label;
  return labels;
}

MetricRecord evaluate_on_test(const StrategyState& state, const MlpModel& model,
                              const Matrix& test_features,
                              const std::vector<int>& test_labels,
                              std::size_t n_classes, int exp_index) {
  const Matrix scores = predict_scores(state, model, test_features);
  const Matrix probs = softmax_rows(scores);

  MetricRecord rec;
  rec.experience_index = exp_index;
  std::vector<int> preds(probs.rows());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    const double* row = probs.row(i);
    std::size_t best = 0;
    for (std::size_t c = 1; c < probs.cols(); ++c)
      if (row[c] > row[best]) best = c;
    preds[i] = static_cast<int>(best);
  }
  rec.top1 = top1_accuracy(preds, test_labels);

  if (n_classes == 2) {
    ScoreSet ss;  // class 1 = morphed; score = P(morphed)
    for (std::size_t i = 0; i < probs.rows(); ++i)
      (test_labels[i] == 1 ? ss.morph : ss.bona).push_back(probs(i, 1));
    rec.eer = eer(ss);
    rec.bpcer10 = bpcer_at_apcer(ss, 0.10);
    rec.bpcer1 = bpcer_at_apcer(ss, 0.01);
    rec.bpcer01 = bpcer_at_apcer(ss, 0.001);
    rec.mad_point = rec.eer + rec.bpcer1;
  } else {
    rec.eer = rec.bpcer10 = rec.bpcer1 = rec.bpcer01 = rec.mad_point = kNaN;
  }
  return rec;
}

double series_auc(const std::vector<MetricRecord>& records, double MetricRecord::* field,
                  bool n_minus_one = false) {
  std::vector<double> values;
  values.reserve(records.size());
  for (const auto& r : records) {
    if (std::isnan(r.*field)) return kNaN;
    values.push_back(r.*field);
  }
  return auc_over_time(values, n_minus_one);
}

}  // namespace

RunResult run_scenario(const std::vector<Dataset>& sources, const Dataset& test,
                       const RunConfig& cfg) {
  validate(cfg.strategy);
  if (sources.empty()) throw StreamError("run_scenario: no sources");
  if (test.samples.empty()) throw StreamError("run_scenario: empty test set");
  if (cfg.profile == MetricProfile::mad && test.n_classes != 2)
    throw ConfigError("run_scenario: mad profile needs a binary label space");

  const auto t0 = std::chrono::steady_clock::now();

  std::vector<std::size_t> widths;
  widths.push_back(sources.front().dim);
  widths.insert(widths.end(), cfg.hidden_widths.begin(), cfg.hidden_widths.end());
  widths.push_back(sources.front().n_classes);

  RunResult out;
  out.fingerprint = config_fingerprint(cfg);

  MlpModel model = init_model(widths, derive_seed(cfg.seed, {seed_tag::model}));
  OptimizerState opt = make_optimizer(model, cfg.learning_rate, cfg.momentum);
  StrategyState state = make_strategy_state(cfg.strategy);

  const Matrix test_features = features_of(test);
  const std::vector<int> test_labels = labels_of(test);

  if (cfg.strategy.kind == StrategyKind::joint) {
    Dataset all;
    all.name = "joint-union";
    all.dim = sources.front().dim;
    all.n_classes = sources.front().n_classes;
    for (const Dataset& src : sources) {
      if (src.dim != all.dim || src.n_classes != all.n_classes)
        throw ShapeError("run_scenario: sources disagree on dim/classes");
      all.samples.insert(all.samples.end(), src.samples.begin(), src.samples.end());
    }
    joint_train(model, opt, all, cfg.strategy, cfg.seed);
    out.records.push_back(evaluate_on_test(state, model, test_features, test_labels,
                                           test.n_classes, 1));
    out.dropped_per_source.assign(sources.size(), 0);
  } else {
    ExperienceStream stream = build_stream(sources, cfg.schedule, test, cfg.seed, cfg.order);
    out.dropped_per_source = stream.dropped_per_source;
    for (const Experience& exp : stream.experiences) {
      train_experience(state, model, opt, exp, cfg.strategy, cfg.seed);
      try {
        out.records.push_back(evaluate_on_test(state, model, test_features, test_labels,
                                               test.n_classes, exp.index));
      } catch (const Error& e) {
        throw StateError("run_scenario: evaluation failed after experience " +
                         std::to_string(exp.index) + ": " + e.what());
      }
    }
  }

  out.auc_eer = series_auc(out.records, &MetricRecord::eer);
  out.auc_bpcer10 = series_auc(out.records, &MetricRecord::bpcer10);
  out.auc_bpcer1 = series_auc(out.records, &MetricRecord::bpcer1);
  out.auc_bpcer01 = series_auc(out.records, &MetricRecord::bpcer01);
  out.auc_top1 = series_auc(out.records, &MetricRecord::top1);
  out.auc_mad_point = series_auc(out.records, &MetricRecord::mad_point);
  const auto profile_field = cfg.profile == MetricProfile::mad ? &MetricRecord::mad_point
                                                               : &MetricRecord::top1;
  out.auc_profile = series_auc(out.records, profile_field);
  out.auc_profile_nm1 = series_auc(out.records, profile_field, true);

  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// ---------------------------------------------------------------------------
// grid sweep
// ---------------------------------------------------------------------------

namespace {

struct GridTask {
  bool is_joint = false;
  int rep = 0;
  std::size_t size_idx = 0;
  std::size_t order_idx = 0;
  std::size_t lambda_idx = 0;
};

std::string grid_run_id(const GridConfig& cfg, const GridTask& t) {
  if (t.is_joint) return "joint_r" + std::to_string(t.rep);
  return "lwf_lam" + format_double(cfg.lambdas[t.lambda_idx]) + "_fixed:" +
         std::to_string(cfg.sizes[t.size_idx]) + "_ord" +
         order_string(cfg.orders[t.order_idx]) + "_r" + std::to_string(t.rep);
}

}  // namespace

GridResult grid_sweep(const std::vector<Dataset>& sources, const Dataset& test,
                      const GridConfig& cfg) {
  if (cfg.sizes.empty() || cfg.lambdas.empty()) throw ConfigError("grid_sweep: empty axes");
  if (cfg.orders.empty()) throw ConfigError("grid_sweep: no orders");
  if (cfg.reps < 1) throw ConfigError("grid_sweep: reps must be positive");
  if (cfg.base.strategy.kind != StrategyKind::lwf)
    throw ConfigError("grid_sweep: the sweep varies lambda, strategy must be lwf");

  std::vector<GridTask> tasks;
  for (int rep = 0; rep < cfg.reps; ++rep)
    tasks.push_back(GridTask{true, rep, 0, 0, 0});
  for (std::size_t si = 0; si < cfg.sizes.size(); ++si)
    for (std::size_t oi = 0; oi < cfg.orders.size(); ++oi)
      for (int rep = 0; rep < cfg.reps; ++rep)
        for (std::size_t li = 0; li < cfg.lambdas.size(); ++li)
          tasks.push_back(GridTask{false, rep, si, oi, li});

  auto config_for = [&](const GridTask& t) {
    RunConfig rc = cfg.base;
    if (t.is_joint) {
      rc.strategy.kind = StrategyKind::joint;
      rc.order.clear();
      rc.seed = derive_seed(cfg.base.seed, {seed_tag::joint,
                                            static_cast<std::uint64_t>(t.rep)});
    } else {
      rc.strategy.kind = StrategyKind::lwf;
      rc.strategy.lambda_lwf = cfg.lambdas[t.lambda_idx];
      rc.schedule.mode = SizeMode::fixed;
      rc.schedule.fixed_size = cfg.sizes[t.size_idx];
      rc.order = cfg.orders[t.order_idx];
      // lambda deliberately left out: every candidate shares the stream
      rc.seed = derive_seed(cfg.base.seed,
                            {seed_tag::run, static_cast<std::uint64_t>(cfg.sizes[t.size_idx]),
                             order_hash(rc.order), static_cast<std::uint64_t>(t.rep)});
    }
    return rc;
  };

  std::vector<RunResult> results(tasks.size());
  std::vector<std::string> task_errors(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        results[i] = run_scenario(sources, test, config_for(tasks[i]));
      } catch (const std::exception& e) {
        task_errors[i] = e.what();  // record and keep going; the grid completes
      }
    }
  };
  const std::size_t n_workers =
      std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(cfg.workers),
                                                     tasks.size()));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  GridResult grid;
  grid.sizes = cfg.sizes;
  grid.lambdas = cfg.lambdas;
  const std::size_t ns = cfg.sizes.size();
  const std::size_t nl = cfg.lambdas.size();
  auto zeros = [&] { return std::vector<std::vector<double>>(ns, std::vector<double>(nl, 0.0)); };

  std::vector<double> joint_auc(static_cast<std::size_t>(cfg.reps), kNaN);
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const RunConfig rc = config_for(tasks[i]);
    if (!task_errors[i].empty()) {
      grid.failures.emplace_back(grid_run_id(cfg, tasks[i]), task_errors[i]);
      continue;
    }
    TaggedRun tr;
    tr.meta.run_id = grid_run_id(cfg, tasks[i]);
    tr.meta.strategy = to_string(rc.strategy.kind);
    tr.meta.lambda = tasks[i].is_joint ? 0.0 : cfg.lambdas[tasks[i].lambda_idx];
    tr.meta.size_mode = tasks[i].is_joint ? "joint" : size_mode_string(rc.schedule);
    tr.meta.order_perm = tasks[i].is_joint ? "-" : order_string(rc.order);
    tr.meta.seed = rc.seed;
    tr.result = results[i];
    if (tasks[i].is_joint)
      joint_auc[static_cast<std::size_t>(tasks[i].rep)] = results[i].auc_profile;
    grid.runs.push_back(std::move(tr));
  }

  const bool lower_better = cfg.base.profile == MetricProfile::mad;
  const auto rank_field = cfg.base.profile == MetricProfile::mad ? &MetricRecord::bpcer01
                                                                 : &MetricRecord::top1;
  struct MetricField {
    const char* name;
    double RunResult::* field;
  };
  const MetricField metric_fields[] = {
      {"eer", &RunResult::auc_eer},          {"bpcer10", &RunResult::auc_bpcer10},
      {"bpcer1", &RunResult::auc_bpcer1},    {"bpcer01", &RunResult::auc_bpcer01},
      {"accuracy", &RunResult::auc_top1},    {"mad_point", &RunResult::auc_mad_point}};

  std::vector<std::vector<std::vector<double>>> auc_acc(std::size(metric_fields), zeros());
  auto dev = zeros();
  auto brot_acc = zeros();
  std::vector<std::vector<int>> auc_counts(ns, std::vector<int>(nl, 0));
  auto dev_counts = auc_counts;
  auto brot_counts = auc_counts;

  // Accumulate per cell; the task layout keeps the lambda axis innermost so
  // each (size, order, rep) group forms one BRoT table across lambdas.
  std::size_t base = static_cast<std::size_t>(cfg.reps);
  for (std::size_t si = 0; si < ns; ++si)
    for (std::size_t oi = 0; oi < cfg.orders.size(); ++oi)
      for (int rep = 0; rep < cfg.reps; ++rep) {
        RankingTable table;
        bool group_complete = true;
        for (std::size_t li = 0; li < nl; ++li) {
          if (!task_errors[base + li].empty()) {
            group_complete = false;
            continue;
          }
          const RunResult& r = results[base + li];
          for (std::size_t m = 0; m < std::size(metric_fields); ++m)
            auc_acc[m][si][li] += r.*(metric_fields[m].field);
          auc_counts[si][li] += 1;
          const double j = joint_auc[static_cast<std::size_t>(rep)];
          if (!std::isnan(j) && j != 0.0) {
            dev[si][li] += 100.0 * (r.auc_profile - j) / j;
            dev_counts[si][li] += 1;
          }
          std::vector<double> series;
          for (const auto& rec : r.records) series.push_back(rec.*rank_field);
          table.values.push_back(std::move(series));
        }
        if (group_complete) {
          const std::vector<double> cell_brot = brot(table, lower_better);
          for (std::size_t li = 0; li < nl; ++li) {
            brot_acc[si][li] += cell_brot[li];
            brot_counts[si][li] += 1;
          }
        }
        base += nl;
      }

  auto finish = [](std::vector<std::vector<double>>& m,
                   const std::vector<std::vector<int>>& counts) {
    for (std::size_t si = 0; si < m.size(); ++si)
      for (std::size_t li = 0; li < m[si].size(); ++li)
        m[si][li] = counts[si][li] ? m[si][li] / counts[si][li] : kNaN;
  };
  for (std::size_t m = 0; m < std::size(metric_fields); ++m) {
    finish(auc_acc[m], auc_counts);
    grid.auc_matrices.emplace_back(metric_fields[m].name, std::move(auc_acc[m]));
  }
  finish(dev, dev_counts);
  finish(brot_acc, brot_counts);
  grid.dev_vs_joint = std::move(dev);
  grid.brot_matrix = std::move(brot_acc);
  grid.cell_runs = std::move(auc_counts);
  return grid;
}

// ---------------------------------------------------------------------------
// emission
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kRunsHeader =
    "run_id,strategy,lambda,size_mode,order_perm,seed,experience_idx,eer,bpcer10,"
    "bpcer1,bpcer01,accuracy,mad_point";

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

}  // namespace

void write_runs_csv(const std::string& path, const std::vector<TaggedRun>& runs) {
  std::ofstream out = open_out(path);
  out << kRunsHeader << "\n";
  for (const TaggedRun& tr : runs)
    for (const MetricRecord& rec : tr.result.records)
      out << tr.meta.run_id << ',' << tr.meta.strategy << ','
          << format_double(tr.meta.lambda) << ',' << tr.meta.size_mode << ','
          << tr.meta.order_perm << ',' << tr.meta.seed << ',' << rec.experience_index
          << ',' << format_double(rec.eer) << ',' << format_double(rec.bpcer10) << ','
          << format_double(rec.bpcer1) << ',' << format_double(rec.bpcer01) << ','
          << format_double(rec.top1) << ',' << format_double(rec.mad_point) << "\n";
  if (!out) throw IoError("write failed for '" + path + "'");
}

namespace {

double parse_double_field(const std::string& s, const std::string& path, std::size_t line) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw FormatError(path + ": line " + std::to_string(line) + ": bad number '" + s + "'");
  return v;
}

}  // namespace

std::vector<RunRow> read_runs_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != kRunsHeader)
    throw FormatError(path + ": unexpected header");
  std::vector<RunRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) cols.push_back(col);
    if (cols.size() != 13)
      throw FormatError(path + ": line " + std::to_string(line_no) + ": expected 13 columns");
    RunRow row;
    row.meta.run_id = cols[0];
    row.meta.strategy = cols[1];
    row.meta.lambda = parse_double_field(cols[2], path, line_no);
    row.meta.size_mode = cols[3];
    row.meta.order_perm = cols[4];
    row.meta.seed = static_cast<std::uint64_t>(std::stoull(cols[5]));
    row.record.experience_index = std::stoi(cols[6]);
    row.record.eer = parse_double_field(cols[7], path, line_no);
    row.record.bpcer10 = parse_double_field(cols[8], path, line_no);
    row.record.bpcer1 = parse_double_field(cols[9], path, line_no);
    row.record.bpcer01 = parse_double_field(cols[10], path, line_no);
    row.record.top1 = parse_double_field(cols[11], path, line_no);
    row.record.mad_point = parse_double_field(cols[12], path, line_no);
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

void write_matrix_csv(const std::string& path, const std::vector<int>& sizes,
                      const std::vector<double>& lambdas,
                      const std::vector<std::vector<double>>& matrix) {
  std::ofstream out = open_out(path);
  out << "size";
  for (double l : lambdas) out << ",lambda_" << format_double(l);
  out << "\n";
  for (std::size_t si = 0; si < sizes.size(); ++si) {
    out << sizes[si];
    for (std::size_t li = 0; li < lambdas.size(); ++li)
      out << ',' << format_double(matrix[si][li]);
    out << "\n";
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace

void write_grid_csvs(const std::string& out_dir, const GridResult& grid) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  for (const auto& [name, matrix] : grid.auc_matrices)
    write_matrix_csv((fs::path(out_dir) / ("grid_auc_" + name + ".csv")).string(),
                     grid.sizes, grid.lambdas, matrix);
  write_matrix_csv((fs::path(out_dir) / "grid_dev_vs_joint.csv").string(), grid.sizes,
                   grid.lambdas, grid.dev_vs_joint);
  write_matrix_csv((fs::path(out_dir) / "grid_brot.csv").string(), grid.sizes,
                   grid.lambdas, grid.brot_matrix);
  write_runs_csv((fs::path(out_dir) / "runs.csv").string(), grid.runs);
}

namespace {

nlohmann::json run_entries(const std::vector<TaggedRun>& runs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const TaggedRun& tr : runs) {
    nlohmann::json e;
    e["run_id"] = tr.meta.run_id;
    e["strategy"] = tr.meta.strategy;
    e["seed"] = tr.meta.seed;
    e["fingerprint"] = fingerprint_hex(tr.result.fingerprint);
    e["experiences"] = tr.result.records.size();
    e["dropped_per_source"] = tr.result.dropped_per_source;
    e["auc_profile"] = tr.result.auc_profile;
    e["auc_profile_nminus1"] = tr.result.auc_profile_nm1;
    arr.push_back(std::move(e));
  }
  return arr;
}

}  // namespace

void write_run_manifest(const std::string& path, const RunConfig& base,
                        const std::vector<TaggedRun>& runs, double wall_seconds) {
  nlohmann::json j;
  j["tool"] = "cil";
  j["version"] = "0.1.0";
  j["base_fingerprint"] = fingerprint_hex(config_fingerprint(base));
  j["base_seed"] = base.seed;
  j["profile"] = to_string(base.profile);
  j["wall_seconds"] = wall_seconds;
  j["runs"] = run_entries(runs);
  std::ofstream out = open_out(path);
  out << j.dump(2) << "\n";
}

void write_grid_manifest(const std::string& path, const GridConfig& cfg,
                         const GridResult& grid, double wall_seconds) {
  nlohmann::json j;
  j["tool"] = "cil";
  j["version"] = "0.1.0";
  j["base_fingerprint"] = fingerprint_hex(config_fingerprint(cfg.base));
  j["base_seed"] = cfg.base.seed;
  j["profile"] = to_string(cfg.base.profile);
  j["sizes"] = cfg.sizes;
  j["lambdas"] = cfg.lambdas;
  j["orders"] = cfg.orders.size();
  j["reps"] = cfg.reps;
  j["wall_seconds"] = wall_seconds;
  j["runs"] = run_entries(grid.runs);
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& [run_id, error] : grid.failures)
    failures.push_back({{"run_id", run_id}, {"error", error}});
  j["failures"] = std::move(failures);
  std::ofstream out = open_out(path);
  out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// report: re-aggregate runs.csv
// ---------------------------------------------------------------------------

namespace {

// rep index comes from the trailing "_r<k>" of the run id; joint runs and
// incremental runs of the same rep are matched through it.
int rep_of_run_id(const std::string& run_id) {
  const std::size_t pos = run_id.rfind("_r");
  if (pos == std::string::npos) return -1;
  int rep = -1;
  const char* begin = run_id.data() + pos + 2;
  const char* end = run_id.data() + run_id.size();
  auto [p, ec] = std::from_chars(begin, end, rep);
  if (ec != std::errc() || p != end) return -1;
  return rep;
}

}  // namespace

void write_report(const std::string& runs_csv, const std::string& out_dir,
                  MetricProfile profile) {
  namespace fs = std::filesystem;
  const std::vector<RunRow> rows = read_runs_csv(runs_csv);
  if (rows.empty()) throw FormatError(runs_csv + ": no rows");
  fs::create_directories(out_dir);

  struct RunAgg {
    RunMeta meta;
    std::vector<MetricRecord> records;
  };
  std::map<std::string, RunAgg> by_run;
  for (const RunRow& row : rows) {
    RunAgg& agg = by_run[row.meta.run_id];
    agg.meta = row.meta;
    agg.records.push_back(row.record);
  }
  for (auto& [id, agg] : by_run)
    std::sort(agg.records.begin(), agg.records.end(),
              [](const MetricRecord& a, const MetricRecord& b) {
                return a.experience_index < b.experience_index;
              });

  const auto profile_field =
      profile == MetricProfile::mad ? &MetricRecord::mad_point : &MetricRecord::top1;
  const auto rank_field =
      profile == MetricProfile::mad ? &MetricRecord::bpcer01 : &MetricRecord::top1;
  const bool lower_better = profile == MetricProfile::mad;

  std::map<int, double> joint_auc_by_rep;
  for (const auto& [id, agg] : by_run)
    if (agg.meta.strategy == "joint")
      joint_auc_by_rep[rep_of_run_id(id)] = series_auc(agg.records, profile_field);

  // algorithm = (strategy, lambda); groups share (size_mode, order, rep)
  using AlgoKey = std::pair<std::string, double>;
  std::map<AlgoKey, std::vector<double>> algo_aucs;
  std::map<AlgoKey, std::vector<double>> algo_devs;
  struct Group {
    std::map<AlgoKey, std::vector<double>> series;
  };
  std::map<std::string, Group> groups;

  for (const auto& [id, agg] : by_run) {
    if (agg.meta.strategy == "joint") continue;
    const AlgoKey key{agg.meta.strategy, agg.meta.lambda};
    const double auc = series_auc(agg.records, profile_field);
    algo_aucs[key].push_back(auc);
    const int rep = rep_of_run_id(id);
    auto it = joint_auc_by_rep.find(rep);
    if (it != joint_auc_by_rep.end() && it->second != 0.0)
      algo_devs[key].push_back(100.0 * (auc - it->second) / it->second);
    std::vector<double> series;
    for (const auto& rec : agg.records) series.push_back(rec.*rank_field);
    const std::string group_key = agg.meta.size_mode + "|" + agg.meta.order_perm + "|r" +
                                  std::to_string(rep);
    groups[group_key].series[key] = std::move(series);
  }

  // BRoT over groups where every algorithm appears with equal-length series
  std::map<AlgoKey, std::vector<double>> algo_brots;
  const std::size_t n_algos = algo_aucs.size();
  for (const auto& [gkey, group] : groups) {
    if (group.series.size() != n_algos) continue;
    const std::size_t len = group.series.begin()->second.size();
    bool ok = true;
    for (const auto& [akey, series] : group.series)
      if (series.size() != len) ok = false;
    if (!ok || len == 0) continue;
    RankingTable table;
    std::vector<AlgoKey> keys;
    for (const auto& [akey, series] : group.series) {
      keys.push_back(akey);
      table.values.push_back(series);
    }
    const std::vector<double> scores = brot(table, lower_better);
    for (std::size_t i = 0; i < keys.size(); ++i) algo_brots[keys[i]].push_back(scores[i]);
  }

  auto mean = [](const std::vector<double>& v) {
    if (v.empty()) return kNaN;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };

  std::ofstream summary = open_out((fs::path(out_dir) / "report_summary.csv").string());
  summary << "strategy,lambda,runs,mean_auc,mean_dev_vs_joint_pct,brot\n";
  for (const auto& [key, aucs] : algo_aucs) {
    summary << key.first << ',' << format_double(key.second) << ',' << aucs.size() << ','
            << format_double(mean(aucs)) << ',' << format_double(mean(algo_devs[key]))
            << ',' << format_double(mean(algo_brots[key])) << "\n";
  }

  std::ofstream brot_csv = open_out((fs::path(out_dir) / "brot_table.csv").string());
  brot_csv << "strategy,lambda,brot\n";
  for (const auto& [key, scores] : algo_brots)
    brot_csv << key.first << ',' << format_double(key.second) << ','
             << format_double(mean(scores)) << "\n";
}

}  // namespace cil
