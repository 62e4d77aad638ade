// cil - continual incremental learning experiment engine.
//
// Subcommands:
//   synth   generate synthetic multi-source feature datasets
//   run     train one strategy over an experience stream and emit metrics
//   grid    lambda x chunk-size sweep with parallel workers
//   report  aggregate a runs.csv into summary and BRoT tables

#include <chrono>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cil/data.hpp"
#include "cil/errors.hpp"
#include "cil/rng.hpp"
#include "cil/runner.hpp"

namespace fs = std::filesystem;

namespace {

struct DataArgs {
  std::string data_dir;
  std::vector<std::string> source_files;
  std::string test_file;
};

void add_data_options(CLI::App* cmd, DataArgs& args) {
  cmd->add_option("--data", args.data_dir,
                  "Directory holding source_<k>.clf and test.clf");
  cmd->add_option("--source", args.source_files, "Explicit source dataset file(s)");
  cmd->add_option("--test", args.test_file, "Explicit test dataset file");
}

std::pair<std::vector<cil::Dataset>, cil::Dataset> load_inputs(const DataArgs& args) {
  std::vector<cil::Dataset> sources;
  cil::Dataset test;
  if (!args.data_dir.empty()) {
    for (int k = 0;; ++k) {
      const fs::path p = fs::path(args.data_dir) / ("source_" + std::to_string(k) + ".clf");
      if (!fs::exists(p)) break;
      sources.push_back(cil::load_dataset(p.string()));
    }
    const fs::path t = fs::path(args.data_dir) / "test.clf";
    if (sources.empty() || !fs::exists(t))
      throw cil::ConfigError("--data dir must hold source_0.clf.. and test.clf");
    test = cil::load_dataset(t.string());
  } else {
    if (args.source_files.empty() || args.test_file.empty())
      throw cil::ConfigError("pass --data <dir> or --source ... --test <file>");
    for (const std::string& f : args.source_files) {
      sources.push_back(f.ends_with(".csv") ? cil::load_dataset_csv(f)
                                            : cil::load_dataset(f));
    }
    test = args.test_file.ends_with(".csv") ? cil::load_dataset_csv(args.test_file)
                                            : cil::load_dataset(args.test_file);
  }
  return {std::move(sources), std::move(test)};
}

cil::SizeSchedule parse_schedule(const std::string& text, double zipf_a) {
  cil::SizeSchedule schedule;
  schedule.zipf_exponent = zipf_a;
  if (text == "zipf-small") {
    schedule.mode = cil::SizeMode::zipf_small;
  } else if (text == "zipf-large") {
    schedule.mode = cil::SizeMode::zipf_large;
  } else if (text.starts_with("fixed:")) {
    schedule.mode = cil::SizeMode::fixed;
    schedule.fixed_size = std::stoi(text.substr(6));
  } else {
    throw cil::ConfigError("--schedule must be fixed:<s>, zipf-small or zipf-large");
  }
  return schedule;
}

std::vector<std::vector<int>> parse_orders(const std::string& text, std::size_t n_sources) {
  if (text == "all") return cil::enumerate_orders(n_sources);
  std::vector<int> perm;
  for (char c : text) {
    if (c == '.' || c == ',') continue;
    if (c < '0' || c > '9') throw cil::ConfigError("--orders must be 'all' or digits");
    perm.push_back(c - '0');
  }
  return {perm};
}

struct StrategyArgs {
  std::string strategy = "naive";
  double lambda = 1.0;
  double temperature = 2.0;
  double lambda_ewc = 100.0;
  double si_c = 0.1;
  double si_xi = 0.1;
  double shrinkage = 1e-4;
  int epochs = 10;
  int batch = 32;
};

void add_strategy_options(CLI::App* cmd, StrategyArgs& args) {
  cmd->add_option("--strategy", args.strategy, "naive|joint|lwf|ewc|si|slda");
  cmd->add_option("--lambda", args.lambda, "LwF distillation weight");
  cmd->add_option("--temperature", args.temperature, "LwF distillation temperature");
  cmd->add_option("--lambda-ewc", args.lambda_ewc, "EWC penalty weight");
  cmd->add_option("--si-c", args.si_c, "SI penalty weight");
  cmd->add_option("--si-xi", args.si_xi, "SI damping");
  cmd->add_option("--shrinkage", args.shrinkage, "SLDA covariance shrinkage");
  cmd->add_option("--epochs", args.epochs, "Epochs per experience");
  cmd->add_option("--batch", args.batch, "Mini-batch size");
}

cil::StrategyConfig to_strategy_config(const StrategyArgs& args) {
  cil::StrategyConfig cfg;
  cfg.kind = cil::parse_strategy(args.strategy);
  cfg.lambda_lwf = args.lambda;
  cfg.distill_temperature = args.temperature;
  cfg.lambda_ewc = args.lambda_ewc;
  cfg.si_c = args.si_c;
  cfg.si_xi = args.si_xi;
  cfg.slda_shrinkage = args.shrinkage;
  cfg.epochs_per_experience = args.epochs;
  cfg.batch_size = args.batch;
  return cfg;
}

std::vector<std::size_t> parse_widths(const std::string& text) {
  std::vector<std::size_t> widths;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string::npos) comma = text.size();
    widths.push_back(static_cast<std::size_t>(std::stoul(text.substr(pos, comma - pos))));
    pos = comma + 1;
  }
  if (widths.empty()) throw cil::ConfigError("--hidden needs at least one width");
  return widths;
}

int cmd_synth(const std::string& out_dir, const cil::SynthSourceSpec& spec) {
  fs::create_directories(out_dir);
  const cil::SynthSources data = cil::synth_sources(spec);
  for (std::size_t k = 0; k < data.train.size(); ++k)
    cil::save_dataset(data.train[k],
                      (fs::path(out_dir) / ("source_" + std::to_string(k) + ".clf")).string());
  cil::save_dataset(data.test, (fs::path(out_dir) / "test.clf").string());
  std::cout << "wrote " << data.train.size() << " sources + test set ("
            << data.test.size() << " samples, dim " << data.test.dim << ", "
            << data.test.n_classes << " classes) to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"continual incremental learning experiment engine"};
  app.require_subcommand(1);

  // ---- synth ----
  auto* synth = app.add_subcommand("synth", "Generate synthetic multi-source datasets");
  cil::SynthSourceSpec spec;
  std::string synth_out = "data";
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--sources", spec.n_sources, "Number of training sources");
  synth->add_option("--classes", spec.n_classes, "Label space size");
  synth->add_option("--dim", spec.dim, "Feature dimension");
  synth->add_option("--per-class", spec.samples_per_class, "Samples per class per source");
  synth->add_option("--shift", spec.shift_magnitude, "Per-source class-mean offset norm");
  synth->add_option("--noise", spec.within_class_scale, "Within-class standard deviation");
  synth->add_option("--seed", spec.seed, "Generator seed");

  // ---- run ----
  auto* run = app.add_subcommand("run", "Run one or more scenarios");
  DataArgs run_data;
  StrategyArgs run_strategy;
  std::string run_schedule = "fixed:100";
  double run_zipf_a = 1.0;
  std::string run_orders = "";
  std::string run_hidden = "250,125,64";
  double run_lr = 1e-2, run_momentum = 0.9;
  std::string run_profile = "mad";
  std::uint64_t run_seed = 0;
  int run_reps = 1;
  std::string run_out = "out";
  add_data_options(run, run_data);
  add_strategy_options(run, run_strategy);
  run->add_option("--schedule", run_schedule, "fixed:<s>|zipf-small|zipf-large");
  run->add_option("--zipf-a", run_zipf_a, "Zipf exponent");
  run->add_option("--orders", run_orders, "all | permutation digits (default identity)");
  run->add_option("--hidden", run_hidden, "Hidden layer widths, comma separated");
  run->add_option("--lr", run_lr, "SGD learning rate");
  run->add_option("--momentum", run_momentum, "SGD momentum");
  run->add_option("--profile", run_profile, "mad|cls");
  run->add_option("--seed", run_seed, "Base seed");
  auto* run_reps_opt =
      run->add_option("--reps", run_reps, "Repetitions per order (cls default: 10)");
  run->add_option("--out", run_out, "Output directory");

  // ---- grid ----
  auto* grid = app.add_subcommand("grid", "Lambda x chunk-size sweep");
  DataArgs grid_data;
  StrategyArgs grid_strategy;
  std::vector<int> grid_sizes;
  std::vector<double> grid_lambdas;
  std::string grid_orders = "all";
  std::string grid_hidden = "250,125,64";
  double grid_lr = 1e-2, grid_momentum = 0.9, grid_zipf_a = 1.0;
  std::string grid_profile = "mad";
  std::uint64_t grid_seed = 0;
  int grid_reps = 5;
  int grid_workers = 1;
  std::string grid_out = "grid";
  add_data_options(grid, grid_data);
  add_strategy_options(grid, grid_strategy);
  grid->add_option("--sizes", grid_sizes, "Chunk sizes (default 50..500 step 50)")->delimiter(',');
  grid->add_option("--lambdas", grid_lambdas, "Lambda values (default per profile)")->delimiter(',');
  grid->add_option("--orders", grid_orders, "all | permutation digits");
  grid->add_option("--hidden", grid_hidden, "Hidden layer widths, comma separated");
  grid->add_option("--lr", grid_lr, "SGD learning rate");
  grid->add_option("--momentum", grid_momentum, "SGD momentum");
  grid->add_option("--zipf-a", grid_zipf_a, "Zipf exponent (unused by fixed grid rows)");
  grid->add_option("--profile", grid_profile, "mad|cls");
  grid->add_option("--seed", grid_seed, "Base seed");
  grid->add_option("--reps", grid_reps, "Seeds per cell");
  grid->add_option("--workers", grid_workers, "Worker threads");
  grid->add_option("--out", grid_out, "Output directory");

  // ---- report ----
  auto* report = app.add_subcommand("report", "Aggregate a runs.csv");
  std::string report_runs;
  std::string report_profile = "mad";
  std::string report_out = "report";
  report->add_option("--runs", report_runs, "Path to runs.csv")->required();
  report->add_option("--profile", report_profile, "mad|cls");
  report->add_option("--out", report_out, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(synth_out, spec);

    if (run->parsed()) {
      const auto t0 = std::chrono::steady_clock::now();
      auto [sources, test] = load_inputs(run_data);
      cil::RunConfig base;
      base.strategy = to_strategy_config(run_strategy);
      base.schedule = parse_schedule(run_schedule, run_zipf_a);
      base.hidden_widths = parse_widths(run_hidden);
      base.learning_rate = run_lr;
      base.momentum = run_momentum;
      base.profile = cil::parse_profile(run_profile);
      base.seed = run_seed;
      if (run_reps_opt->count() == 0 && base.profile == cil::MetricProfile::cls)
        run_reps = 10;  // classification protocol averages over 10 shuffles

      std::vector<std::vector<int>> orders;
      if (base.strategy.kind == cil::StrategyKind::joint || run_orders.empty()) {
        orders = {std::vector<int>{}};
      } else {
        orders = parse_orders(run_orders, sources.size());
      }

      std::vector<cil::TaggedRun> runs;
      for (const auto& order : orders)
        for (int rep = 0; rep < run_reps; ++rep) {
          cil::RunConfig cfg = base;
          cfg.order = order;
          const std::uint64_t order_key =
              cil::derive_seed(0, {static_cast<std::uint64_t>(order.size())});
          std::uint64_t oh = order_key;
          for (int v : order) oh = cil::derive_seed(oh, {static_cast<std::uint64_t>(v)});
          cfg.seed = cil::derive_seed(run_seed, {cil::seed_tag::rep, oh,
                                                 static_cast<std::uint64_t>(rep)});
          cil::TaggedRun tr;
          tr.meta.strategy = cil::to_string(cfg.strategy.kind);
          tr.meta.lambda = cfg.strategy.kind == cil::StrategyKind::lwf
                               ? cfg.strategy.lambda_lwf
                               : 0.0;
          tr.meta.size_mode = cfg.strategy.kind == cil::StrategyKind::joint
                                  ? "joint"
                                  : run_schedule;
          std::string ord;
          for (std::size_t i = 0; i < order.size(); ++i) {
            if (i) ord.push_back('.');
            ord += std::to_string(order[i]);
          }
          tr.meta.order_perm = ord.empty() ? "-" : ord;
          tr.meta.seed = cfg.seed;
          tr.meta.run_id = tr.meta.strategy + "_lam" + cil::format_double(tr.meta.lambda) +
                           "_" + tr.meta.size_mode + "_ord" + tr.meta.order_perm + "_r" +
                           std::to_string(rep);
          tr.result = cil::run_scenario(sources, test, cfg);
          runs.push_back(std::move(tr));
        }

      fs::create_directories(run_out);
      cil::write_runs_csv((fs::path(run_out) / "runs.csv").string(), runs);
      const double wall =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      cil::write_run_manifest((fs::path(run_out) / "manifest.json").string(), base, runs,
                              wall);
      std::cout << "wrote " << runs.size() << " runs to " << run_out << "\n";
      return 0;
    }

    if (grid->parsed()) {
      const auto t0 = std::chrono::steady_clock::now();
      auto [sources, test] = load_inputs(grid_data);
      cil::GridConfig cfg;
      cfg.base.strategy = to_strategy_config(grid_strategy);
      cfg.base.strategy.kind = cil::StrategyKind::lwf;
      cfg.base.hidden_widths = parse_widths(grid_hidden);
      cfg.base.learning_rate = grid_lr;
      cfg.base.momentum = grid_momentum;
      cfg.base.schedule.zipf_exponent = grid_zipf_a;
      cfg.base.profile = cil::parse_profile(grid_profile);
      cfg.base.seed = grid_seed;
      cfg.sizes = grid_sizes;
      if (cfg.sizes.empty())
        for (int s = 50; s <= 500; s += 50) cfg.sizes.push_back(s);
      cfg.lambdas = grid_lambdas;
      if (cfg.lambdas.empty()) {
        if (cfg.base.profile == cil::MetricProfile::mad)
          cfg.lambdas = {100, 200, 400, 600, 800, 1000, 1200, 1500};
        else
          cfg.lambdas = {1, 2, 5, 10, 20, 50};
      }
      cfg.orders = parse_orders(grid_orders, sources.size());
      cfg.reps = grid_reps;
      cfg.workers = grid_workers;

      const cil::GridResult result = cil::grid_sweep(sources, test, cfg);
      cil::write_grid_csvs(grid_out, result);
      const double wall =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      cil::write_grid_manifest((fs::path(grid_out) / "manifest.json").string(), cfg,
                               result, wall);
      std::cout << "wrote grid (" << cfg.sizes.size() << " sizes x " << cfg.lambdas.size()
                << " lambdas, " << result.runs.size() << " runs, "
                << result.failures.size() << " failures) to " << grid_out << "\n";
      return result.failures.empty() ? 0 : 1;
    }

    if (report->parsed()) {
      cil::write_report(report_runs, report_out, cil::parse_profile(report_profile));
      std::cout << "wrote report to " << report_out << "\n";
      return 0;
    }
  } catch (const cil::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
