#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hyperctl/harness.hpp"
#include "hyperctl/protocol.hpp"

namespace {

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  nlohmann::json doc;
  in >> doc;
  return doc;
}

int run_simulate(const std::string& plan_path, const std::string& out_dir) {
  const auto plan = hyperctl::ExperimentPlan::from_json(load_json(plan_path));
  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  const auto steps_path = dir / "steps.csv";
  const auto summary_path = dir / "summary.csv";
  hyperctl::simulate_to_files(plan, steps_path, summary_path);
  std::cout << "wrote " << steps_path.string() << "\n";
  std::cout << "wrote " << summary_path.string() << "\n";
  return 0;
}

int run_tune(const std::string& run_path, const hyperctl::TuneOptions& opts) {
  const auto run = hyperctl::RunConfig::from_json(load_json(run_path));
  hyperctl::IoStreamTransport transport(std::cin, std::cout);
  return hyperctl::tune_loop(run, transport, opts);
}

int run_report(const std::vector<std::string>& csv_paths) {
  std::vector<hyperctl::StepsCsvRow> rows;
  for (const auto& path : csv_paths) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    auto file_rows = hyperctl::read_steps_csv(in, path);
    rows.insert(rows.end(), file_rows.begin(), file_rows.end());
  }
  std::cout << hyperctl::render_final_regret_table(hyperctl::final_regret_table(rows));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hyperctl: online hyperparameter control and its synthetic benchmark harness"};
  app.require_subcommand(1);

  std::string plan_path;
  std::string out_dir = ".";
  auto* simulate = app.add_subcommand("simulate", "run an experiment plan and write regret CSVs");
  simulate->add_option("plan", plan_path, "plan JSON document")->required();
  simulate->add_option("--out-dir", out_dir, "directory for steps.csv and summary.csv");

  std::string run_path;
  std::string resume_path;
  std::string snapshot_path;
  std::uint64_t seed_override = 0;
  long snapshot_every = 0;
  auto* tune = app.add_subcommand("tune", "drive an external trainer over stdin/stdout");
  tune->add_option("run", run_path, "run configuration JSON document")->required();
  auto* resume_opt = tune->add_option("--resume", resume_path, "controller snapshot to resume from");
  auto* seed_opt = tune->add_option("--seed", seed_override, "override the configured seed");
  auto* every_opt =
      tune->add_option("--snapshot-every", snapshot_every, "iterations between snapshots");
  auto* snap_opt = tune->add_option("--snapshot", snapshot_path, "where to write snapshots");

  std::vector<std::string> csv_paths;
  auto* report = app.add_subcommand("report", "summarize per-step regret CSVs");
  report->add_option("csv", csv_paths, "steps.csv files")->required()->expected(-1);

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return run_simulate(plan_path, out_dir);
    if (tune->parsed()) {
      hyperctl::TuneOptions opts;
      if (*resume_opt) opts.resume_path = resume_path;
      if (*seed_opt) opts.seed_override = seed_override;
      if (*every_opt) opts.snapshot_every_override = snapshot_every;
      if (*snap_opt) opts.snapshot_path_override = snapshot_path;
      opts.log = [](const std::string& msg) { std::cerr << "hyperctl: " << msg << "\n"; };
      return run_tune(run_path, opts);
    }
    if (report->parsed()) return run_report(csv_paths);
  } catch (const std::exception& e) {
    std::cerr << "hyperctl: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
