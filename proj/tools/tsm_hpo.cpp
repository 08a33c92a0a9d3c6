// tsm-hpo: hyperparameter search over gridded spaces with a
// hierarchical-evaluation genetic algorithm and tree-structured mutation.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "tsmhpo/compare.hpp"
#include "tsmhpo/config.hpp"
#include "tsmhpo/eval.hpp"
#include "tsmhpo/evolve.hpp"
#include "tsmhpo/record.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;    // usage / config errors
constexpr int kExitRuntime = 2;  // runtime / evaluator errors

int worker_count_from_env() {
  const char* raw = std::getenv("TSM_HPO_WORKERS");
  if (raw == nullptr || *raw == '\0') return tsmhpo::default_worker_count();
  char* end = nullptr;
  const long parsed = std::strtol(raw, &end, 10);
  if (end == nullptr || *end != '\0' || parsed < 1)
    throw tsmhpo::ValidationError(
        "TSM_HPO_WORKERS must be a positive integer, got '" +
        std::string(raw) + "'");
  return static_cast<int>(parsed);
}

std::string file_stem(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

int cmd_run(const std::string& config_path, const std::string& seed_raw,
            const std::string& out_dir, const std::string& mutation) {
  tsmhpo::ExperimentConfig config = tsmhpo::load_config(config_path);
  if (!seed_raw.empty()) config.ga.seed = std::stoull(seed_raw);
  if (!out_dir.empty()) config.out_dir = out_dir;
  if (!mutation.empty())
    config.ga.mutation_mode = tsmhpo::mutation_mode_from_string(mutation);
  config.ga.validate();

  const int workers = worker_count_from_env();
  auto evaluator = tsmhpo::make_evaluator(config);
  tsmhpo::CachingEvaluator cached(*evaluator);

  tsmhpo::RunRecord record =
      tsmhpo::run_hesga(config.space, config.ga, cached, workers);
  record.config = nlohmann::json(config);

  std::filesystem::create_directories(config.out_dir);
  const std::string base =
      config.out_dir + "/run-" + std::to_string(config.ga.seed);
  tsmhpo::save_run_record(record, base + ".json");
  tsmhpo::save_history_csv(
      record, config.out_dir + "/history-" + std::to_string(config.ga.seed) +
                  ".csv");

  std::cout << "best fitness " << *record.best.full_fitness << " at";
  for (const auto& [name, value] :
       tsmhpo::detail::request_values(config.space, record.best.genotype))
    std::cout << ' ' << name << '=' << value;
  std::cout << "\nwrote " << base << ".json\n";
  return kExitOk;
}

int cmd_compare(const std::string& path_a, const std::string& path_b,
                double alpha, int repeats, const std::string& out_dir,
                const std::string& variant_name) {
  const tsmhpo::RunRecord record_a = tsmhpo::load_run_record(path_a);
  const tsmhpo::RunRecord record_b = tsmhpo::load_run_record(path_b);

  // Both runs are re-evaluated on one common objective; demand agreement so
  // the comparison cannot silently mix two different experiments.
  if (record_a.config.value("evaluator", nlohmann::json()) !=
      record_b.config.value("evaluator", nlohmann::json()))
    throw tsmhpo::ValidationError(
        "run records configure different evaluators; refusing to compare");

  const tsmhpo::ExperimentConfig config =
      tsmhpo::config_from_json(record_a.config);
  if (repeats == 0) repeats = config.repeats;  // flag omitted
  auto evaluator = tsmhpo::make_evaluator(config);
  tsmhpo::CachingEvaluator cached(*evaluator);

  const tsmhpo::TTestVariant variant =
      variant_name == "pooled" ? tsmhpo::TTestVariant::pooled
                               : tsmhpo::TTestVariant::welch;
  const tsmhpo::ComparisonReport report = tsmhpo::compare_runs(
      record_a, record_b, repeats, cached, alpha, file_stem(path_a),
      file_stem(path_b), worker_count_from_env(), variant);

  std::filesystem::create_directories(out_dir);
  const std::string base = out_dir + "/compare-" + file_stem(path_a) +
                           "-vs-" + file_stem(path_b);
  {
    std::ofstream json_out(base + ".json");
    json_out << report.doc().dump(2) << '\n';
    std::ofstream table_out(base + ".txt");
    table_out << report.table();
  }
  std::cout << report.table();
  std::cout << "wrote " << base << ".json\n";
  return kExitOk;
}

int cmd_space(const std::string& config_path) {
  const tsmhpo::ExperimentConfig config = tsmhpo::load_config(config_path);
  const auto& space = config.space;
  std::printf("%-18s %12s %12s %10s %10s %10s %10s\n", "dimension", "lower",
              "upper", "step", "grid", "bits", "threshold");
  for (const auto& def : space.dims)
    std::printf("%-18s %12g %12g %10g %10d %10d %10g\n", def.name.c_str(),
                def.lower, def.upper, def.step, def.grid_count(),
                def.effective_bit_width(), def.threshold);
  std::printf("dimensions: %d\n", space.dim_count());
  std::printf("total grid points: %llu\n",
              static_cast<unsigned long long>(space.total_grid_points()));
  std::printf("genotype bits: %d\n", space.bit_length());
  std::printf("subspaces (n_s): %d\n", 1 << space.dim_count());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Black-box hyperparameter optimisation: genetic search with an "
               "elite archive, two-tier (fast/full) evaluation and "
               "tree-structured mutation"};
  app.require_subcommand(1);

  std::string config_path;
  std::string seed_raw;
  std::string out_dir;
  std::string mutation;
  auto* run = app.add_subcommand("run", "execute one optimisation run");
  run->add_option("--config", config_path, "experiment config file (JSON)")
      ->required();
  run->add_option("--seed", seed_raw, "override the run seed");
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--mutation", mutation, "mutation mode: tsm | single_point")
      ->check(CLI::IsMember({"tsm", "single_point"}));

  std::string path_a;
  std::string path_b;
  double alpha = 0.1;
  int repeats = 0;  // 0 = take the run's configured repeats (default 30)
  std::string compare_out = ".";
  std::string variant = "welch";
  auto* compare = app.add_subcommand(
      "compare", "re-evaluate two runs' best settings and t-test them");
  compare->add_option("--a", path_a, "baseline run record (JSON)")->required();
  compare->add_option("--b", path_b, "challenger run record (JSON)")->required();
  compare->add_option("--alpha", alpha, "two-tailed significance level");
  compare->add_option("--repeats", repeats,
                      "full evaluations per setting (default: the run "
                      "config's repeats, normally 30)");
  compare->add_option("--out", compare_out, "output directory");
  compare->add_option("--variant", variant, "t-test variant: welch | pooled")
      ->check(CLI::IsMember({"welch", "pooled"}));

  std::string space_config;
  auto* space = app.add_subcommand("space", "summarise the search space");
  space->add_option("--config", space_config, "experiment config file (JSON)")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (run->parsed()) return cmd_run(config_path, seed_raw, out_dir, mutation);
    if (compare->parsed())
      return cmd_compare(path_a, path_b, alpha, repeats, compare_out, variant);
    return cmd_space(space_config);
  } catch (const tsmhpo::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const tsmhpo::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
