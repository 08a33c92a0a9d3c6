#include "tsmhpo/config.hpp"

#include <gtest/gtest.h>

#include <fstream>

namespace {

using namespace tsmhpo;

std::string write_temp(const std::string& name, const std::string& content) {
  const std::string path = ::testing::TempDir() + "/" + name;
  std::ofstream out(path);
  out << content;
  return path;
}

TEST(LoadConfig, MinimalConfigGetsPublishedDefaults) {
  const auto config = load_config(write_temp(
      "minimal.json", R"({"evaluator": {"synthetic": {"kind": "separable_quadratic"}}})"));

  ASSERT_EQ(config.space.dim_count(), 4);
  const auto& dims = config.space.dims;
  EXPECT_EQ(dims[0].name, "batch_size");
  EXPECT_DOUBLE_EQ(dims[0].lower, 8.0);
  EXPECT_DOUBLE_EQ(dims[0].upper, 512.0);
  EXPECT_DOUBLE_EQ(dims[0].step, 8.0);
  EXPECT_DOUBLE_EQ(dims[0].threshold, 256.0);
  EXPECT_EQ(dims[0].grid_count(), 64);
  EXPECT_EQ(dims[0].bit_width, 6);

  EXPECT_EQ(dims[1].name, "learning_rate");
  EXPECT_DOUBLE_EQ(dims[1].threshold, 0.0016);
  EXPECT_EQ(dims[1].grid_count(), 32);
  EXPECT_EQ(dims[1].bit_width, 5);

  EXPECT_DOUBLE_EQ(dims[2].threshold, 256.0);
  EXPECT_DOUBLE_EQ(dims[3].threshold, 512.0);

  EXPECT_EQ(config.ga.population_size, 20);
  EXPECT_EQ(config.ga.max_generations, 10);
  EXPECT_DOUBLE_EQ(config.ga.crossover_prob, 0.8);
  EXPECT_DOUBLE_EQ(config.ga.mutation_prob, 0.2);
  EXPECT_DOUBLE_EQ(config.ga.archive_ratio, 0.5);
  EXPECT_EQ(config.ga.candidate_count, 4);  // 20% of the population
  EXPECT_DOUBLE_EQ(config.ga.fast_fraction, 0.1);
  EXPECT_EQ(config.ga.mutation_mode, MutationMode::tsm);
  EXPECT_EQ(config.repeats, 30);
}

TEST(LoadConfig, OmittedThresholdSnapsToGridMedian) {
  const auto config = load_config(write_temp("nothresh.json", R"({
    "space": [
      {"name": "batch", "lower": 8, "upper": 512, "step": 8},
      {"name": "lr", "lower": 0.0001, "upper": 0.0032, "step": 0.0001},
      {"name": "conv", "lower": 8, "upper": 512, "step": 8},
      {"name": "dense", "lower": 32, "upper": 1024, "step": 32}
    ],
    "evaluator": {"synthetic": {}}
  })"));
  EXPECT_DOUBLE_EQ(config.space.dims[0].threshold, 256.0);
  EXPECT_DOUBLE_EQ(config.space.dims[1].threshold, 0.0016);
  EXPECT_DOUBLE_EQ(config.space.dims[2].threshold, 256.0);
  EXPECT_DOUBLE_EQ(config.space.dims[3].threshold, 512.0);
}

TEST(LoadConfig, TwoPointGridThresholdIsUpper) {
  const auto config = load_config(write_temp("twopoint.json", R"({
    "space": [{"name": "flag", "lower": 0, "upper": 1, "step": 1}],
    "evaluator": {"synthetic": {}}
  })"));
  EXPECT_DOUBLE_EQ(config.space.dims[0].threshold, 1.0);
}

TEST(LoadConfig, OffGridThresholdIsRejected) {
  const std::string path = write_temp("offgrid.json", R"({
    "space": [{"name": "batch", "lower": 8, "upper": 512, "step": 8,
               "threshold": 250}],
    "evaluator": {"synthetic": {}}
  })");
  EXPECT_THROW(load_config(path), ValidationError);
}

TEST(LoadConfig, MalformedJsonIsParseError) {
  EXPECT_THROW(load_config(write_temp("bad.json", "{ not json")), ParseError);
  EXPECT_THROW(load_config("/nonexistent/config.json"), ParseError);
}

TEST(LoadConfig, WrongFieldTypesAndValuesAreValidationErrors) {
  EXPECT_THROW(load_config(write_temp(
                   "badkind.json",
                   R"({"evaluator": {"synthetic": {"kind": "bogus"}}})")),
               ValidationError);
  EXPECT_THROW(load_config(write_temp(
                   "badga.json",
                   R"({"ga": {"population_size": -3}})")),
               ValidationError);
  EXPECT_THROW(load_config(write_temp(
                   "badmode.json",
                   R"({"ga": {"mutation_mode": "quantum"}})")),
               ValidationError);
  EXPECT_THROW(load_config(write_temp(
                   "badevaluator.json",
                   R"({"evaluator": {"synthetic": {}, "external": {"command": ["x"]}}})")),
               ValidationError);
  EXPECT_THROW(load_config(write_temp(
                   "badtype.json",
                   R"({"ga": {"population_size": "many"}})")),
               ValidationError);
}

TEST(LoadConfig, RoundTripIsIdentity) {
  const std::string path = write_temp("roundtrip.json", R"({
    "space": [
      {"name": "batch", "lower": 8, "upper": 512, "step": 8, "bit_width": 7}
    ],
    "ga": {"population_size": 12, "seed": 77, "mutation_mode": "single_point"},
    "evaluator": {"synthetic": {"kind": "plateau_noise", "seed": 5,
                                "noise_sd": 0.01}},
    "out_dir": "results",
    "repeats": 10
  })");
  const ExperimentConfig first = load_config(path);
  const nlohmann::json serialized = first;
  const ExperimentConfig second = config_from_json(serialized);
  EXPECT_EQ(serialized, nlohmann::json(second));
  EXPECT_EQ(first.space.dims[0].bit_width, 7);
  EXPECT_EQ(second.ga.seed, 77u);
  EXPECT_EQ(second.out_dir, "results");
}

TEST(LoadConfig, ExternalEvaluatorCommand) {
  const auto config = load_config(write_temp("external.json", R"({
    "evaluator": {"external": {"command": ["python3", "worker.py", "--flag"]}}
  })"));
  ASSERT_EQ(config.evaluator.type, EvaluatorConfig::Type::external);
  ASSERT_EQ(config.evaluator.command.size(), 3u);
  EXPECT_EQ(config.evaluator.command[0], "python3");
}

TEST(LoadConfig, CommentsAreTolerated) {
  const auto config = load_config(write_temp("comments.json", R"({
    // minimal synthetic setup
    "evaluator": {"synthetic": {}}
  })"));
  EXPECT_EQ(config.space.dim_count(), 4);
}

TEST(MakeEvaluator, BuildsConfiguredSynthetic) {
  ExperimentConfig config;
  config.space = default_search_space();
  config.evaluator.synthetic.kind = "plateau_noise";
  config.evaluator.synthetic.seed = 3;
  config.evaluator.synthetic.noise_sd = 0.25;
  const auto evaluator = make_evaluator(config);
  auto* synthetic = dynamic_cast<SyntheticObjective*>(evaluator.get());
  ASSERT_NE(synthetic, nullptr);
  EXPECT_EQ(synthetic->kind(), ObjectiveKind::plateau_noise);
  EXPECT_DOUBLE_EQ(synthetic->noise_sd(), 0.25);
}

TEST(DefaultSpace, MatchesPublishedGrid) {
  const SearchSpace space = default_search_space();
  space.validate();
  EXPECT_EQ(space.total_grid_points(), 64ull * 32 * 64 * 32);  // 4,194,304
  EXPECT_EQ(space.bit_length(), 6 + 5 + 6 + 5);
}

}  // namespace
