#pragma once

#include <fstream>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsmhpo/eval.hpp"
#include "tsmhpo/evolve.hpp"
#include "tsmhpo/process_evaluator.hpp"
#include "tsmhpo/space.hpp"

namespace tsmhpo {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// =========================================================================
// Defaults
// =========================================================================

/// Built-in four-dimensional space for tuning a graph-convolution regressor:
/// batch size, learning rate, graph-convolution layer size and dense layer
/// size, each on its published grid with the median threshold.
inline SearchSpace default_search_space() {
  SearchSpace space;
  space.dims = {
      {"batch_size", 8.0, 512.0, 8.0, 256.0, 0},
      {"learning_rate", 0.0001, 0.0032, 0.0001, 0.0016, 0},
      {"graph_conv_size", 8.0, 512.0, 8.0, 256.0, 0},
      {"dense_size", 32.0, 1024.0, 32.0, 512.0, 0},
  };
  return space;
}

/// Grid-snapped median threshold: index max(1, (grid_count - 1) / 2).
inline double default_threshold(const HyperparameterDef& def) {
  const int k = std::max(1, (def.grid_count() - 1) / 2);
  return def.lower + k * def.step;
}

// =========================================================================
// Evaluator selection
// =========================================================================

struct SyntheticEvaluatorConfig {
  std::string kind = "deceptive_multimodal";
  std::uint64_t seed = 1;
  std::optional<double> noise_sd;
  std::optional<double> curve_exponent;
  std::optional<double> curve_scale;
};

struct EvaluatorConfig {
  enum class Type { synthetic, external };
  Type type = Type::synthetic;
  SyntheticEvaluatorConfig synthetic;
  std::vector<std::string> command;  // external only
};

struct ExperimentConfig {
  SearchSpace space;
  GaConfig ga;
  EvaluatorConfig evaluator;
  std::string out_dir = ".";
  int repeats = 30;
};

inline std::unique_ptr<Evaluator> make_evaluator(const ExperimentConfig& config) {
  if (config.evaluator.type == EvaluatorConfig::Type::external)
    return std::make_unique<ProcessEvaluator>(config.evaluator.command);
  const auto& synth = config.evaluator.synthetic;
  auto objective = std::make_unique<SyntheticObjective>(
      config.space, objective_kind_from_string(synth.kind), synth.seed);
  if (synth.noise_sd) objective->set_noise_sd(*synth.noise_sd);
  if (synth.curve_exponent) objective->set_curve_exponent(*synth.curve_exponent);
  if (synth.curve_scale) objective->set_curve_scale(*synth.curve_scale);
  return objective;
}

// =========================================================================
// JSON round-trip
// =========================================================================

inline void to_json(nlohmann::json& j, const HyperparameterDef& def) {
  j = {{"name", def.name},       {"lower", def.lower},
       {"upper", def.upper},     {"step", def.step},
       {"threshold", def.threshold}, {"bit_width", def.effective_bit_width()}};
}

inline void to_json(nlohmann::json& j, const SearchSpace& space) {
  j = space.dims;
}

inline void to_json(nlohmann::json& j, const GaConfig& ga) {
  j = {{"population_size", ga.population_size},
       {"max_generations", ga.max_generations},
       {"crossover_prob", ga.crossover_prob},
       {"mutation_prob", ga.mutation_prob},
       {"archive_ratio", ga.archive_ratio},
       {"candidate_count", ga.effective_candidate_count()},
       {"fast_fraction", ga.fast_fraction},
       {"mutation_mode", to_string(ga.mutation_mode)},
       {"seed", ga.seed},
       {"count_fast_evals", ga.count_fast_evals},
       {"candidate_criterion", to_string(ga.candidate_criterion)}};
}

inline void to_json(nlohmann::json& j, const EvaluatorConfig& ev) {
  if (ev.type == EvaluatorConfig::Type::external) {
    j = {{"external", {{"command", ev.command}}}};
    return;
  }
  nlohmann::json synth = {{"kind", ev.synthetic.kind},
                          {"seed", ev.synthetic.seed}};
  if (ev.synthetic.noise_sd) synth["noise_sd"] = *ev.synthetic.noise_sd;
  if (ev.synthetic.curve_exponent)
    synth["curve_exponent"] = *ev.synthetic.curve_exponent;
  if (ev.synthetic.curve_scale) synth["curve_scale"] = *ev.synthetic.curve_scale;
  j = {{"synthetic", synth}};
}

inline void to_json(nlohmann::json& j, const ExperimentConfig& config) {
  j = {{"space", config.space},
       {"ga", config.ga},
       {"evaluator", config.evaluator},
       {"out_dir", config.out_dir},
       {"repeats", config.repeats}};
}

namespace detail {

template <typename T>
T field_as(const nlohmann::json& j, const std::string& field, const T& fallback) {
  if (!j.contains(field)) return fallback;
  try {
    return j.at(field).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError("field '" + field + "' has the wrong type");
  }
}

}  // namespace detail

/// Builds a fully materialised config: omitted sections fall back to the
/// built-in defaults, omitted thresholds snap to the grid median, omitted
/// bit widths become minimal, and every invariant is checked eagerly.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("config document must be an object");
  ExperimentConfig config;

  if (j.contains("space")) {
    const auto& dims = j.at("space");
    if (!dims.is_array() || dims.empty())
      throw ValidationError("'space' must be a nonempty array of dimensions");
    for (const auto& dim : dims) {
      HyperparameterDef def;
      if (!dim.contains("name") || !dim.contains("lower") ||
          !dim.contains("upper") || !dim.contains("step"))
        throw ValidationError(
            "each dimension needs at least name/lower/upper/step");
      def.name = dim.at("name").get<std::string>();
      def.lower = dim.at("lower").get<double>();
      def.upper = dim.at("upper").get<double>();
      def.step = dim.at("step").get<double>();
      def.bit_width = detail::field_as<int>(dim, "bit_width", 0);
      if (dim.contains("threshold"))
        def.threshold = dim.at("threshold").get<double>();
      else
        def.threshold = default_threshold(def);
      config.space.dims.push_back(std::move(def));
    }
  } else {
    config.space = default_search_space();
  }

  if (j.contains("ga")) {
    const auto& ga = j.at("ga");
    GaConfig defaults;
    config.ga.population_size =
        detail::field_as(ga, "population_size", defaults.population_size);
    config.ga.max_generations =
        detail::field_as(ga, "max_generations", defaults.max_generations);
    config.ga.crossover_prob =
        detail::field_as(ga, "crossover_prob", defaults.crossover_prob);
    config.ga.mutation_prob =
        detail::field_as(ga, "mutation_prob", defaults.mutation_prob);
    config.ga.archive_ratio =
        detail::field_as(ga, "archive_ratio", defaults.archive_ratio);
    config.ga.candidate_count =
        detail::field_as(ga, "candidate_count", defaults.candidate_count);
    config.ga.fast_fraction =
        detail::field_as(ga, "fast_fraction", defaults.fast_fraction);
    config.ga.seed = detail::field_as<std::uint64_t>(ga, "seed", defaults.seed);
    config.ga.count_fast_evals =
        detail::field_as(ga, "count_fast_evals", defaults.count_fast_evals);
    try {
      config.ga.mutation_mode = mutation_mode_from_string(
          detail::field_as<std::string>(ga, "mutation_mode", "tsm"));
      config.ga.candidate_criterion = candidate_criterion_from_string(
          detail::field_as<std::string>(ga, "candidate_criterion",
                                        "fast_fitness"));
    } catch (const std::invalid_argument& e) {
      throw ValidationError(e.what());
    }
  }

  if (j.contains("evaluator")) {
    const auto& ev = j.at("evaluator");
    if (ev.contains("synthetic") == ev.contains("external"))
      throw ValidationError(
          "'evaluator' must name exactly one of synthetic|external");
    if (ev.contains("synthetic")) {
      const auto& synth = ev.at("synthetic");
      config.evaluator.type = EvaluatorConfig::Type::synthetic;
      config.evaluator.synthetic.kind =
          detail::field_as<std::string>(synth, "kind", "deceptive_multimodal");
      config.evaluator.synthetic.seed =
          detail::field_as<std::uint64_t>(synth, "seed", 1);
      if (synth.contains("noise_sd"))
        config.evaluator.synthetic.noise_sd = synth.at("noise_sd").get<double>();
      if (synth.contains("curve_exponent"))
        config.evaluator.synthetic.curve_exponent =
            synth.at("curve_exponent").get<double>();
      if (synth.contains("curve_scale"))
        config.evaluator.synthetic.curve_scale =
            synth.at("curve_scale").get<double>();
    } else {
      config.evaluator.type = EvaluatorConfig::Type::external;
      config.evaluator.command =
          ev.at("external").at("command").get<std::vector<std::string>>();
      if (config.evaluator.command.empty())
        throw ValidationError("'evaluator.external.command' must be nonempty");
    }
  }

  config.out_dir = detail::field_as<std::string>(j, "out_dir", ".");
  config.repeats = detail::field_as<int>(j, "repeats", 30);

  // Eager validation of everything referenced.
  try {
    config.space.validate();
    config.ga.validate();
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
  if (config.repeats < 2) throw ValidationError("'repeats' must be at least 2");
  if (config.evaluator.type == EvaluatorConfig::Type::synthetic) {
    objective_kind_from_string(config.evaluator.synthetic.kind);
    const auto& synth = config.evaluator.synthetic;
    if (synth.noise_sd && *synth.noise_sd < 0.0)
      throw ValidationError("'noise_sd' must be nonnegative");
    if (synth.curve_exponent && *synth.curve_exponent <= 0.0)
      throw ValidationError("'curve_exponent' must be positive");
    if (synth.curve_scale && *synth.curve_scale < 0.0)
      throw ValidationError("'curve_scale' must be nonnegative");
  }

  // Materialise derived defaults so a round-trip is the identity.
  for (auto& def : config.space.dims) def.bit_width = def.effective_bit_width();
  config.ga.candidate_count = config.ga.effective_candidate_count();
  return config;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in,
                              /*callback=*/nullptr,
                              /*allow_exceptions=*/true,
                              /*ignore_comments=*/true);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("config file " + path + " is not valid JSON: " + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const UnknownObjectiveKind& e) {
    throw ValidationError(e.what());
  }
}

}  // namespace tsmhpo
