#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsmhpo/config.hpp"
#include "tsmhpo/eval.hpp"
#include "tsmhpo/record.hpp"
#include "tsmhpo/stats.hpp"

namespace tsmhpo {

/// Verdict wording is fixed here so t's direction cannot be misread: the
/// first (baseline) run is better exactly when t < 0 with h = 1.
inline std::string verdict_sentence(const TestOutcome& outcome,
                                    const std::string& baseline_label,
                                    const std::string& challenger_label) {
  if (outcome.h == 1 && outcome.t < 0.0)
    return baseline_label + " significantly outperforms " + challenger_label +
           " (t < 0, h = 1)";
  if (outcome.h == 1 && outcome.t > 0.0)
    return challenger_label + " significantly outperforms " + baseline_label +
           " (t > 0, h = 1)";
  return "no significant difference between " + baseline_label + " and " +
         challenger_label + " (h = 0)";
}

struct ComparisonReport {
  std::string baseline_label;
  std::string challenger_label;
  RunSample baseline_sample;
  RunSample challenger_sample;
  std::map<std::string, double> baseline_setting;
  std::map<std::string, double> challenger_setting;
  double baseline_mean = 0.0, baseline_sd = 0.0;
  double challenger_mean = 0.0, challenger_sd = 0.0;
  TestOutcome outcome;
  int repeats = 0;
  std::string verdict;

  nlohmann::json doc() const {
    return {{"alpha", outcome.alpha},
            {"repeats", repeats},
            {"variant",
             outcome.variant == TTestVariant::welch ? "welch" : "pooled"},
            {"baseline",
             {{"label", baseline_label},
              {"setting", baseline_setting},
              {"mean", baseline_mean},
              {"sd", baseline_sd},
              {"values", baseline_sample.values}}},
            {"challenger",
             {{"label", challenger_label},
              {"setting", challenger_setting},
              {"mean", challenger_mean},
              {"sd", challenger_sd},
              {"values", challenger_sample.values}}},
            {"t", outcome.t},
            {"degrees_of_freedom", outcome.degrees_of_freedom},
            {"p_value", outcome.p_value},
            {"h", outcome.h},
            {"zero_variance", outcome.zero_variance},
            {"verdict", verdict}};
  }

  /// Aligned plain-text table in the shape of the usual method-comparison
  /// tables: one row per method with mean and standard deviation, then the
  /// test line and the verdict.
  std::string table() const {
    char line[256];
    std::string text;
    std::snprintf(line, sizeof line, "%-36s %14s %14s\n", "method",
                  "mean_fitness", "std_fitness");
    text += line;
    std::snprintf(line, sizeof line, "%-36s %14.6f %14.6f\n",
                  baseline_label.c_str(), baseline_mean, baseline_sd);
    text += line;
    std::snprintf(line, sizeof line, "%-36s %14.6f %14.6f\n",
                  challenger_label.c_str(), challenger_mean, challenger_sd);
    text += line;
    std::snprintf(line, sizeof line,
                  "t = %.4f, df = %.2f, p = %.4f, h = %d (alpha = %.2f)\n",
                  outcome.t, outcome.degrees_of_freedom, outcome.p_value,
                  outcome.h, outcome.alpha);
    text += line;
    text += "verdict: " + verdict + "\n";
    return text;
  }
};

namespace detail {

inline SearchSpace space_from_record(const RunRecord& record) {
  if (!record.config.contains("space"))
    throw std::runtime_error(
        "run record carries no space definition in its config snapshot");
  nlohmann::json wrapped = {{"space", record.config.at("space")}};
  return config_from_json(wrapped).space;
}

}  // namespace detail

/// Re-evaluates both records' best settings `repeats` times at full budget
/// with per-repeat derived seeds, then runs the two-sample test with record
/// `a` as the baseline. Both records must describe the same search space.
inline ComparisonReport compare_runs(const RunRecord& a, const RunRecord& b,
                                     int repeats, Evaluator& evaluator,
                                     double alpha,
                                     const std::string& label_a,
                                     const std::string& label_b,
                                     int workers = 1,
                                     TTestVariant variant = TTestVariant::welch) {
  if (repeats < 2) throw std::invalid_argument("repeats must be at least 2");
  const SearchSpace space_a = detail::space_from_record(a);
  const SearchSpace space_b = detail::space_from_record(b);
  if (nlohmann::json(space_a) != nlohmann::json(space_b))
    throw std::runtime_error(
        "run records describe different search spaces; refusing to compare");

  auto sample_of = [&](const RunRecord& record, const std::string& label,
                       const std::string& tag) {
    std::vector<EvaluationRequest> requests;
    requests.reserve(repeats);
    for (int i = 0; i < repeats; ++i) {
      EvaluationRequest request;
      request.id = "cmp-" + tag + "-" + std::to_string(i);
      request.indices = record.best.genotype.indices;
      request.values = detail::request_values(space_a, record.best.genotype);
      request.budget_fraction = 1.0;
      request.seed =
          mix_seed({record.seed, 0xC03A, static_cast<std::uint64_t>(i)});
      requests.push_back(std::move(request));
    }
    const auto results = evaluate_batch(evaluator, requests, workers);
    RunSample sample;
    sample.label = label;
    sample.values.reserve(repeats);
    for (const auto& r : results) sample.values.push_back(r.fitness);
    return sample;
  };

  ComparisonReport report;
  report.baseline_label = label_a;
  report.challenger_label = label_b;
  report.repeats = repeats;
  report.baseline_sample = sample_of(a, label_a, "a");
  report.challenger_sample = sample_of(b, label_b, "b");
  report.baseline_setting = detail::request_values(space_a, a.best.genotype);
  report.challenger_setting = detail::request_values(space_a, b.best.genotype);

  std::tie(report.baseline_mean, report.baseline_sd) =
      summarize(report.baseline_sample);
  std::tie(report.challenger_mean, report.challenger_sd) =
      summarize(report.challenger_sample);
  report.outcome =
      t_test(report.baseline_sample, report.challenger_sample, alpha, variant);
  report.verdict = verdict_sentence(report.outcome, label_a, label_b);
  return report;
}

}  // namespace tsmhpo
