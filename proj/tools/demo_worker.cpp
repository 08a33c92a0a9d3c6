// tsm-hpo-worker: reference external evaluator speaking the line-delimited
// protocol on stdin/stdout. Serves one of the built-in synthetic objectives,
// so an engine configured with {"external": {"command": [...]}} against this
// worker reproduces the in-process synthetic results bit for bit.

#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "tsmhpo/config.hpp"
#include "tsmhpo/eval.hpp"

int main(int argc, char** argv) {
  CLI::App app{"reference objective worker for the tsm-hpo protocol"};
  std::string config_path;
  std::string kind = "separable_quadratic";
  std::uint64_t seed = 1;
  double noise_sd = -1.0;
  app.add_option("--config", config_path,
                 "experiment config supplying the search space "
                 "(default: built-in space)");
  app.add_option("--kind", kind, "synthetic objective kind");
  app.add_option("--seed", seed, "landscape seed");
  app.add_option("--noise", noise_sd, "override evaluation noise sd");
  CLI11_PARSE(app, argc, argv);

  try {
    const tsmhpo::SearchSpace space =
        config_path.empty() ? tsmhpo::default_search_space()
                            : tsmhpo::load_config(config_path).space;
    tsmhpo::SyntheticObjective objective =
        tsmhpo::make_benchmark_objective(space, kind, seed);
    if (noise_sd >= 0.0) objective.set_noise_sd(noise_sd);

    std::cout << nlohmann::json{{"protocol", "tsm-hpo/1"}}.dump() << "\n"
              << std::flush;

    std::string line;
    while (std::getline(std::cin, line)) {
      if (line.empty()) continue;
      std::string id = "?";
      nlohmann::json response;
      try {
        const nlohmann::json request_json = nlohmann::json::parse(line);
        id = request_json.at("id").get<std::string>();
        tsmhpo::EvaluationRequest request;
        request.id = id;
        request.values =
            request_json.at("values").get<std::map<std::string, double>>();
        request.budget_fraction = request_json.at("budget_fraction").get<double>();
        request.seed = request_json.at("seed").get<std::uint64_t>();
        response = {{"id", id},
                    {"fitness", objective.evaluate(request).fitness}};
      } catch (const std::exception& e) {
        response = {{"id", id}, {"error", e.what()}};
      }
      std::cout << response.dump() << "\n" << std::flush;
    }
  } catch (const std::exception& e) {
    std::cerr << "worker error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
