// Protocol-violation fixture for ProcessEvaluator tests. The first argument
// picks a failure mode; "ok" behaves and answers fitness = sum of values.

#include <cstring>
#include <iostream>
#include <string>

#include <json.hpp>

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "ok";

  if (mode == "no_handshake") return 0;
  if (mode == "bad_handshake") {
    std::cout << nlohmann::json{{"protocol", "bogus/9"}}.dump() << "\n"
              << std::flush;
    return 0;
  }

  std::cout << nlohmann::json{{"protocol", "tsm-hpo/1"}}.dump() << "\n"
            << std::flush;
  if (mode == "die_after_handshake") return 0;

  std::string line;
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    if (mode == "die_mid") return 0;
    if (mode == "garbage") {
      std::cout << "this is not json\n" << std::flush;
      continue;
    }
    const nlohmann::json request = nlohmann::json::parse(line);
    const std::string id = request.at("id").get<std::string>();
    if (mode == "wrong_id") {
      std::cout << nlohmann::json{{"id", "nope"}, {"fitness", 0.0}}.dump()
                << "\n"
                << std::flush;
      continue;
    }
    if (mode == "report_error") {
      std::cout << nlohmann::json{{"id", id}, {"error", "synthetic failure"}}
                       .dump()
                << "\n"
                << std::flush;
      continue;
    }
    double total = 0.0;
    for (const auto& [name, value] :
         request.at("values").get<std::map<std::string, double>>())
      total += value;
    std::cout << nlohmann::json{{"id", id}, {"fitness", total}}.dump() << "\n"
              << std::flush;
  }
  return 0;
}
