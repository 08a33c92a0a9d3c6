#pragma once

#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsmhpo/evolve.hpp"

namespace tsmhpo {

// JSON layer for run provenance. nlohmann::json keeps object keys sorted,
// so identical records serialise to identical bytes; everything that is not
// reproducible (wall clock) lives under the single "meta" key.

using nlohmann::json;

inline void to_json(json& j, const Genotype& g) {
  j = json{{"bits", g.bits}, {"indices", g.indices}};
}

inline void from_json(const json& j, Genotype& g) {
  j.at("bits").get_to(g.bits);
  j.at("indices").get_to(g.indices);
}

inline void to_json(json& j, const Individual& ind) {
  j = json{{"genotype", ind.genotype},
           {"birth_generation", ind.birth_generation}};
  if (ind.fast_fitness) j["fast_fitness"] = *ind.fast_fitness;
  if (ind.full_fitness) j["full_fitness"] = *ind.full_fitness;
}

inline void from_json(const json& j, Individual& ind) {
  j.at("genotype").get_to(ind.genotype);
  j.at("birth_generation").get_to(ind.birth_generation);
  ind.fast_fitness.reset();
  ind.full_fitness.reset();
  if (j.contains("fast_fitness")) ind.fast_fitness = j["fast_fitness"].get<double>();
  if (j.contains("full_fitness")) ind.full_fitness = j["full_fitness"].get<double>();
}

inline void to_json(json& j, const TreeInternalCount& c) {
  j = json{{"depth", c.depth}, {"prefix", c.prefix}, {"count", c.count}};
}

inline void from_json(const json& j, TreeInternalCount& c) {
  j.at("depth").get_to(c.depth);
  j.at("prefix").get_to(c.prefix);
  j.at("count").get_to(c.count);
}

inline void to_json(json& j, const TreeSnapshot& t) {
  j = json{{"leaf_counts", t.leaf_counts},
           {"internal_counts", t.internal_counts}};
}

inline void from_json(const json& j, TreeSnapshot& t) {
  j.at("leaf_counts").get_to(t.leaf_counts);
  j.at("internal_counts").get_to(t.internal_counts);
}

inline void to_json(json& j, const GenerationStats& s) {
  j = json{{"generation", s.generation},
           {"best_full_fitness", s.best_full_fitness},
           {"mean_full_fitness", s.mean_full_fitness},
           {"fast_evals", s.fast_evaluations},
           {"full_evals", s.full_evaluations},
           {"archive", s.archive},
           {"population", s.population}};
}

inline void from_json(const json& j, GenerationStats& s) {
  j.at("generation").get_to(s.generation);
  j.at("best_full_fitness").get_to(s.best_full_fitness);
  j.at("mean_full_fitness").get_to(s.mean_full_fitness);
  j.at("fast_evals").get_to(s.fast_evaluations);
  j.at("full_evals").get_to(s.full_evaluations);
  j.at("archive").get_to(s.archive);
  j.at("population").get_to(s.population);
}

inline void to_json(json& j, const RunRecord& r) {
  j = json{{"config", r.config},
           {"seed", r.seed},
           {"initial_population", r.initial_population},
           {"history", r.history},
           {"best", r.best},
           {"tree", r.tree},
           {"total_fast_evals", r.total_fast_evaluations},
           {"total_full_evals", r.total_full_evaluations},
           {"meta", r.meta}};
}

inline void from_json(const json& j, RunRecord& r) {
  r.config = j.at("config");
  j.at("seed").get_to(r.seed);
  j.at("initial_population").get_to(r.initial_population);
  j.at("history").get_to(r.history);
  j.at("best").get_to(r.best);
  j.at("tree").get_to(r.tree);
  j.at("total_fast_evals").get_to(r.total_fast_evaluations);
  j.at("total_full_evals").get_to(r.total_full_evaluations);
  r.meta = j.value("meta", json::object());
}

// ---- file I/O ----

inline void save_run_record(const RunRecord& record, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write run record to " + path);
  out << json(record).dump(2) << '\n';
}

inline RunRecord load_run_record(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read run record from " + path);
  json j = json::parse(in);
  RunRecord record = j.get<RunRecord>();
  // A reloaded record must still satisfy its own invariants.
  double previous_best = std::numeric_limits<double>::infinity();
  for (const auto& entry : record.history) {
    if (entry.best_full_fitness > previous_best)
      throw std::runtime_error("run record " + path +
                               " has an increasing best-fitness history");
    previous_best = entry.best_full_fitness;
  }
  return record;
}

/// Convenience export: one row per generation with the fitness trajectory
/// and the per-fidelity evaluation counts. Doubles use max round-trip
/// precision so the CSV and the record agree bit for bit.
inline void save_history_csv(const RunRecord& record, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write history CSV to " + path);
  out << "generation,best_full_fitness,mean_full_fitness,fast_evals,full_evals\n";
  char buffer[64];
  for (const auto& entry : record.history) {
    out << entry.generation << ',';
    std::snprintf(buffer, sizeof buffer, "%.17g", entry.best_full_fitness);
    out << buffer << ',';
    std::snprintf(buffer, sizeof buffer, "%.17g", entry.mean_full_fitness);
    out << buffer << ',' << entry.fast_evaluations << ','
        << entry.full_evaluations << '\n';
  }
}

}  // namespace tsmhpo
