#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tsmhpo/eval.hpp"
#include "tsmhpo/rng.hpp"
#include "tsmhpo/space.hpp"
#include "tsmhpo/tree.hpp"

namespace tsmhpo {

// =========================================================================
// Individuals and the elite archive
// =========================================================================

struct Individual {
  Genotype genotype;
  std::optional<double> fast_fitness;   // lower is better
  std::optional<double> full_fitness;   // lower is better, budget 1.0
  int birth_generation = 0;
};

struct MissingFullFitness : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NonFiniteFitness : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct UniquenessUnreachable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bounded, duplicate-free store of the best fully evaluated individuals,
/// sorted ascending by full fitness. Source of Parent A.
struct EliteArchive {
  std::vector<Individual> members;
  int capacity = 1;

  const Individual& best() const { return members.front(); }
};

/// Merges candidates into the archive: duplicates (by bitstring) keep the
/// best fitness, the merged set is re-sorted ascending and truncated to
/// capacity. Incumbents win fitness ties.
inline EliteArchive update_archive(EliteArchive archive,
                                   const std::vector<Individual>& candidates) {
  for (const auto& c : candidates)
    if (!c.full_fitness)
      throw MissingFullFitness("archive candidate lacks full fitness");

  std::vector<Individual> merged = std::move(archive.members);
  for (const auto& c : candidates) {
    bool duplicate = false;
    for (auto& m : merged) {
      if (m.genotype.bits == c.genotype.bits) {
        duplicate = true;
        if (*c.full_fitness < *m.full_fitness) m = c;
        break;
      }
    }
    if (!duplicate) merged.push_back(c);
  }
  std::stable_sort(merged.begin(), merged.end(),
                   [](const Individual& a, const Individual& b) {
                     return *a.full_fitness < *b.full_fitness;
                   });
  if (static_cast<int>(merged.size()) > archive.capacity)
    merged.resize(archive.capacity);
  archive.members = std::move(merged);
  return archive;
}

// =========================================================================
// Selection
// =========================================================================

/// Linear rank weights for minimisation: rank r of n (best r = 1) gets
/// weight (n - r + 1) / (n (n + 1) / 2). Rank-based rather than
/// fitness-proportionate so the scheme is invariant under shifting or
/// scaling all fitnesses and never degenerates on near-equal values.
inline std::vector<double> selection_weights(
    const std::vector<double>& fitnesses, bool minimize = true) {
  if (fitnesses.empty())
    throw std::invalid_argument("selection over an empty fitness list");
  for (double f : fitnesses)
    if (!std::isfinite(f)) throw NonFiniteFitness("fitness is not finite");

  const std::size_t n = fitnesses.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return minimize ? fitnesses[a] < fitnesses[b]
                                     : fitnesses[a] > fitnesses[b];
                   });
  const double total = static_cast<double>(n) * (n + 1) / 2.0;
  std::vector<double> weights(n);
  for (std::size_t rank = 0; rank < n; ++rank)
    weights[order[rank]] = static_cast<double>(n - rank) / total;
  return weights;
}

// =========================================================================
// Variation operators
// =========================================================================

/// Classic single-point crossover: a cut position p is drawn uniformly from
/// {1, ..., L-1} and the bits strictly right of p are swapped. Children are
/// index-repaired through the codec's clamping rule.
inline std::pair<Genotype, Genotype> single_point_crossover(
    const SearchSpace& space, const Genotype& a, const Genotype& b, Rng& rng) {
  const int length = space.bit_length();
  if (length < 2) return {a, b};  // nothing to cut
  const int cut = rng.next_int(1, length - 1);
  std::string bits_a = a.bits.substr(0, cut) + b.bits.substr(cut);
  std::string bits_b = b.bits.substr(0, cut) + a.bits.substr(cut);
  return {genotype_from_bits(space, bits_a), genotype_from_bits(space, bits_b)};
}

/// Flips one uniformly chosen bit, then index-repairs.
inline Genotype single_point_mutation(const SearchSpace& space,
                                      const Genotype& g, Rng& rng) {
  const int position = rng.next_int(0, space.bit_length() - 1);
  std::string bits = g.bits;
  bits[position] = bits[position] == '0' ? '1' : '0';
  return genotype_from_bits(space, bits);
}

// =========================================================================
// Configuration
// =========================================================================

enum class MutationMode { single_point, tsm };

inline MutationMode mutation_mode_from_string(const std::string& name) {
  if (name == "single_point") return MutationMode::single_point;
  if (name == "tsm") return MutationMode::tsm;
  throw std::invalid_argument("unknown mutation mode '" + name + "'");
}

inline std::string to_string(MutationMode mode) {
  return mode == MutationMode::tsm ? "tsm" : "single_point";
}

enum class CandidateCriterion { fast_fitness, slope };

inline CandidateCriterion candidate_criterion_from_string(
    const std::string& name) {
  if (name == "fast_fitness") return CandidateCriterion::fast_fitness;
  if (name == "slope") return CandidateCriterion::slope;
  throw std::invalid_argument("unknown candidate criterion '" + name + "'");
}

inline std::string to_string(CandidateCriterion criterion) {
  return criterion == CandidateCriterion::slope ? "slope" : "fast_fitness";
}

struct GaConfig {
  int population_size = 20;
  int max_generations = 10;
  double crossover_prob = 0.8;
  double mutation_prob = 0.2;
  double archive_ratio = 0.5;
  int candidate_count = 0;  // 0 = 20% of the population, at least 1
  double fast_fraction = 0.1;
  MutationMode mutation_mode = MutationMode::tsm;
  std::uint64_t seed = 0;
  bool count_fast_evals = false;
  CandidateCriterion candidate_criterion = CandidateCriterion::fast_fitness;

  int archive_capacity() const {
    return std::max(1, static_cast<int>(
                           std::llround(archive_ratio * population_size)));
  }

  int effective_candidate_count() const {
    if (candidate_count > 0) return candidate_count;
    return std::max(1,
                    static_cast<int>(std::llround(0.2 * population_size)));
  }

  void validate() const {
    auto fail = [](const std::string& why) {
      throw std::invalid_argument("ga config: " + why);
    };
    if (population_size < 1) fail("population_size must be positive");
    if (max_generations < 1) fail("max_generations must be positive");
    if (crossover_prob < 0.0 || crossover_prob > 1.0)
      fail("crossover_prob must be in [0, 1]");
    if (mutation_prob < 0.0 || mutation_prob > 1.0)
      fail("mutation_prob must be in [0, 1]");
    if (archive_ratio <= 0.0 || archive_ratio > 1.0)
      fail("archive_ratio must be in (0, 1]");
    if (fast_fraction <= 0.0 || fast_fraction > 1.0)
      fail("fast_fraction must be in (0, 1]");
    if (candidate_count < 0) fail("candidate_count must be nonnegative");
    if (effective_candidate_count() > population_size)
      fail("candidate_count exceeds population_size");
  }
};

// =========================================================================
// Offspring generation
// =========================================================================

/// One offspring genotype from an archive parent and a population parent:
/// crossover fires with crossover_prob (keeping the child that inherits
/// Parent A's left segment), then the configured mutation fires with
/// mutation_prob. With neither firing the offspring is Parent A's genotype.
inline Genotype make_offspring(const SearchSpace& space, SpaceTree& tree,
                               const Individual& parent_a,
                               const Individual& parent_b,
                               const GaConfig& config, Rng& rng) {
  Genotype child = parent_a.genotype;
  if (rng.next_unit() < config.crossover_prob)
    child = single_point_crossover(space, parent_a.genotype,
                                   parent_b.genotype, rng)
                .first;
  if (rng.next_unit() < config.mutation_prob) {
    child = config.mutation_mode == MutationMode::tsm
                ? tsm_mutate_individual(tree, space, child, rng)
                : single_point_mutation(space, child, rng);
  }
  return child;
}

/// Scans in order and replaces any genotype equal to an earlier-kept one:
/// tsm mode re-samples a whole individual from the tree, single_point mode
/// walks the duplicate through chained bit flips until it is unique. Output
/// preserves length and order of the unique survivors.
inline std::vector<Genotype> enforce_population_uniqueness(
    std::vector<Genotype> population, const SpaceTree& tree,
    const SearchSpace& space, MutationMode mode, Rng& rng) {
  if (space.total_grid_points() < population.size())
    throw UniquenessUnreachable(
        "population of " + std::to_string(population.size()) +
        " cannot be unique in a grid of " +
        std::to_string(space.total_grid_points()) + " points");

  constexpr int kMaxAttempts = 100000;
  std::unordered_set<std::string> seen;
  seen.reserve(population.size());
  for (auto& genotype : population) {
    int attempts = 0;
    while (seen.count(genotype.bits)) {
      if (++attempts > kMaxAttempts)
        throw UniquenessUnreachable(
            "gave up repairing duplicates after " +
            std::to_string(kMaxAttempts) + " attempts");
      genotype = mode == MutationMode::tsm
                     ? tsm_sample_individual(tree, space, rng)
                     : single_point_mutation(space, genotype, rng);
    }
    seen.insert(genotype.bits);
  }
  return population;
}

// =========================================================================
// Run record
// =========================================================================

struct GenerationStats {
  int generation = 0;             // 1-based
  double best_full_fitness = 0.0; // best-so-far after the archive update
  double mean_full_fitness = 0.0; // mean of this generation's full evaluations
  int fast_evaluations = 0;
  int full_evaluations = 0;
  std::vector<Individual> archive;
  std::vector<std::string> population;  // offspring bitstrings, in order
};

/// Full provenance of one optimisation run. `config` holds the experiment
/// configuration as a document snapshot; `meta` holds wall-clock data and is
/// the only part excluded from reproducibility comparisons.
struct RunRecord {
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::vector<std::string> initial_population;
  std::vector<GenerationStats> history;
  Individual best;
  TreeSnapshot tree;
  std::uint64_t total_fast_evaluations = 0;
  std::uint64_t total_full_evaluations = 0;
  nlohmann::json meta = nlohmann::json::object();
};

// =========================================================================
// The generational driver
// =========================================================================

namespace detail {

inline std::map<std::string, double> request_values(const SearchSpace& space,
                                                    const Genotype& g) {
  std::map<std::string, double> values;
  for (int d = 0; d < space.dim_count(); ++d)
    values[space.dims[d].name] = space.dims[d].value_at(g.indices[d]);
  return values;
}

inline EvaluationRequest make_request(const SearchSpace& space,
                                      const Genotype& g, std::string id,
                                      double budget, std::uint64_t seed) {
  EvaluationRequest request;
  request.id = std::move(id);
  request.indices = g.indices;
  request.values = request_values(space, g);
  request.budget_fraction = budget;
  request.seed = seed;
  return request;
}

template <typename Fn>
auto with_context(const std::string& context, Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    throw std::runtime_error(context + ": " + e.what());
  }
}

/// Fitness used when roulette-selecting Parent B from the population: fast
/// fitness when present, otherwise the full value (the initial population is
/// the one cohort that was fully evaluated but never fast-evaluated).
inline double population_fitness(const Individual& ind) {
  if (ind.fast_fitness) return *ind.fast_fitness;
  if (ind.full_fitness) return *ind.full_fitness;
  throw std::logic_error("population member carries no fitness");
}

}  // namespace detail

/// Runs the full hierarchical-evaluation GA: a fully evaluated random
/// population seeds the elite archive; each generation breeds offspring from
/// an archive parent and a population parent, deduplicates them, ranks them
/// all by fast (low-budget) evaluation, fully evaluates the best few, and
/// folds those into the archive. Offspring replace the population wholesale;
/// elitism lives entirely in the archive.
inline RunRecord run_hesga(const SearchSpace& space, const GaConfig& config,
                           Evaluator& evaluator, int workers = 1) {
  space.validate();
  config.validate();
  const auto started = std::chrono::system_clock::now();
  const auto wall_start = std::chrono::steady_clock::now();

  Rng rng(config.seed);
  SpaceTree tree(space.dim_count());
  const int population_size = config.population_size;
  const int candidate_count = config.effective_candidate_count();

  RunRecord record;
  record.seed = config.seed;
  // Driver-level snapshot; callers owning a fuller experiment configuration
  // (space, evaluator, output paths) replace this with their own document.
  record.config = {{"ga",
                    {{"population_size", config.population_size},
                     {"max_generations", config.max_generations},
                     {"crossover_prob", config.crossover_prob},
                     {"mutation_prob", config.mutation_prob},
                     {"archive_ratio", config.archive_ratio},
                     {"candidate_count", candidate_count},
                     {"fast_fraction", config.fast_fraction},
                     {"mutation_mode", to_string(config.mutation_mode)},
                     {"seed", config.seed},
                     {"count_fast_evals", config.count_fast_evals},
                     {"candidate_criterion",
                      to_string(config.candidate_criterion)}}}};

  auto evaluate_all = [&](const std::vector<Genotype>& genotypes,
                          const std::string& id_prefix, double budget,
                          const std::string& context) {
    std::vector<EvaluationRequest> requests;
    requests.reserve(genotypes.size());
    for (std::size_t i = 0; i < genotypes.size(); ++i)
      requests.push_back(detail::make_request(
          space, genotypes[i], id_prefix + std::to_string(i), budget,
          config.seed));
    return detail::with_context(context, [&] {
      return evaluate_batch(evaluator, requests, workers);
    });
  };

  // Initialisation: a deduplicated random population, all fully evaluated,
  // with the best `capacity` seeding the archive.
  std::vector<Genotype> initial;
  initial.reserve(population_size);
  for (int i = 0; i < population_size; ++i)
    initial.push_back(random_genotype(space, rng));
  initial = enforce_population_uniqueness(std::move(initial), tree, space,
                                          config.mutation_mode, rng);

  const auto initial_results =
      evaluate_all(initial, "init-", 1.0, "initial full evaluation");
  record.total_full_evaluations += initial.size();

  std::vector<Individual> population;
  population.reserve(population_size);
  for (std::size_t i = 0; i < initial.size(); ++i) {
    Individual ind;
    ind.genotype = initial[i];
    ind.full_fitness = initial_results[i].fitness;
    ind.birth_generation = 0;
    population.push_back(std::move(ind));
    tree.record_evaluation(pathway(space, initial[i]));
    record.initial_population.push_back(initial[i].bits);
  }

  EliteArchive archive;
  archive.capacity = config.archive_capacity();
  archive = update_archive(std::move(archive), population);

  // Generations.
  for (int generation = 1; generation <= config.max_generations; ++generation) {
    const std::string gen_tag = "generation " + std::to_string(generation);

    std::vector<double> archive_fitness;
    archive_fitness.reserve(archive.members.size());
    for (const auto& m : archive.members)
      archive_fitness.push_back(*m.full_fitness);
    const auto archive_weights = selection_weights(archive_fitness);

    std::vector<double> population_fitness;
    population_fitness.reserve(population.size());
    for (const auto& m : population)
      population_fitness.push_back(detail::population_fitness(m));
    const auto population_weights = selection_weights(population_fitness);

    std::vector<Genotype> offspring_genotypes;
    offspring_genotypes.reserve(population_size);
    for (int i = 0; i < population_size; ++i) {
      const Individual& parent_a =
          archive.members[roulette_select(archive_weights, rng)];
      const Individual& parent_b =
          population[roulette_select(population_weights, rng)];
      offspring_genotypes.push_back(
          make_offspring(space, tree, parent_a, parent_b, config, rng));
    }
    offspring_genotypes = enforce_population_uniqueness(
        std::move(offspring_genotypes), tree, space, config.mutation_mode, rng);

    GenerationStats stats;
    stats.generation = generation;

    // Fast evaluation of the whole offspring cohort.
    const std::string fast_prefix = "g" + std::to_string(generation) + "-f";
    const auto fast_results =
        evaluate_all(offspring_genotypes, fast_prefix, config.fast_fraction,
                     gen_tag + " fast evaluation");
    stats.fast_evaluations += static_cast<int>(offspring_genotypes.size());

    std::vector<Individual> offspring;
    offspring.reserve(offspring_genotypes.size());
    for (std::size_t i = 0; i < offspring_genotypes.size(); ++i) {
      Individual ind;
      ind.genotype = offspring_genotypes[i];
      ind.fast_fitness = fast_results[i].fitness;
      ind.birth_generation = generation;
      offspring.push_back(std::move(ind));
      if (config.count_fast_evals)
        tree.record_evaluation(pathway(space, offspring_genotypes[i]));
    }

    // Candidate shortlist. The slope criterion spends a second fast pass at
    // half budget and keeps the offspring whose simulated learning curves
    // fall fastest; the default keeps the lowest fast fitness.
    std::vector<std::size_t> candidate_order(offspring.size());
    std::iota(candidate_order.begin(), candidate_order.end(), 0);
    if (config.candidate_criterion == CandidateCriterion::slope) {
      const double half_budget = config.fast_fraction / 2.0;
      const std::string half_prefix = "g" + std::to_string(generation) + "-h";
      const auto half_results =
          evaluate_all(offspring_genotypes, half_prefix, half_budget,
                       gen_tag + " slope evaluation");
      stats.fast_evaluations += static_cast<int>(offspring_genotypes.size());
      std::vector<double> slope(offspring.size());
      for (std::size_t i = 0; i < offspring.size(); ++i)
        slope[i] = (half_results[i].fitness - *offspring[i].fast_fitness) /
                   (config.fast_fraction - half_budget);
      std::stable_sort(candidate_order.begin(), candidate_order.end(),
                       [&](std::size_t a, std::size_t b) {
                         return slope[a] > slope[b];
                       });
    } else {
      std::stable_sort(candidate_order.begin(), candidate_order.end(),
                       [&](std::size_t a, std::size_t b) {
                         return *offspring[a].fast_fitness <
                                *offspring[b].fast_fitness;
                       });
    }

    std::vector<Genotype> candidate_genotypes;
    candidate_genotypes.reserve(candidate_count);
    for (int i = 0; i < candidate_count; ++i)
      candidate_genotypes.push_back(
          offspring[candidate_order[i]].genotype);

    const std::string full_prefix = "g" + std::to_string(generation) + "-c";
    const auto full_results =
        evaluate_all(candidate_genotypes, full_prefix, 1.0,
                     gen_tag + " full evaluation");
    stats.full_evaluations += candidate_count;

    std::vector<Individual> candidates;
    candidates.reserve(candidate_count);
    double fitness_sum = 0.0;
    for (int i = 0; i < candidate_count; ++i) {
      Individual ind = offspring[candidate_order[i]];
      ind.full_fitness = full_results[i].fitness;
      fitness_sum += full_results[i].fitness;
      tree.record_evaluation(pathway(space, ind.genotype));
      // Mirror the full fitness back into the population copy.
      offspring[candidate_order[i]].full_fitness = full_results[i].fitness;
      candidates.push_back(std::move(ind));
    }

    archive = update_archive(std::move(archive), candidates);

    stats.best_full_fitness = *archive.best().full_fitness;
    stats.mean_full_fitness = fitness_sum / candidate_count;
    stats.archive = archive.members;
    for (const auto& ind : offspring) stats.population.push_back(ind.genotype.bits);
    record.total_fast_evaluations += stats.fast_evaluations;
    record.total_full_evaluations += stats.full_evaluations;
    record.history.push_back(std::move(stats));

    population = std::move(offspring);
  }

  record.best = archive.best();
  record.tree = snapshot_tree(tree);

  const auto wall_end = std::chrono::steady_clock::now();
  record.meta = {
      {"started_at_unix_ms",
       std::chrono::duration_cast<std::chrono::milliseconds>(
           started.time_since_epoch())
           .count()},
      {"duration_ms", std::chrono::duration_cast<std::chrono::milliseconds>(
                          wall_end - wall_start)
                          .count()},
  };
  return record;
}

}  // namespace tsmhpo
