#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <exception>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "tsmhpo/rng.hpp"
#include "tsmhpo/space.hpp"

namespace tsmhpo {

// =========================================================================
// Requests and results
// =========================================================================

/// One budgeted evaluation of a hyperparameter setting. `values` is the
/// wire-level representation (dimension name -> real); `indices` carries the
/// same setting in grid coordinates for exact engine-side bookkeeping and is
/// filled whenever the request originates inside the engine.
struct EvaluationRequest {
  std::string id;
  std::vector<int> indices;
  std::map<std::string, double> values;
  double budget_fraction = 1.0;
  std::uint64_t seed = 0;
};

struct EvaluationResult {
  std::string id;
  double fitness = 0.0;
  double fidelity = 1.0;
};

struct EvaluatorUnavailable : std::runtime_error {
  explicit EvaluatorUnavailable(const std::string& id, const std::string& why)
      : std::runtime_error("evaluator unavailable [request " + id + "]: " + why),
        request_id(id) {}
  std::string request_id;
};

struct MalformedResponse : std::runtime_error {
  explicit MalformedResponse(const std::string& id, const std::string& why)
      : std::runtime_error("malformed response [request " + id + "]: " + why),
        request_id(id) {}
  std::string request_id;
};

struct EvaluationFailed : std::runtime_error {
  explicit EvaluationFailed(const std::string& id, const std::string& why)
      : std::runtime_error("evaluation failed [request " + id + "]: " + why),
        request_id(id) {}
  std::string request_id;
};

struct UnknownObjectiveKind : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct KTooLarge : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual EvaluationResult evaluate(const EvaluationRequest& request) = 0;
};

// =========================================================================
// Synthetic objectives
// =========================================================================

/// Simulated two-tier fitness: fitness(x, b) = base(x) + c(x) * (1 - b)^gamma
/// + noise. The curve term models the remaining improvement a partially
/// trained model would still gain, so lower budgets always look worse and
/// the gap c(x) varies per setting.
inline double budget_curve(double base, double curve_gap, double gamma,
                           double budget_fraction) {
  return base + curve_gap * std::pow(1.0 - budget_fraction, gamma);
}

enum class ObjectiveKind {
  deceptive_multimodal,
  separable_quadratic,
  plateau_noise,
};

inline ObjectiveKind objective_kind_from_string(const std::string& name) {
  if (name == "deceptive_multimodal") return ObjectiveKind::deceptive_multimodal;
  if (name == "separable_quadratic") return ObjectiveKind::separable_quadratic;
  if (name == "plateau_noise") return ObjectiveKind::plateau_noise;
  throw UnknownObjectiveKind("unknown objective kind '" + name + "'");
}

inline std::string to_string(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::deceptive_multimodal: return "deceptive_multimodal";
    case ObjectiveKind::separable_quadratic: return "separable_quadratic";
    case ObjectiveKind::plateau_noise: return "plateau_noise";
  }
  return "?";
}

/// Deterministic benchmark objective over grid indices. The landscape is
/// drawn once from `landscape_seed`; evaluation noise is keyed purely off
/// (indices, fidelity, request seed) so results are independent of call
/// order and worker count.
class SyntheticObjective : public Evaluator {
 public:
  SyntheticObjective(SearchSpace space, ObjectiveKind kind,
                     std::uint64_t landscape_seed)
      : space_(std::move(space)), kind_(kind), landscape_seed_(landscape_seed) {
    space_.validate();
    Rng rng(mix_seed({landscape_seed_, kLandscapeTag}));
    const int n = space_.dim_count();
    deeper_right_.resize(n);
    depth_gap_.resize(n);
    quad_target_.resize(n);
    quad_coeff_.resize(n);
    tier_weight_.resize(n);
    for (int d = 0; d < n; ++d) {
      deeper_right_[d] = (rng.next_u64() & 1) != 0;
      // Gap below 0.25 keeps the shallow well a genuine local minimum: the
      // deep parabola overtakes it only past x = 0.5 + gap.
      depth_gap_[d] = 0.10 + 0.08 * rng.next_unit();
      quad_target_[d] = rng.next_int(0, space_.dims[d].grid_count() - 1);
      quad_coeff_[d] = 0.5 + rng.next_unit();
      tier_weight_[d] = 0.1 + 0.2 * rng.next_unit();
    }
    if (kind_ == ObjectiveKind::plateau_noise) noise_sd_ = 0.05;
  }

  const SearchSpace& space() const { return space_; }
  ObjectiveKind kind() const { return kind_; }
  std::uint64_t landscape_seed() const { return landscape_seed_; }

  double noise_sd() const { return noise_sd_; }
  void set_noise_sd(double sd) { noise_sd_ = sd; }
  double curve_exponent() const { return curve_exponent_; }
  void set_curve_exponent(double g) { curve_exponent_ = g; }
  double curve_scale() const { return curve_scale_; }
  void set_curve_scale(double s) { curve_scale_ = s; }

  /// Full-budget noiseless fitness of a grid point; the quantity the
  /// exhaustive-sweep oracle minimises.
  double base(const std::vector<int>& indices) const {
    double total = kind_ == ObjectiveKind::deceptive_multimodal ? 1.0 : 0.5;
    for (int d = 0; d < space_.dim_count(); ++d) {
      const double x = normalised(d, indices[d]);
      switch (kind_) {
        case ObjectiveKind::deceptive_multimodal: {
          // Two quadratic wells per dimension, one deeper by depth_gap_.
          // Every combination of per-dimension wells is a local minimum and
          // the wells straddle the thresholds, so the local minima populate
          // distinct subspaces.
          const double left = 1.0 * sq(x - 0.25) + (deeper_right_[d] ? depth_gap_[d] : 0.0);
          const double right = 1.0 * sq(x - 0.75) + (deeper_right_[d] ? 0.0 : depth_gap_[d]);
          total += std::min(left, right);
          break;
        }
        case ObjectiveKind::separable_quadratic: {
          const double target = normalised(d, quad_target_[d]);
          total += quad_coeff_[d] * sq(x - target);
          break;
        }
        case ObjectiveKind::plateau_noise: {
          const int tier = std::min(3, static_cast<int>(x * 4.0));
          total += tier_weight_[d] * (static_cast<double>(tier) / 3.0);
          break;
        }
      }
    }
    return total;
  }

  /// Per-setting learning-curve gap c(x) > 0, hash-derived so nearby grid
  /// points can still differ in early-stage behaviour.
  double curve_gap(const std::vector<int>& indices) const {
    Rng rng(hash_setting(indices, 0x11, landscape_seed_));
    return curve_scale_ * (0.3 + 0.7 * rng.next_unit());
  }

  EvaluationResult evaluate(const EvaluationRequest& request) override {
    const std::vector<int> indices = resolve_indices(request);
    double fitness = budget_curve(base(indices), curve_gap(indices),
                                  curve_exponent_, request.budget_fraction);
    if (noise_sd_ > 0.0) {
      Rng rng(hash_setting(indices, 0x22, request.seed,
                           fidelity_bits(request.budget_fraction)));
      fitness += noise_sd_ * rng.next_normal();
    }
    return {request.id, fitness, request.budget_fraction};
  }

 private:
  static double sq(double v) { return v * v; }
  static std::uint64_t fidelity_bits(double b) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(b));
    std::memcpy(&bits, &b, sizeof(bits));
    return bits;
  }
  static constexpr std::uint64_t kLandscapeTag = 0x7353u;

  double normalised(int d, int index) const {
    const int count = space_.dims[d].grid_count();
    return count == 1 ? 0.0
                      : static_cast<double>(index) / static_cast<double>(count - 1);
  }

  std::uint64_t hash_setting(const std::vector<int>& indices, std::uint64_t tag,
                             std::uint64_t seed,
                             std::uint64_t extra = 0) const {
    std::uint64_t state = mix_seed({tag, seed, extra});
    for (int idx : indices) {
      state ^= static_cast<std::uint64_t>(idx) + 0x9e3779b97f4a7c15ull;
      state = splitmix64(state);
    }
    return state;
  }

  std::vector<int> resolve_indices(const EvaluationRequest& request) const {
    if (!request.indices.empty()) {
      if (static_cast<int>(request.indices.size()) != space_.dim_count())
        throw EvaluationFailed(request.id, "index vector has wrong dimension");
      return request.indices;
    }
    if (request.values.size() != static_cast<std::size_t>(space_.dim_count()))
      throw EvaluationFailed(request.id,
                             "values must cover exactly the space dimensions");
    std::vector<int> indices(space_.dim_count());
    for (int d = 0; d < space_.dim_count(); ++d) {
      const auto it = request.values.find(space_.dims[d].name);
      if (it == request.values.end())
        throw EvaluationFailed(request.id, "missing value for dimension '" +
                                               space_.dims[d].name + "'");
      indices[d] = space_.dims[d].index_of(it->second);
    }
    return indices;
  }

  SearchSpace space_;
  ObjectiveKind kind_;
  std::uint64_t landscape_seed_;
  double curve_exponent_ = 1.0;
  double curve_scale_ = 0.5;
  double noise_sd_ = 0.0;
  std::vector<bool> deeper_right_;
  std::vector<double> depth_gap_;
  std::vector<int> quad_target_;
  std::vector<double> quad_coeff_;
  std::vector<double> tier_weight_;
};

inline SyntheticObjective make_benchmark_objective(const SearchSpace& space,
                                                   const std::string& kind,
                                                   std::uint64_t seed) {
  return SyntheticObjective(space, objective_kind_from_string(kind), seed);
}

// =========================================================================
// Cache
// =========================================================================

/// Memoises (setting, fidelity, seed) -> fitness. Transparent: disabling the
/// cache changes evaluator call counts, never returned values. Lookups and
/// inserts are mutex-guarded so pool workers may share one instance.
class CachingEvaluator : public Evaluator {
 public:
  explicit CachingEvaluator(Evaluator& inner, bool enabled = true)
      : inner_(inner), enabled_(enabled) {}

  EvaluationResult evaluate(const EvaluationRequest& request) override {
    const std::uint64_t key = cache_key(request);
    if (enabled_) {
      std::lock_guard<std::mutex> lock(mutex_);
      const auto it = cache_.find(key);
      if (it != cache_.end()) {
        ++hits_;
        return {request.id, it->second, request.budget_fraction};
      }
    }
    EvaluationResult result = inner_.evaluate(request);
    if (enabled_) {
      std::lock_guard<std::mutex> lock(mutex_);
      cache_.emplace(key, result.fitness);
      ++misses_;
    }
    return result;
  }

  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }

 private:
  static std::uint64_t cache_key(const EvaluationRequest& request) {
    std::uint64_t fidelity_bits;
    std::memcpy(&fidelity_bits, &request.budget_fraction, sizeof(fidelity_bits));
    std::uint64_t state = mix_seed({0xCACE, request.seed, fidelity_bits});
    if (!request.indices.empty()) {
      for (int idx : request.indices) {
        state ^= static_cast<std::uint64_t>(idx) * 0x9e3779b97f4a7c15ull + 1;
        state = splitmix64(state);
      }
    } else {
      for (const auto& [name, value] : request.values) {
        for (char c : name) {
          state ^= static_cast<unsigned char>(c);
          state = splitmix64(state);
        }
        std::uint64_t vbits;
        std::memcpy(&vbits, &value, sizeof(vbits));
        state ^= vbits;
        state = splitmix64(state);
      }
    }
    return state;
  }

  Evaluator& inner_;
  bool enabled_;
  std::mutex mutex_;
  std::unordered_map<std::uint64_t, double> cache_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

// =========================================================================
// Worker pool
// =========================================================================

inline int default_worker_count() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

/// Evaluates a batch on up to `workers` threads. Results come back in
/// submission order regardless of completion order, and the first failing
/// request (again in submission order) has its exception rethrown, so
/// callers observe identical behaviour at any pool size.
inline std::vector<EvaluationResult> evaluate_batch(
    Evaluator& evaluator, const std::vector<EvaluationRequest>& requests,
    int workers) {
  std::vector<EvaluationResult> results(requests.size());
  std::vector<std::exception_ptr> errors(requests.size());

  if (workers <= 1 || requests.size() <= 1) {
    for (std::size_t i = 0; i < requests.size(); ++i)
      results[i] = evaluator.evaluate(requests[i]);
    return results;
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= requests.size()) return;
      try {
        results[i] = evaluator.evaluate(requests[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  const int thread_count =
      std::min<std::size_t>(workers, requests.size());
  std::vector<std::thread> threads;
  threads.reserve(thread_count);
  for (int t = 0; t < thread_count; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();

  for (const auto& error : errors)
    if (error) std::rethrow_exception(error);
  return results;
}

// =========================================================================
// Candidate selection
// =========================================================================

/// The k offspring with the lowest fast fitness, ties broken by earlier
/// position in the offspring list.
template <typename IndividualT>
std::vector<IndividualT> select_candidates(
    const std::vector<IndividualT>& offspring, int k) {
  if (k < 1 || static_cast<std::size_t>(k) > offspring.size())
    throw KTooLarge("candidate count " + std::to_string(k) +
                    " outside [1, " + std::to_string(offspring.size()) + "]");
  for (const auto& ind : offspring)
    if (!ind.fast_fitness)
      throw std::invalid_argument("offspring without fast fitness");

  std::vector<std::size_t> order(offspring.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return *offspring[a].fast_fitness <
                            *offspring[b].fast_fitness;
                   });
  std::vector<IndividualT> selected;
  selected.reserve(k);
  for (int i = 0; i < k; ++i) selected.push_back(offspring[order[i]]);
  return selected;
}

}  // namespace tsmhpo
