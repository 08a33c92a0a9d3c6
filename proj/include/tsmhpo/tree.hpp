#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tsmhpo/rng.hpp"
#include "tsmhpo/space.hpp"

namespace tsmhpo {

// =========================================================================
// Pathways
// =========================================================================

/// Root-to-leaf bit sequence locating a genotype's subspace: one threshold
/// decision per dimension, in dimension order. Bit d is 0 iff the value in
/// dimension d lies strictly below that dimension's threshold.
struct PathKey {
  std::vector<std::uint8_t> bits;

  int depth() const { return static_cast<int>(bits.size()); }

  /// Leaf index = big-endian integer value of the path bits.
  int leaf_index() const {
    int leaf = 0;
    for (std::uint8_t b : bits) leaf = (leaf << 1) | b;
    return leaf;
  }

  /// Integer value of the first `length` bits, used to key internal nodes.
  int prefix_value(int length) const {
    int v = 0;
    for (int i = 0; i < length; ++i) v = (v << 1) | bits[i];
    return v;
  }

  bool operator==(const PathKey& other) const { return bits == other.bits; }
};

inline PathKey path_from_leaf(int depth, int leaf) {
  PathKey p;
  p.bits.resize(depth);
  for (int d = 0; d < depth; ++d)
    p.bits[d] = static_cast<std::uint8_t>((leaf >> (depth - 1 - d)) & 1);
  return p;
}

inline PathKey pathway(const SearchSpace& space, const Genotype& g) {
  PathKey p;
  p.bits.resize(space.dim_count());
  for (int d = 0; d < space.dim_count(); ++d)
    p.bits[d] =
        g.indices[d] < space.dims[d].threshold_index() ? 0 : 1;
  return p;
}

// =========================================================================
// Space tree
// =========================================================================

/// Binary trie over the threshold decisions. Internal node (depth d, prefix)
/// counts mutations applied to dimension d among individuals whose pathway
/// starts with that prefix; leaf c counts full evaluations of settings in
/// subspace c. Absent internal entries read as zero (lazy trie).
///
/// Counter histories feed the two reciprocal-weight distributions below,
/// which discourage re-exploring dimensions and subspaces that have already
/// been visited often. f(t) = 1/(1 + t): the +1 keeps the weight finite at
/// the universal initial state t = 0 while preserving the reciprocal shape.
class SpaceTree {
 public:
  explicit SpaceTree(int depth) : depth_(depth) {
    if (depth < 1 || depth > 24)
      throw std::invalid_argument("tree depth must be in [1, 24]");
    leaf_counts_.assign(std::size_t{1} << depth, 0);
  }

  int depth() const { return depth_; }
  int leaf_count() const { return static_cast<int>(leaf_counts_.size()); }

  std::uint64_t leaf_visits(int leaf) const { return leaf_counts_.at(leaf); }
  const std::vector<std::uint64_t>& leaf_visit_counts() const {
    return leaf_counts_;
  }

  /// Mutation count of the internal node at 1-based depth `dim_depth` whose
  /// region is the given path prefix value.
  std::uint64_t mutation_count(int dim_depth, int prefix) const {
    const auto it = internal_counts_.find({dim_depth, prefix});
    return it == internal_counts_.end() ? 0 : it->second;
  }

  const std::map<std::pair<int, int>, std::uint64_t>& internal_counts() const {
    return internal_counts_;
  }

  void record_evaluation(const PathKey& p) {
    check_path(p);
    ++leaf_counts_[p.leaf_index()];
  }

  /// Bulk counter restoration (snapshot loading); counters only ever grow.
  void add_leaf_visits(int leaf, std::uint64_t n) {
    leaf_counts_.at(leaf) += n;
  }

  void add_mutations(int dim_depth, int prefix, std::uint64_t n) {
    if (dim_depth < 1 || dim_depth > depth_)
      throw std::out_of_range("mutation depth out of range");
    if (n > 0) internal_counts_[{dim_depth, prefix}] += n;
  }

  /// Records one mutation of dimension `dim` (0-based) on an individual
  /// whose pathway is `p`; only the depth-(dim+1) node along p is touched.
  void record_mutation(const PathKey& p, int dim) {
    check_path(p);
    if (dim < 0 || dim >= depth_)
      throw std::out_of_range("mutation dimension out of range");
    ++internal_counts_[{dim + 1, p.prefix_value(dim + 1)}];
  }

  /// P(i) = f(t_i) / sum_j f(t_j) over the internal nodes along pathway p,
  /// f(t) = 1/(1 + t). Every entry is strictly positive and the vector sums
  /// to one up to rounding.
  std::vector<double> dimension_probabilities(const PathKey& p) const {
    check_path(p);
    std::vector<double> weights(depth_);
    double total = 0.0;
    for (int d = 0; d < depth_; ++d) {
      weights[d] = reciprocal_weight(mutation_count(d + 1, p.prefix_value(d + 1)));
      total += weights[d];
    }
    for (double& w : weights) w /= total;
    return weights;
  }

  /// Same reciprocal scheme over the leaf visit counters: heavily visited
  /// subspaces get proportionally less probability.
  std::vector<double> subspace_probabilities() const {
    std::vector<double> weights(leaf_counts_.size());
    double total = 0.0;
    for (std::size_t c = 0; c < leaf_counts_.size(); ++c) {
      weights[c] = reciprocal_weight(leaf_counts_[c]);
      total += weights[c];
    }
    for (double& w : weights) w /= total;
    return weights;
  }

  std::uint64_t total_leaf_visits() const {
    std::uint64_t total = 0;
    for (std::uint64_t c : leaf_counts_) total += c;
    return total;
  }

  std::uint64_t total_mutations() const {
    std::uint64_t total = 0;
    for (const auto& [key, count] : internal_counts_) total += count;
    return total;
  }

  static double reciprocal_weight(std::uint64_t t) {
    return 1.0 / (1.0 + static_cast<double>(t));
  }

 private:
  void check_path(const PathKey& p) const {
    if (p.depth() != depth_)
      throw std::invalid_argument("path depth does not match tree depth");
  }

  int depth_;
  std::vector<std::uint64_t> leaf_counts_;
  std::map<std::pair<int, int>, std::uint64_t> internal_counts_;
};

// =========================================================================
// Snapshots
// =========================================================================

struct TreeInternalCount {
  int depth = 0;       // 1-based dimension depth
  std::string prefix;  // path prefix bits, length == depth
  std::uint64_t count = 0;
};

/// Serialisable counter state: leaf visits as a flat array indexed by leaf
/// integer plus the sparse internal mutation counts.
struct TreeSnapshot {
  std::vector<std::uint64_t> leaf_counts;
  std::vector<TreeInternalCount> internal_counts;
};

inline TreeSnapshot snapshot_tree(const SpaceTree& tree) {
  TreeSnapshot snap;
  snap.leaf_counts = tree.leaf_visit_counts();
  for (const auto& [key, count] : tree.internal_counts()) {
    const auto& [depth, prefix_value] = key;
    std::string prefix(depth, '0');
    for (int i = 0; i < depth; ++i)
      if (prefix_value & (1 << (depth - 1 - i))) prefix[i] = '1';
    snap.internal_counts.push_back({depth, prefix, count});
  }
  return snap;
}

inline SpaceTree restore_tree(const TreeSnapshot& snap) {
  int depth = 0;
  while ((std::size_t{1} << depth) < snap.leaf_counts.size()) ++depth;
  if ((std::size_t{1} << depth) != snap.leaf_counts.size())
    throw std::invalid_argument("leaf count array must have 2^depth entries");
  SpaceTree tree(depth);
  for (std::size_t leaf = 0; leaf < snap.leaf_counts.size(); ++leaf)
    tree.add_leaf_visits(static_cast<int>(leaf), snap.leaf_counts[leaf]);
  for (const auto& entry : snap.internal_counts) {
    if (entry.depth < 1 || entry.depth > depth ||
        static_cast<int>(entry.prefix.size()) != entry.depth)
      throw std::invalid_argument("malformed internal counter entry");
    int prefix_value = 0;
    for (char c : entry.prefix)
      prefix_value = (prefix_value << 1) | (c == '1' ? 1 : 0);
    tree.add_mutations(entry.depth, prefix_value, entry.count);
  }
  return tree;
}

// =========================================================================
// Roulette wheel
// =========================================================================

struct DegenerateWeights : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// One uniform draw against the cumulative weights; a draw landing exactly
/// on a boundary resolves to the lower index. Weights need not be
/// normalised but must be nonnegative with a positive sum.
inline int roulette_select(const std::vector<double>& weights, Rng& rng) {
  if (weights.empty()) throw DegenerateWeights("empty weight vector");
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw DegenerateWeights("negative weight");
    total += w;
  }
  if (!(total > 0.0)) throw DegenerateWeights("weights sum to zero");
  const double u = rng.next_unit() * total;
  double cumulative = 0.0;
  int last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] > 0.0) last_positive = static_cast<int>(i);
    cumulative += weights[i];
    if (weights[i] > 0.0 && u <= cumulative) return static_cast<int>(i);
  }
  return last_positive;  // float round-off pushed u past the last boundary
}

// =========================================================================
// Tree-structured mutation
// =========================================================================

/// Mutation guided by a given individual: identify its pathway, pick the
/// dimension by roulette over the reciprocal mutation counters along that
/// pathway, then redraw that dimension uniformly inside the subspace's
/// sub-range at grid resolution. The redraw keeps the individual's path bit
/// for the mutated dimension, so the result stays in the same subspace; the
/// tree counter is updated with the post-mutation pathway.
inline Genotype tsm_mutate_individual(SpaceTree& tree, const SearchSpace& space,
                                      const Genotype& g, Rng& rng) {
  if (tree.depth() != space.dim_count())
    throw std::invalid_argument("tree depth does not match search space");
  const PathKey p = pathway(space, g);
  const std::vector<double> probs = tree.dimension_probabilities(p);
  const int dim = roulette_select(probs, rng);

  const IndexRange range = subspace_index_range(space.dims[dim], p.bits[dim]);
  std::vector<int> indices = g.indices;
  indices[dim] = rng.next_int(range.low, range.high);
  Genotype mutated = genotype_from_indices(space, std::move(indices));

  tree.record_mutation(pathway(space, mutated), dim);
  return mutated;
}

/// Mutation without a given individual: pick a whole subspace by roulette
/// over the reciprocal leaf counters, then draw every dimension uniformly
/// at grid resolution inside that subspace.
inline Genotype tsm_sample_individual(const SpaceTree& tree,
                                      const SearchSpace& space, Rng& rng) {
  if (tree.depth() != space.dim_count())
    throw std::invalid_argument("tree depth does not match search space");
  const std::vector<double> probs = tree.subspace_probabilities();
  const int leaf = roulette_select(probs, rng);
  const PathKey p = path_from_leaf(tree.depth(), leaf);

  std::vector<int> indices(space.dim_count());
  for (int d = 0; d < space.dim_count(); ++d) {
    const IndexRange range = subspace_index_range(space.dims[d], p.bits[d]);
    indices[d] = rng.next_int(range.low, range.high);
  }
  return genotype_from_indices(space, std::move(indices));
}

}  // namespace tsmhpo
