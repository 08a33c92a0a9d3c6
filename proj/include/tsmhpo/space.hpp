#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tsmhpo/rng.hpp"

namespace tsmhpo {

struct ValueOffGrid : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct IndexOutOfGrid : std::out_of_range {
  using std::out_of_range::out_of_range;
};

// =========================================================================
// Hyperparameter definitions
// =========================================================================

/// One gridded hyperparameter: legal values are lower + k*step for
/// k in [0, grid_count). The threshold splits the grid into a lower and an
/// upper sub-range and must itself be a grid point above `lower`.
///
/// All arithmetic on values goes through grid indices; real values are
/// materialised only at evaluation and reporting time, so fractional steps
/// (e.g. a 1e-4 learning-rate grid) never accumulate float drift.
struct HyperparameterDef {
  std::string name;
  double lower = 0.0;
  double upper = 0.0;
  double step = 1.0;
  double threshold = 0.0;
  int bit_width = 0;  // 0 = use minimal width

  int grid_count() const {
    return 1 + static_cast<int>(std::llround((upper - lower) / step));
  }

  static int minimal_bit_width(int grid_count) {
    int w = 1;
    while ((1ll << w) < grid_count) ++w;
    return w;
  }

  int effective_bit_width() const {
    return bit_width > 0 ? bit_width : minimal_bit_width(grid_count());
  }

  double value_at(int index) const { return lower + index * step; }

  /// Grid index of the threshold; left child covers [0, k), right [k, n).
  int threshold_index() const {
    return static_cast<int>(std::llround((threshold - lower) / step));
  }

  /// Snaps a real value to its grid index; tolerance 1e-9 * step.
  int index_of(double value) const {
    const double raw = (value - lower) / step;
    const long long k = std::llround(raw);
    if (k < 0 || k >= grid_count() ||
        std::fabs(value - value_at(static_cast<int>(k))) > 1e-9 * step) {
      throw ValueOffGrid("value " + std::to_string(value) +
                         " is not on the grid of '" + name + "'");
    }
    return static_cast<int>(k);
  }

  void validate() const {
    auto fail = [&](const std::string& why) {
      throw std::invalid_argument("hyperparameter '" + name + "': " + why);
    };
    if (name.empty()) fail("name must be nonempty");
    if (!(step > 0.0)) fail("step must be positive");
    if (!(upper > lower)) fail("upper must exceed lower");
    const double span = (upper - lower) / step;
    const long long k_max = std::llround(span);
    if (k_max < 1 || std::fabs(span - static_cast<double>(k_max)) > 1e-9)
      fail("range is not an integer multiple of step");
    if (k_max >= (1ll << 30)) fail("grid too fine (more than 2^30 points)");
    if (!(threshold > lower) || !(threshold <= upper))
      fail("threshold must lie in (lower, upper]");
    const double traw = (threshold - lower) / step;
    const long long kt = std::llround(traw);
    if (kt < 1 || std::fabs(threshold - (lower + kt * step)) > 1e-9 * step)
      fail("threshold is not on the grid");
    if (bit_width != 0) {
      if (bit_width < minimal_bit_width(grid_count()))
        fail("bit_width too small for grid");
      if (bit_width > 30) fail("bit_width above 30 is not supported");
    }
  }
};

/// Ordered collection of dimensions; the order fixes both the genotype bit
/// layout and the depth order of the space tree.
struct SearchSpace {
  std::vector<HyperparameterDef> dims;

  int dim_count() const { return static_cast<int>(dims.size()); }

  int bit_length() const {
    int total = 0;
    for (const auto& d : dims) total += d.effective_bit_width();
    return total;
  }

  /// Product of per-dimension grid counts, saturating at uint64 max.
  std::uint64_t total_grid_points() const {
    std::uint64_t total = 1;
    for (const auto& d : dims) {
      const std::uint64_t n = static_cast<std::uint64_t>(d.grid_count());
      if (total > std::numeric_limits<std::uint64_t>::max() / n)
        return std::numeric_limits<std::uint64_t>::max();
      total *= n;
    }
    return total;
  }

  void validate() const {
    if (dims.empty())
      throw std::invalid_argument("search space needs at least one dimension");
    for (const auto& d : dims) d.validate();
    for (std::size_t i = 0; i < dims.size(); ++i)
      for (std::size_t j = i + 1; j < dims.size(); ++j)
        if (dims[i].name == dims[j].name)
          throw std::invalid_argument("duplicate dimension name '" +
                                      dims[i].name + "'");
  }
};

// =========================================================================
// Binary codec
// =========================================================================

inline int grid_count(const HyperparameterDef& def) { return def.grid_count(); }

/// Big-endian encoding of a grid index, left-padded to the codec width.
inline std::string encode_index(const HyperparameterDef& def, int index) {
  const int width = def.effective_bit_width();
  std::string bits(width, '0');
  for (int b = 0; b < width; ++b)
    if (index & (1 << (width - 1 - b))) bits[b] = '1';
  return bits;
}

/// Encodes a real value on the grid; throws ValueOffGrid otherwise.
inline std::string encode(const HyperparameterDef& def, double value) {
  return encode_index(def, def.index_of(value));
}

/// Integer value of a big-endian bit fragment (no grid check).
inline long long raw_bits_value(std::string_view bits) {
  long long v = 0;
  for (char c : bits) v = (v << 1) | (c == '1' ? 1 : 0);
  return v;
}

/// Decodes a fragment to a real value; throws IndexOutOfGrid when the code
/// points past the grid (possible whenever 2^bit_width > grid_count).
inline double decode(const HyperparameterDef& def, std::string_view bits) {
  if (static_cast<int>(bits.size()) != def.effective_bit_width())
    throw std::invalid_argument("bit fragment has wrong width for '" +
                                def.name + "'");
  const long long index = raw_bits_value(bits);
  if (index >= def.grid_count())
    throw IndexOutOfGrid("code " + std::string(bits) + " addresses index " +
                         std::to_string(index) + " beyond the " +
                         std::to_string(def.grid_count()) + "-point grid of '" +
                         def.name + "'");
  return def.value_at(static_cast<int>(index));
}

/// Repair rule for out-of-grid codes: clamp to the last grid point. Keeps
/// crossover and bit-flip mutation closed over valid genotypes.
inline int decode_index_clamped(const HyperparameterDef& def,
                                std::string_view bits) {
  const long long index = raw_bits_value(bits);
  const long long last = def.grid_count() - 1;
  return static_cast<int>(index > last ? last : index);
}

// =========================================================================
// Genotype
// =========================================================================

/// A point of the grid in both representations. `bits` is always the
/// canonical per-dimension encoding of `indices`, concatenated in dimension
/// order; construction goes through the factories below to keep them in sync.
struct Genotype {
  std::vector<int> indices;
  std::string bits;

  bool operator==(const Genotype& other) const { return bits == other.bits; }
};

inline Genotype genotype_from_indices(const SearchSpace& space,
                                      std::vector<int> indices) {
  if (static_cast<int>(indices.size()) != space.dim_count())
    throw std::invalid_argument("index vector has wrong dimension");
  Genotype g;
  g.bits.reserve(space.bit_length());
  for (int d = 0; d < space.dim_count(); ++d) {
    const auto& def = space.dims[d];
    if (indices[d] < 0 || indices[d] >= def.grid_count())
      throw IndexOutOfGrid("index " + std::to_string(indices[d]) +
                           " out of grid for '" + def.name + "'");
    g.bits += encode_index(def, indices[d]);
  }
  g.indices = std::move(indices);
  return g;
}

/// Builds a genotype from a raw bitstring, clamping any out-of-grid
/// fragment; the stored bits are re-canonicalised after repair.
inline Genotype genotype_from_bits(const SearchSpace& space,
                                   std::string_view bits) {
  if (static_cast<int>(bits.size()) != space.bit_length())
    throw std::invalid_argument("bitstring has wrong length for this space");
  std::vector<int> indices(space.dim_count());
  std::size_t offset = 0;
  for (int d = 0; d < space.dim_count(); ++d) {
    const auto& def = space.dims[d];
    const std::size_t width =
        static_cast<std::size_t>(def.effective_bit_width());
    indices[d] = decode_index_clamped(def, bits.substr(offset, width));
    offset += width;
  }
  return genotype_from_indices(space, std::move(indices));
}

inline Genotype random_genotype(const SearchSpace& space, Rng& rng) {
  std::vector<int> indices(space.dim_count());
  for (int d = 0; d < space.dim_count(); ++d)
    indices[d] = rng.next_int(0, space.dims[d].grid_count() - 1);
  return genotype_from_indices(space, std::move(indices));
}

inline std::vector<double> decoded_values(const SearchSpace& space,
                                          const Genotype& g) {
  std::vector<double> values(space.dim_count());
  for (int d = 0; d < space.dim_count(); ++d)
    values[d] = space.dims[d].value_at(g.indices[d]);
  return values;
}

// =========================================================================
// Subspace geometry
// =========================================================================

struct ValueRange {
  double low = 0.0;
  double high = 0.0;
};

struct IndexRange {
  int low = 0;
  int high = 0;  // inclusive

  int count() const { return high - low + 1; }
};

/// Grid-index sub-range selected by one threshold decision. Bit 0 covers
/// indices [0, k), bit 1 covers [k, grid_count) where k is the threshold
/// index; the threshold invariant keeps both sides nonempty.
inline IndexRange subspace_index_range(const HyperparameterDef& def, int bit) {
  const int k = def.threshold_index();
  if (bit == 0) return {0, k - 1};
  return {k, def.grid_count() - 1};
}

/// Per-dimension value ranges of the subspace addressed by `path`. The left
/// side ends at the largest grid point strictly below the threshold.
inline std::vector<ValueRange> subspace_ranges(
    const SearchSpace& space, const std::vector<std::uint8_t>& path) {
  if (static_cast<int>(path.size()) != space.dim_count())
    throw std::invalid_argument("path length must equal dimension count");
  std::vector<ValueRange> ranges(space.dim_count());
  for (int d = 0; d < space.dim_count(); ++d) {
    const auto& def = space.dims[d];
    const IndexRange r = subspace_index_range(def, path[d]);
    ranges[d] = {def.value_at(r.low), def.value_at(r.high)};
  }
  return ranges;
}

}  // namespace tsmhpo
