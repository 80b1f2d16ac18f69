#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pkw/geometry.hpp"

namespace pkw {

struct VariableRange {
  std::string name;
  double lower = 0.0;
  double upper = 0.0;
  double step = 0.0;
};

// Sampled variables, in the fixed order used by every sampler routine.
enum class Variable : std::size_t {
  BaseLength = 0,
  OverhangRatio,
  WallThickness,
  InletWidthUp,
  InletWidthDown,
};
inline constexpr std::size_t kVariableCount = 5;

struct DesignSpace {
  PkwFixed fixed;
  std::array<VariableRange, kVariableCount> variables;
  // Unset: R_B,o follows R_B,i. Set: every sample uses this outlet ratio.
  std::optional<double> outlet_overhang_ratio;
  // When true the inlet-width upper bound is W_u - 2 T_s - 0.03 P evaluated
  // at each sample's own T_s instead of the box value in `variables`.
  bool width_bound_follows_thickness = false;

  const VariableRange& operator[](Variable v) const {
    return variables[static_cast<std::size_t>(v)];
  }
  VariableRange& operator[](Variable v) { return variables[static_cast<std::size_t>(v)]; }

  // Table 5 box with 5 mm / 0.05 discretization. The inlet-width box upper
  // bound uses the thinnest admissible wall.
  static DesignSpace paper_default(const PkwFixed& fixed = {});
  // Coarse cartesian screening grid (50 mm, 0.25, 12.5 mm, 25 mm) with
  // thickness-dependent inlet-width bounds.
  static DesignSpace screening_grid(const PkwFixed& fixed = {});
};

std::array<double, kVariableCount> to_array(const PkwSample& s);
PkwSample from_array(const DesignSpace& space, const std::array<double, kVariableCount>& v);

using AdmissibilityFn = std::function<bool(const PkwFixed&, const PkwSample&)>;

// validate() feasible and the plan is meshable (see plan_is_meshable).
bool is_admissible(const PkwFixed& fixed, const PkwSample& sample);

std::vector<PkwSample> lhs_raw(const DesignSpace& space, std::size_t n, std::uint64_t seed);

PkwSample discretize(const PkwSample& sample, const DesignSpace& space);

struct BatchOptions {
  unsigned jobs = 1;
  AdmissibilityFn admissible = is_admissible;
  std::size_t max_rounds = 20;
  std::size_t max_round_size = std::size_t{1} << 20;
};

struct SampleBatch {
  std::uint64_t seed = 0;
  std::size_t requested = 0;
  std::vector<PkwSample> samples;
  std::size_t rejected_count = 0;
  std::size_t duplicate_count = 0;
  std::size_t rounds = 0;
};

SampleBatch generate_batch(const DesignSpace& space, std::size_t n_target, std::uint64_t seed,
                           const BatchOptions& options = {});

struct GridStats {
  std::size_t candidates = 0;
  std::size_t feasible = 0;
};

inline constexpr std::size_t kDefaultGridCap = 10'000'000;

// Visits every admissible grid point in lexicographic variable order.
GridStats enumerate_grid(const DesignSpace& space,
                         const std::function<void(const PkwSample&)>& emit,
                         const AdmissibilityFn& admissible = is_admissible,
                         std::size_t cap = kDefaultGridCap);

std::vector<double> grid_values(double lower, double upper, double step);

}  // namespace pkw
