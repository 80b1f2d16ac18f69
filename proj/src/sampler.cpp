#include "pkw/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "pkw/error.hpp"
#include "pkw/parallel.hpp"
#include "pkw/rng.hpp"
#include "pkw/solidmesh.hpp"

namespace pkw {

namespace {

using Index5 = std::array<long long, kVariableCount>;

double width_upper(const DesignSpace& space, double wall_thickness) {
  const auto& box = space[Variable::InletWidthUp];
  if (!space.width_bound_follows_thickness) return box.upper;
  return space.fixed.unit_width() - 2.0 * wall_thickness - 0.03 * space.fixed.height;
}

long long max_steps(double lower, double upper, double step) {
  if (upper < lower) return -1;
  return static_cast<long long>(std::floor((upper - lower) / step + 1e-9));
}

double snap(double value, double lower, double upper, double step, long long* index) {
  const long long top = max_steps(lower, upper, step);
  long long k = std::llround((value - lower) / step);
  k = std::clamp<long long>(k, 0, std::max<long long>(top, 0));
  if (index) *index = k;
  return lower + static_cast<double>(k) * step;
}

void check_space(const DesignSpace& space) {
  for (const auto& v : space.variables) {
    if (!(v.step > 0.0)) throw Error(ErrorCode::InvalidArgument, "step of " + v.name + " must be > 0");
    if (v.upper < v.lower) {
      throw Error(ErrorCode::InfeasibleSpace, "empty range for " + v.name);
    }
  }
}

}  // namespace

DesignSpace DesignSpace::paper_default(const PkwFixed& fixed) {
  const double p = fixed.height;
  const double width_max = fixed.unit_width() - 2.0 * 0.015 * p - 0.03 * p;
  DesignSpace s;
  s.fixed = fixed;
  s.variables = {VariableRange{"B_b", 0.33 * p, 1.67 * p, 0.005},
                 VariableRange{"R_B_i", 0.25, 1.0, 0.05},
                 VariableRange{"T_s", 0.015 * p, 0.18 * p, 0.005},
                 VariableRange{"W_i_u", 0.03 * p, width_max, 0.005},
                 VariableRange{"W_i_d", 0.03 * p, width_max, 0.005}};
  return s;
}

DesignSpace DesignSpace::screening_grid(const PkwFixed& fixed) {
  DesignSpace s = paper_default(fixed);
  s[Variable::BaseLength].step = 0.05;
  s[Variable::OverhangRatio].step = 0.25;
  s[Variable::WallThickness].step = 0.0125;
  s[Variable::InletWidthUp].step = 0.025;
  s[Variable::InletWidthDown].step = 0.025;
  s.width_bound_follows_thickness = true;
  return s;
}

std::array<double, kVariableCount> to_array(const PkwSample& s) {
  return {s.base_length, s.inlet_overhang_ratio, s.wall_thickness, s.inlet_width_up,
          s.inlet_width_down};
}

PkwSample from_array(const DesignSpace& space, const std::array<double, kVariableCount>& v) {
  PkwSample s;
  s.base_length = v[0];
  s.inlet_overhang_ratio = v[1];
  s.outlet_overhang_ratio = space.outlet_overhang_ratio.value_or(v[1]);
  s.wall_thickness = v[2];
  s.inlet_width_up = v[3];
  s.inlet_width_down = v[4];
  return s;
}

bool is_admissible(const PkwFixed& fixed, const PkwSample& sample) {
  if (!validate(fixed, sample).feasible) return false;
  return plan_is_meshable(derive(fixed, sample));
}

std::vector<PkwSample> lhs_raw(const DesignSpace& space, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "lhs_raw needs n >= 1");
  Rng rng(seed);
  std::vector<std::array<double, kVariableCount>> values(n);
  std::vector<std::size_t> bins(n);
  for (std::size_t v = 0; v < kVariableCount; ++v) {
    const auto& range = space.variables[v];
    std::iota(bins.begin(), bins.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(bins));
    const double span = range.upper - range.lower;
    for (std::size_t i = 0; i < n; ++i) {
      const double u = rng.uniform();
      values[i][v] = range.lower + (static_cast<double>(bins[i]) + u) / static_cast<double>(n) * span;
    }
  }
  std::vector<PkwSample> out;
  out.reserve(n);
  for (const auto& v : values) out.push_back(from_array(space, v));
  return out;
}

PkwSample discretize(const PkwSample& sample, const DesignSpace& space) {
  auto v = to_array(sample);
  for (std::size_t i = 0; i < kVariableCount; ++i) {
    const auto& r = space.variables[i];
    double upper = r.upper;
    if (i >= static_cast<std::size_t>(Variable::InletWidthUp)) upper = width_upper(space, v[2]);
    v[i] = snap(v[i], r.lower, upper, r.step, nullptr);
  }
  PkwSample out = from_array(space, v);
  if (!space.outlet_overhang_ratio) out.outlet_overhang_ratio = out.inlet_overhang_ratio;
  return out;
}

namespace {

Index5 grid_index(const PkwSample& s, const DesignSpace& space) {
  const auto v = to_array(s);
  Index5 idx{};
  for (std::size_t i = 0; i < kVariableCount; ++i) {
    idx[i] = std::llround((v[i] - space.variables[i].lower) / space.variables[i].step);
  }
  return idx;
}

}  // namespace

SampleBatch generate_batch(const DesignSpace& space, std::size_t n_target, std::uint64_t seed,
                           const BatchOptions& options) {
  if (n_target == 0) throw Error(ErrorCode::InvalidArgument, "generate_batch needs n_target >= 1");
  check_space(space);

  SampleBatch batch;
  batch.seed = seed;
  batch.requested = n_target;
  std::set<Index5> seen;
  std::size_t round_size = 2 * n_target;

  for (std::size_t round = 0; round < options.max_rounds && batch.samples.size() < n_target;
       ++round) {
    ++batch.rounds;
    const std::size_t size = std::min(round_size, options.max_round_size);
    auto candidates = lhs_raw(space, size, derive_seed(seed, round));
    for (auto& c : candidates) c = discretize(c, space);

    std::vector<char> ok(candidates.size(), 0);
    parallel_for(candidates.size(), options.jobs, [&](std::size_t i) {
      ok[i] = options.admissible(space.fixed, candidates[i]) ? 1 : 0;
    });

    for (std::size_t i = 0; i < candidates.size() && batch.samples.size() < n_target; ++i) {
      if (!ok[i]) {
        ++batch.rejected_count;
        continue;
      }
      if (!seen.insert(grid_index(candidates[i], space)).second) {
        ++batch.duplicate_count;
        continue;
      }
      batch.samples.push_back(candidates[i]);
    }
    round_size *= 2;
  }

  if (batch.samples.size() < n_target) {
    throw Error(ErrorCode::InfeasibleSpace,
                "only " + std::to_string(batch.samples.size()) + " of " +
                    std::to_string(n_target) + " feasible samples after " +
                    std::to_string(batch.rounds) + " rounds");
  }
  return batch;
}

std::vector<double> grid_values(double lower, double upper, double step) {
  std::vector<double> out;
  const long long top = max_steps(lower, upper, step);
  for (long long k = 0; k <= top; ++k) out.push_back(lower + static_cast<double>(k) * step);
  return out;
}

GridStats enumerate_grid(const DesignSpace& space,
                         const std::function<void(const PkwSample&)>& emit,
                         const AdmissibilityFn& admissible, std::size_t cap) {
  for (const auto& v : space.variables) {
    if (!(v.step > 0.0)) throw Error(ErrorCode::InvalidArgument, "step of " + v.name + " must be > 0");
  }
  const auto& vb = space[Variable::BaseLength];
  const auto& vr = space[Variable::OverhangRatio];
  const auto& vt = space[Variable::WallThickness];
  const auto& vu = space[Variable::InletWidthUp];
  const auto& vd = space[Variable::InletWidthDown];

  const auto bases = grid_values(vb.lower, vb.upper, vb.step);
  const auto ratios = grid_values(vr.lower, vr.upper, vr.step);
  const auto walls = grid_values(vt.lower, vt.upper, vt.step);

  std::vector<std::vector<double>> ups, downs;
  std::size_t total = 0;
  for (double t : walls) {
    ups.push_back(grid_values(vu.lower, space.width_bound_follows_thickness ? width_upper(space, t) : vu.upper, vu.step));
    downs.push_back(grid_values(vd.lower, space.width_bound_follows_thickness ? width_upper(space, t) : vd.upper, vd.step));
    total += ups.back().size() * downs.back().size();
  }
  total *= bases.size() * ratios.size();
  if (total > cap) {
    throw Error(ErrorCode::GridTooLarge,
                std::to_string(total) + " candidates exceed cap " + std::to_string(cap));
  }

  GridStats stats;
  stats.candidates = total;
  for (double b : bases) {
    for (double r : ratios) {
      for (std::size_t it = 0; it < walls.size(); ++it) {
        for (double wu : ups[it]) {
          for (double wd : downs[it]) {
            const PkwSample s = from_array(space, {b, r, walls[it], wu, wd});
            if (!admissible(space.fixed, s)) continue;
            ++stats.feasible;
            emit(s);
          }
        }
      }
    }
  }
  return stats;
}

}  // namespace pkw
