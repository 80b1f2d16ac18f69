#pragma once

// Pipeline stages behind the pkwbench subcommands. Each stage reads its
// inputs from the workspace and writes write-once artifacts with sidecars.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pkw/dataset.hpp"
#include "pkw/surrogates.hpp"
#include "workspace.hpp"

namespace pkw::cli {

struct StageContext {
  const Workspace& ws;
  unsigned jobs = 1;
  std::ostream& log;
};

struct SampleOptions {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  // name=lo:hi overrides; lengths in mm, R_B_i dimensionless.
  std::vector<std::string> bounds;
};

struct MeshOptions {
  int x_segments = 8;
};

struct CloudOptions {
  std::size_t points = 100'000;
  std::uint64_t seed = 0;
};

struct LabelOptions {
  std::string oracle = "synthetic";  // "synthetic" or "csv=<path>"
  double sigma = 0.005;
  std::vector<double> schedule_lps;  // empty: the 19-point default schedule
  std::uint64_t seed = 0;
};

struct SplitOptions {
  std::string policy = "id";  // id | ood-geom:<bin> | ood-head:<bin> | fraction:<f>
  std::uint64_t seed = 0;
};

struct TrainOptions {
  std::string model = "forest";  // tree | forest | gbm | pointnet
  std::string split = "id";
  std::uint64_t seed = 0;
  std::size_t trees = 0;       // 0: model default (forest 100, gbm 300)
  int depth = -1;              // tree: unlimited; gbm: 3 when negative
  double learning_rate = 0.05;
  std::size_t points = 5'000;  // per cloud for pointnet
  std::size_t epochs = 500;
};

struct EvalOptions {
  std::string model = "forest";
  std::string split = "id";
  std::string partition = "test";
  bool paper_scale = false;
  std::size_t points = 5'000;  // per cloud for pointnet
};

struct BenchOptions {
  std::size_t n = 200;
  std::uint64_t seed = 0;
  std::string oracle = "synthetic";
  double sigma = 0.005;
  std::vector<std::string> models = {"tree", "forest", "gbm"};
  bool paper_scale = false;
  std::size_t points = 5'000;
  std::size_t epochs = 500;
};

void run_sample(const StageContext& ctx, const SampleOptions& opt);
void run_mesh(const StageContext& ctx, const MeshOptions& opt);
void run_cloud(const StageContext& ctx, const CloudOptions& opt);
void run_label(const StageContext& ctx, const LabelOptions& opt);
void run_split(const StageContext& ctx, const SplitOptions& opt);
void run_train(const StageContext& ctx, const TrainOptions& opt);
std::vector<MetricRow> run_eval(const StageContext& ctx, const EvalOptions& opt);
std::vector<MetricRow> run_bench(const StageContext& ctx, const BenchOptions& opt);

// The splits evaluated by `bench`, in report order.
std::vector<std::string> bench_policies();

// Loads params/manifest.jsonl plus labels/labels.csv when present.
DatasetManifest load_dataset(const Workspace& ws);

}  // namespace pkw::cli
