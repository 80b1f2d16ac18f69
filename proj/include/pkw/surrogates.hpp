#pragma once

// Regression metrics and tree-based surrogates on tabular features.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pkw/matrix.hpp"

namespace pkw {

// Metrics -------------------------------------------------------------------

struct MetricReport {
  std::size_t n = 0;
  double mse = 0.0;
  double mae = 0.0;
  double max_ae = 0.0;
  std::optional<double> r2;  // undefined for constant targets

  // Presentation scaling: MSE x1e5, R2 x1e2, MAE x1e3, MaxAE x10.
  MetricReport paper_scaled() const;
};

// Throws ShapeMismatch for unequal lengths and EmptyData for empty input.
MetricReport metrics(std::span<const double> y, std::span<const double> y_hat);

struct MetricRow {
  std::string split;
  std::string model;
  MetricReport report;
};

// split,model,n,MSE,R2,MAE,MaxAE; with paper_scale the values are scaled and
// the headers carry the factor (MSE_x1e5, ...). Undefined R2 is written empty.
void write_metric_csv(std::ostream& out, const std::vector<MetricRow>& rows, bool paper_scale);

// Trees ---------------------------------------------------------------------

struct TreeParams {
  int max_depth = -1;  // negative: unlimited
  std::size_t min_samples_leaf = 1;
  std::size_t min_samples_split = 2;
  std::size_t max_features = 0;  // features tried per split; 0 means all
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // go left when x[feature] <= threshold
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;         // mean target of the training rows at the node
};

class RegressionTree {
 public:
  TreeParams params;
  std::size_t n_features = 0;
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> x) const;
  std::vector<double> predict(const Matrix& x) const;
  int depth() const;
  std::size_t leaf_count() const;
};

// Greedy CART: at every node all features (or a seeded subset of
// max_features) and all midpoints between consecutive distinct values are
// scored by the summed squared error of the children. Only strict
// improvements replace the incumbent, which breaks ties toward the lowest
// feature index and then the lowest threshold.
RegressionTree fit_tree(const Matrix& x, std::span<const double> y, const TreeParams& params,
                        std::uint64_t seed = 0);

struct ForestParams {
  std::size_t n_trees = 100;
  bool bootstrap = true;
  std::size_t max_features = 0;  // 0 means ceil(d / 3)
  TreeParams tree;
  unsigned jobs = 1;
};

class ForestModel {
 public:
  std::vector<RegressionTree> trees;

  double predict(std::span<const double> x) const;
  std::vector<double> predict(const Matrix& x) const;
};

// Tree t is grown from seed derive_seed(seed, t), so the result does not
// depend on the job count.
ForestModel fit_forest(const Matrix& x, std::span<const double> y, const ForestParams& params,
                       std::uint64_t seed);

struct GbmParams {
  std::size_t n_stages = 300;
  int max_depth = 3;
  double learning_rate = 0.05;
  std::size_t min_samples_leaf = 1;
};

class BoostedModel {
 public:
  double initial = 0.0;
  double learning_rate = 0.05;
  std::vector<RegressionTree> trees;
  std::vector<double> train_mse;  // after each stage, first entry is stage 0

  double predict(std::span<const double> x) const;
  std::vector<double> predict(const Matrix& x) const;
};

BoostedModel fit_gbm(const Matrix& x, std::span<const double> y, const GbmParams& params);

// Analysis ------------------------------------------------------------------

using BatchPredictor = std::function<std::vector<double>(const Matrix&)>;

// Mean MSE increase after shuffling one column, over `repeats` seeded
// shuffles per feature.
std::vector<double> permutation_importance(const BatchPredictor& predict, const Matrix& x,
                                           std::span<const double> y, std::uint64_t seed,
                                           std::size_t repeats = 10);

struct TimingSummary {
  std::size_t calls = 0;
  double median_ms = 0.0;
  double p90_ms = 0.0;
};

// Times fn(i) for i in [0, calls) individually.
TimingSummary time_calls(std::size_t calls, const std::function<void(std::size_t)>& fn);

}  // namespace pkw
