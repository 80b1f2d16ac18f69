#include <algorithm>
#include <cmath>
#include <numeric>

#include "pkw/error.hpp"
#include "pkw/parallel.hpp"
#include "pkw/rng.hpp"
#include "pkw/surrogates.hpp"

namespace pkw {

namespace {

void check_inputs(const Matrix& x, std::span<const double> y) {
  if (x.rows == 0 || x.cols == 0) throw Error(ErrorCode::EmptyData, "no training rows");
  if (y.size() != x.rows) {
    throw Error(ErrorCode::ShapeMismatch, std::to_string(x.rows) + " rows vs " +
                                              std::to_string(y.size()) + " targets");
  }
  for (double v : x.data) {
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "non-finite feature value");
  }
  for (double v : y) {
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "non-finite target value");
  }
}

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, std::span<const double> y, const TreeParams& params,
              std::uint64_t seed, RegressionTree& tree)
      : x_(x), y_(y), params_(params), rng_(seed), tree_(tree) {}

  void build(std::vector<std::size_t> rows) {
    rows_ = std::move(rows);
    sorted_.resize(rows_.size());
    grow(0, rows_.size(), 0);
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double sse = 0.0;
  };

  std::int32_t grow(std::size_t begin, std::size_t end, int depth) {
    const std::size_t n = end - begin;
    double mean = 0.0;
    for (std::size_t i = begin; i < end; ++i) mean += y_[rows_[i]];
    mean /= static_cast<double>(n);

    const auto id = static_cast<std::int32_t>(tree_.nodes.size());
    tree_.nodes.push_back(TreeNode{-1, 0.0, -1, -1, mean});

    const bool depth_limited = params_.max_depth >= 0 && depth >= params_.max_depth;
    bool constant = true;
    for (std::size_t i = begin + 1; i < end && constant; ++i) {
      constant = y_[rows_[i]] == y_[rows_[begin]];
    }
    if (depth_limited || constant || n < params_.min_samples_split ||
        n < 2 * std::max<std::size_t>(params_.min_samples_leaf, 1)) {
      return id;
    }

    double node_sse = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const double d = y_[rows_[i]] - mean;
      node_sse += d * d;
    }
    const Split best = best_split(begin, end, mean, node_sse);
    if (best.feature < 0) return id;

    const auto mid = std::stable_partition(
        rows_.begin() + static_cast<std::ptrdiff_t>(begin), rows_.begin() + static_cast<std::ptrdiff_t>(end),
        [&](std::size_t r) { return x_(r, static_cast<std::size_t>(best.feature)) <= best.threshold; });
    const auto split_at = static_cast<std::size_t>(mid - rows_.begin());

    const std::int32_t left = grow(begin, split_at, depth + 1);
    const std::int32_t right = grow(split_at, end, depth + 1);
    TreeNode& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = left;
    node.right = right;
    return id;
  }

  std::vector<std::size_t> candidate_features() {
    std::vector<std::size_t> features(x_.cols);
    std::iota(features.begin(), features.end(), std::size_t{0});
    const std::size_t k = params_.max_features;
    if (k == 0 || k >= x_.cols) return features;
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng_.index(x_.cols - i));
      std::swap(features[i], features[j]);
    }
    features.resize(k);
    std::sort(features.begin(), features.end());
    return features;
  }

  Split best_split(std::size_t begin, std::size_t end, double mean, double node_sse) {
    const std::size_t n = end - begin;
    const std::size_t min_leaf = std::max<std::size_t>(params_.min_samples_leaf, 1);
    Split best;
    best.sse = node_sse;
    for (std::size_t f : candidate_features()) {
      std::copy(rows_.begin() + static_cast<std::ptrdiff_t>(begin),
                rows_.begin() + static_cast<std::ptrdiff_t>(end), sorted_.begin());
      std::stable_sort(sorted_.begin(), sorted_.begin() + static_cast<std::ptrdiff_t>(n),
                       [&](std::size_t a, std::size_t b) { return x_(a, f) < x_(b, f); });
      double total_sum = 0.0, total_sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = y_[sorted_[i]] - mean;
        total_sum += d;
        total_sq += d * d;
      }
      double left_sum = 0.0, left_sq = 0.0;
      for (std::size_t i = 1; i < n; ++i) {
        const double d = y_[sorted_[i - 1]] - mean;
        left_sum += d;
        left_sq += d * d;
        const double lo = x_(sorted_[i - 1], f), hi = x_(sorted_[i], f);
        if (!(lo < hi) || i < min_leaf || n - i < min_leaf) continue;
        const double nl = static_cast<double>(i), nr = static_cast<double>(n - i);
        const double right_sum = total_sum - left_sum, right_sq = total_sq - left_sq;
        const double sse = (left_sq - left_sum * left_sum / nl) + (right_sq - right_sum * right_sum / nr);
        if (sse < best.sse) {
          double threshold = 0.5 * (lo + hi);
          if (!(threshold < hi)) threshold = lo;
          best = Split{static_cast<int>(f), threshold, sse};
        }
      }
    }
    return best;
  }

  const Matrix& x_;
  std::span<const double> y_;
  TreeParams params_;
  Rng rng_;
  RegressionTree& tree_;
  std::vector<std::size_t> rows_;
  std::vector<std::size_t> sorted_;
};

RegressionTree fit_rows(const Matrix& x, std::span<const double> y, const TreeParams& params,
                        std::uint64_t seed, std::vector<std::size_t> rows) {
  RegressionTree tree;
  tree.params = params;
  tree.n_features = x.cols;
  TreeBuilder(x, y, params, seed, tree).build(std::move(rows));
  return tree;
}

void check_width(std::span<const double> x, std::size_t n_features) {
  if (x.size() != n_features) {
    throw Error(ErrorCode::ShapeMismatch, "expected " + std::to_string(n_features) +
                                              " features, got " + std::to_string(x.size()));
  }
}

template <typename Model>
std::vector<double> predict_rows(const Model& model, const Matrix& x) {
  std::vector<double> out(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) out[i] = model.predict(x.row(i));
  return out;
}

}  // namespace

double RegressionTree::predict(std::span<const double> x) const {
  check_width(x, n_features);
  std::size_t i = 0;
  while (nodes[i].feature >= 0) {
    const TreeNode& node = nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left
                                                                                             : node.right);
  }
  return nodes[i].value;
}

std::vector<double> RegressionTree::predict(const Matrix& x) const { return predict_rows(*this, x); }

int RegressionTree::depth() const {
  std::vector<int> level(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (nodes[i].feature >= 0) {
      level[static_cast<std::size_t>(nodes[i].left)] = level[i] + 1;
      level[static_cast<std::size_t>(nodes[i].right)] = level[i] + 1;
    }
  }
  return deepest;
}

std::size_t RegressionTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.feature < 0; }));
}

RegressionTree fit_tree(const Matrix& x, std::span<const double> y, const TreeParams& params,
                        std::uint64_t seed) {
  check_inputs(x, y);
  std::vector<std::size_t> rows(x.rows);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return fit_rows(x, y, params, seed, std::move(rows));
}

double ForestModel::predict(std::span<const double> x) const {
  if (trees.empty()) throw Error(ErrorCode::EmptyData, "forest has no trees");
  double sum = 0.0;
  for (const auto& t : trees) sum += t.predict(x);
  return sum / static_cast<double>(trees.size());
}

std::vector<double> ForestModel::predict(const Matrix& x) const { return predict_rows(*this, x); }

ForestModel fit_forest(const Matrix& x, std::span<const double> y, const ForestParams& params,
                       std::uint64_t seed) {
  check_inputs(x, y);
  if (params.n_trees == 0) throw Error(ErrorCode::InvalidArgument, "forest needs at least one tree");
  TreeParams tp = params.tree;
  tp.max_features = params.max_features ? params.max_features : (x.cols + 2) / 3;

  ForestModel forest;
  forest.trees.resize(params.n_trees);
  parallel_for(params.n_trees, params.jobs, [&](std::size_t t) {
    const std::uint64_t tree_seed = derive_seed(seed, t);
    Rng rng(tree_seed);
    std::vector<std::size_t> rows(x.rows);
    if (params.bootstrap) {
      for (auto& r : rows) r = static_cast<std::size_t>(rng.index(x.rows));
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    forest.trees[t] = fit_rows(x, y, tp, rng.next_u64(), std::move(rows));
  });
  return forest;
}

double BoostedModel::predict(std::span<const double> x) const {
  double f = initial;
  for (const auto& t : trees) f += learning_rate * t.predict(x);
  return f;
}

std::vector<double> BoostedModel::predict(const Matrix& x) const { return predict_rows(*this, x); }

BoostedModel fit_gbm(const Matrix& x, std::span<const double> y, const GbmParams& params) {
  check_inputs(x, y);
  if (!(params.learning_rate > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "learning rate must be positive");
  }
  BoostedModel model;
  model.learning_rate = params.learning_rate;
  model.initial = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());

  std::vector<double> fitted(x.rows, model.initial), residual(x.rows);
  auto train_mse = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) s += (y[i] - fitted[i]) * (y[i] - fitted[i]);
    return s / static_cast<double>(x.rows);
  };
  model.train_mse.push_back(train_mse());

  TreeParams tp;
  tp.max_depth = params.max_depth;
  tp.min_samples_leaf = params.min_samples_leaf;
  model.trees.reserve(params.n_stages);
  for (std::size_t m = 0; m < params.n_stages; ++m) {
    for (std::size_t i = 0; i < x.rows; ++i) residual[i] = y[i] - fitted[i];
    RegressionTree tree = fit_tree(x, residual, tp);
    for (std::size_t i = 0; i < x.rows; ++i) fitted[i] += params.learning_rate * tree.predict(x.row(i));
    model.trees.push_back(std::move(tree));
    model.train_mse.push_back(train_mse());
  }
  return model;
}

}  // namespace pkw
