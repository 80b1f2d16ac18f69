#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include "fixtures.hpp"
#include "pkw/error.hpp"
#include "pkw/model_io.hpp"
#include "pkw/rng.hpp"
#include "pkw/surrogates.hpp"

using namespace pkw;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::InvalidArgument;
}

Matrix column(std::initializer_list<double> values) {
  Matrix x(values.size(), 1);
  std::copy(values.begin(), values.end(), x.data.begin());
  return x;
}

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Matrix x(rows, cols);
  Rng rng(seed);
  for (auto& v : x.data) v = std::round(rng.uniform(0.0, 20.0)) / 4.0;  // plenty of ties
  return x;
}

std::vector<double> smooth_target(const Matrix& x, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> y(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    y[i] = std::sin(x(i, 0)) + 0.5 * x(i, 1) * x(i, 1) / 25.0 + 0.05 * rng.normal();
  }
  return y;
}

// Exhaustive root split by direct two-pass variance, independent of the
// prefix-sum search.
struct RootSplit {
  int feature = -1;
  double threshold = 0.0;
};

RootSplit exhaustive_root_split(const Matrix& x, const std::vector<double>& y) {
  auto sse = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double a : v) m += a;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double a : v) s += (a - m) * (a - m);
    return s;
  };
  RootSplit best;
  double best_sse = sse(y);
  for (std::size_t f = 0; f < x.cols; ++f) {
    std::vector<double> values;
    for (std::size_t i = 0; i < x.rows; ++i) values.push_back(x(i, f));
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t k = 1; k < values.size(); ++k) {
      const double t = 0.5 * (values[k - 1] + values[k]);
      std::vector<double> l, r;
      for (std::size_t i = 0; i < x.rows; ++i) (x(i, f) <= t ? l : r).push_back(y[i]);
      const double s = sse(l) + sse(r);
      if (s < best_sse - 1e-12 * (1.0 + best_sse)) {
        best_sse = s;
        best = {static_cast<int>(f), t};
      }
    }
  }
  return best;
}

// Leaf reached by a row, found by walking the tree.
std::size_t leaf_of(const RegressionTree& t, std::span<const double> row) {
  std::size_t i = 0;
  while (t.nodes[i].feature >= 0) {
    const auto& n = t.nodes[i];
    i = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return i;
}

unsigned hardware_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

}  // namespace

TEST_CASE("metrics hand example") {
  const std::vector<double> y = {0.3, 0.4, 0.5}, p = {0.32, 0.38, 0.51};
  const auto m = metrics(y, p);
  CHECK(m.mse == doctest::Approx(3e-4).epsilon(1e-12));
  CHECK(m.mae == doctest::Approx(0.05 / 3.0).epsilon(1e-12));
  CHECK(m.max_ae == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(*m.r2 == doctest::Approx(0.955).epsilon(1e-12));

  const auto perfect = metrics(y, y);
  CHECK(perfect.mse == 0.0);
  CHECK(perfect.max_ae == 0.0);
  CHECK(*perfect.r2 == 1.0);
  const std::vector<double> mean(3, 0.4);
  CHECK(*metrics(y, mean).r2 == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_FALSE(metrics(mean, y).r2.has_value());

  const auto s = m.paper_scaled();
  CHECK(s.mse == doctest::Approx(30.0).epsilon(1e-12));
  CHECK(*s.r2 == doctest::Approx(95.5).epsilon(1e-12));
  CHECK(s.mae == doctest::Approx(50.0 / 3.0).epsilon(1e-12));
  CHECK(s.max_ae == doctest::Approx(0.2).epsilon(1e-12));

  CHECK(code_of([&] { metrics(y, std::vector<double>{1.0}); }) == ErrorCode::ShapeMismatch);
  CHECK(code_of([] { metrics({}, {}); }) == ErrorCode::EmptyData);

  std::ostringstream csv;
  write_metric_csv(csv, {{"id", "forest", m}, {"const", "forest", metrics(mean, y)}}, true);
  CHECK(csv.str() ==
        "split,model,n,MSE_x1e5,R2_x1e2,MAE_x1e3,MaxAE_x10\n"
        "id,forest,3,30,95.5,16.666667,0.2\n"
        "const,forest,3,666.66667,,66.666667,1\n");
}

TEST_CASE("tree on step data") {
  const auto x = column({1, 2, 3, 4});
  const std::vector<double> y = {0, 0, 1, 1};
  const auto t = fit_tree(x, y, {});
  REQUIRE(t.nodes.size() == 3);
  CHECK(t.nodes[0].feature == 0);
  CHECK(t.nodes[0].threshold == 2.5);
  CHECK(t.nodes[static_cast<std::size_t>(t.nodes[0].left)].value == 0.0);
  CHECK(t.nodes[static_cast<std::size_t>(t.nodes[0].right)].value == 1.0);
  CHECK(metrics(y, t.predict(x)).mse == 0.0);

  const auto flat = fit_tree(x, std::vector<double>(4, 0.7), {});
  CHECK(flat.nodes.size() == 1);
  CHECK(flat.predict(std::vector<double>{100.0}) == 0.7);

  CHECK(code_of([] { fit_tree(Matrix(), std::vector<double>{}, {}); }) == ErrorCode::EmptyData);
  CHECK(code_of([&] { t.predict(std::vector<double>{1.0, 2.0}); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("tree structure against exhaustive search") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto x = random_matrix(60, 3, seed);
    const auto y = smooth_target(x, seed + 100);
    TreeParams p;
    p.max_depth = 4;
    const auto t = fit_tree(x, y, p);
    const auto root = exhaustive_root_split(x, y);
    CHECK(t.nodes[0].feature == root.feature);
    CHECK(t.nodes[0].threshold == root.threshold);
    CHECK(t.depth() <= 4);

    // Leaf value is the mean of the training rows routed there.
    std::map<std::size_t, std::vector<double>> routed;
    for (std::size_t i = 0; i < x.rows; ++i) routed[leaf_of(t, x.row(i))].push_back(y[i]);
    CHECK(routed.size() == t.leaf_count());
    for (const auto& [leaf, ys] : routed) {
      const double mean = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size());
      CHECK(t.nodes[leaf].value == doctest::Approx(mean).epsilon(1e-12));
    }

    const auto again = fit_tree(x, y, p);
    REQUIRE(again.nodes.size() == t.nodes.size());
    for (std::size_t i = 0; i < t.nodes.size(); ++i) {
      CHECK(again.nodes[i].feature == t.nodes[i].feature);
      CHECK(again.nodes[i].threshold == t.nodes[i].threshold);
    }
  }

  // Two identical columns tie; the lower index wins.
  Matrix twin(6, 2);
  for (std::size_t i = 0; i < 6; ++i) twin(i, 0) = twin(i, 1) = static_cast<double>(i);
  const auto t = fit_tree(twin, std::vector<double>{0, 0, 0, 1, 1, 1}, {});
  CHECK(t.nodes[0].feature == 0);

  TreeParams leafy;
  leafy.min_samples_leaf = 3;
  const auto x = random_matrix(40, 2, 9);
  const auto big_leaves = fit_tree(x, smooth_target(x, 1), leafy);
  std::map<std::size_t, int> counts;
  for (std::size_t i = 0; i < x.rows; ++i) ++counts[leaf_of(big_leaves, x.row(i))];
  for (const auto& [leaf, c] : counts) CHECK(c >= 3);
}

TEST_CASE("forest ensembles") {
  const auto x = random_matrix(200, 4, 3);
  const auto y = smooth_target(x, 4);

  ForestParams single;
  single.n_trees = 1;
  single.bootstrap = false;
  single.max_features = 4;
  const auto one = fit_forest(x, y, single, 5);
  const auto tree = fit_tree(x, y, {});
  REQUIRE(one.trees[0].nodes.size() == tree.nodes.size());
  CHECK(one.predict(x) == tree.predict(x));

  ForestParams p;
  p.n_trees = 25;
  const auto serial = fit_forest(x, y, p, 11);
  p.jobs = 4;
  const auto threaded = fit_forest(x, y, p, 11);
  CHECK(serial.predict(x) == threaded.predict(x));
  for (std::size_t i = 0; i < x.rows; i += 17) {
    double sum = 0.0;
    for (const auto& t : serial.trees) sum += t.predict(x.row(i));
    CHECK(serial.predict(x.row(i)) == sum / 25.0);
  }
  CHECK(fit_forest(x, y, p, 12).predict(x) != serial.predict(x));
}

TEST_CASE("forest fits the synthetic oracle") {
  const auto m = fixture::synthetic_manifest(500, 2);
  std::vector<PairKey> keys;
  for (const auto& l : m.labels()) keys.push_back(PairKey::of(l.geometry_id, l.discharge));
  const auto data = tabular(m, keys);
  REQUIRE(data.x.rows == 9500);
  ForestParams p;
  p.jobs = hardware_jobs();
  const auto forest = fit_forest(data.x, data.y, p, 1);
  CHECK(*metrics(data.y, forest.predict(data.x)).r2 > 0.99);

  // Sidewall angle and discharge carry the largest oracle coefficients.
  Matrix sub(1000, data.x.cols);
  std::vector<double> y_sub(1000);
  for (std::size_t i = 0; i < 1000; ++i) {
    const std::size_t r = (i * 9497) % data.x.rows;
    std::copy(data.x.row(r).begin(), data.x.row(r).end(), sub.row(i).begin());
    y_sub[i] = data.y[r];
  }
  const BatchPredictor predict = [&](const Matrix& xm) { return forest.predict(xm); };
  const auto scores = permutation_importance(predict, sub, y_sub, 3, 5);
  std::vector<std::size_t> rank(scores.size());
  std::iota(rank.begin(), rank.end(), std::size_t{0});
  std::sort(rank.begin(), rank.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  const std::vector<std::size_t> top(rank.begin(), rank.begin() + 3);
  CHECK(std::count(top.begin(), top.end(), 0u) == 1);  // Q
  CHECK(std::count(top.begin(), top.end(), 4u) == 1);  // alpha
  CHECK(permutation_importance(predict, sub, y_sub, 3, 5) == scores);
}

TEST_CASE("permutation importance of an unused column") {
  auto x = random_matrix(100, 3, 6);
  for (std::size_t i = 0; i < x.rows; ++i) x(i, 2) = 1.5;
  const auto y = smooth_target(x, 8);
  const auto tree = fit_tree(x, y, {});
  const auto scores = permutation_importance([&](const Matrix& xm) { return tree.predict(xm); }, x, y, 1);
  CHECK(scores[2] == 0.0);
  CHECK(scores[0] > 0.0);
}

TEST_CASE("boosting") {
  const auto x = column({1, 2, 3, 4});
  const std::vector<double> y = {0, 0, 1, 1};

  // Hand simulation: F0 = 0.5, residuals +-0.5, each stage fits them exactly
  // and removes a fraction eta, so the training MSE after m stages is
  // 0.25 (1 - eta)^(2m).
  GbmParams p;
  p.n_stages = 10;
  const auto slow = fit_gbm(x, y, p);
  CHECK(slow.initial == 0.5);
  REQUIRE(slow.train_mse.size() == 11);
  for (std::size_t m = 0; m <= 10; ++m) {
    CHECK(slow.train_mse[m] == doctest::Approx(0.25 * std::pow(0.95, 2.0 * static_cast<double>(m))).epsilon(1e-12));
  }
  p.learning_rate = 0.5;
  const auto fast = fit_gbm(x, y, p);
  CHECK(fast.train_mse.back() < 1e-6);

  GbmParams single;
  single.n_stages = 1;
  single.max_depth = -1;
  single.learning_rate = 1.0;
  const auto xr = random_matrix(80, 3, 2);
  const auto yr = smooth_target(xr, 3);
  const auto g = fit_gbm(xr, yr, single);
  const auto cart = fit_tree(xr, yr, {});
  const auto pg = g.predict(xr), pc = cart.predict(xr);
  for (std::size_t i = 0; i < xr.rows; ++i) CHECK(yr[i] - pg[i] == doctest::Approx(yr[i] - pc[i]).epsilon(1e-12));

  const auto full = fit_gbm(xr, yr, {});
  CHECK(full.trees.size() == 300);
  for (std::size_t m = 1; m < full.train_mse.size(); ++m) {
    CHECK(full.train_mse[m] <= full.train_mse[m - 1] * (1.0 + 1e-12));
  }
  for (std::size_t i = 0; i < xr.rows; i += 7) {
    double sum = 0.0;
    for (const auto& t : full.trees) sum += t.predict(xr.row(i));
    CHECK(full.predict(xr.row(i)) == doctest::Approx(full.initial + 0.05 * sum).epsilon(1e-12));
    CHECK(full.trees[i % 300].depth() <= 3);
  }
}

TEST_CASE("single-sample tree inference latency") {
  const auto x = random_matrix(2000, 9, 1);
  const auto y = smooth_target(x, 2);
  ForestParams p;
  p.jobs = hardware_jobs();
  const auto forest = fit_forest(x, y, p, 3);
  std::vector<double> timed(10'000);
  const auto summary = time_calls(10'000, [&](std::size_t i) { timed[i] = forest.predict(x.row(i % x.rows)); });
  CHECK(summary.calls == 10'000);
  CHECK(summary.median_ms < 1.0);
  CHECK(summary.median_ms <= summary.p90_ms);
  for (std::size_t i = 0; i < timed.size(); i += 101) CHECK(timed[i] == forest.predict(x.row(i % x.rows)));
  CHECK(time_calls(0, [](std::size_t) {}).median_ms == 0.0);
}

TEST_CASE("model container round trip") {
  const auto x = random_matrix(50, 3, 4);
  const auto y = smooth_target(x, 5);
  ForestParams fp;
  fp.n_trees = 5;
  GbmParams gp;
  gp.n_stages = 20;
  const std::vector<AnyModel> models = {fit_tree(x, y, {}), fit_forest(x, y, fp, 1), fit_gbm(x, y, gp),
                                        PointNetMini(3)};
  for (const auto& model : models) {
    std::stringstream buf;
    write_model(buf, model);
    const std::string bytes = buf.str();
    CHECK(bytes.substr(0, 4) == "WNSM");
    const auto back = read_model(buf);
    CHECK(kind_of(back) == kind_of(model));
    std::visit(
        [&](const auto& original) {
          using T = std::decay_t<decltype(original)>;
          const auto& copy = std::get<T>(back);
          if constexpr (std::is_same_v<T, PointNetMini>) {
            CHECK(copy.params == original.params);
          } else {
            CHECK(copy.predict(x) == original.predict(x));
          }
        },
        model);

    std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
    CHECK(code_of([&] { read_model(truncated); }) == ErrorCode::MalformedModel);
    std::string wrong = bytes;
    wrong[8] = 9;
    std::stringstream bad_kind(wrong);
    CHECK(code_of([&] { read_model(bad_kind); }) == ErrorCode::MalformedModel);
  }
  std::stringstream junk("not a model at all");
  CHECK(code_of([&] { read_model(junk); }) == ErrorCode::MalformedModel);
  CHECK(to_string(ModelKind::Gbm) == "gbm");
}
