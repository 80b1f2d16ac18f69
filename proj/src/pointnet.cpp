#include "pkw/pointnet.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "pkw/error.hpp"
#include "pkw/hydraulics.hpp"
#include "pkw/rng.hpp"
#include "pkw/text.hpp"

namespace pkw {

namespace {

using Net = PointNetMini;

struct Layer {
  std::size_t in, out, weights, bias;  // offsets into the parameter vector
};

constexpr std::array<Layer, 5> make_layers() {
  constexpr std::size_t dims[6] = {Net::kInput, Net::kHidden1, Net::kHidden2, Net::kGlobal, Net::kHead, 1};
  std::array<Layer, 5> layers{};
  std::size_t offset = 0;
  for (std::size_t l = 0; l < 5; ++l) {
    layers[l] = Layer{dims[l], dims[l + 1], offset, offset + dims[l] * dims[l + 1]};
    offset += dims[l + 1] * (dims[l] + 1);
  }
  return layers;
}

constexpr auto kLayers = make_layers();
static_assert(kLayers[4].bias + 1 == Net::kParameterCount);

// out = W in + b
void affine(const std::vector<double>& p, const Layer& layer, const double* in, double* out) {
  const double* w = p.data() + layer.weights;
  const double* b = p.data() + layer.bias;
  for (std::size_t o = 0; o < layer.out; ++o) {
    double s = b[o];
    const double* row = w + o * layer.in;
    for (std::size_t i = 0; i < layer.in; ++i) s += row[i] * in[i];
    out[o] = s;
  }
}

void relu(double* v, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) v[i] = v[i] > 0.0 ? v[i] : 0.0;
}

// Gradient of a layer given d(out): accumulates dW, db and writes d(in).
void affine_backward(const std::vector<double>& p, const Layer& layer, const double* in,
                     const double* d_out, double* grad, double* d_in) {
  const double* w = p.data() + layer.weights;
  if (d_in) std::fill(d_in, d_in + layer.in, 0.0);
  for (std::size_t o = 0; o < layer.out; ++o) {
    const double g = d_out[o];
    if (g == 0.0) continue;
    grad[layer.bias + o] += g;
    double* gw = grad + layer.weights + o * layer.in;
    const double* row = w + o * layer.in;
    for (std::size_t i = 0; i < layer.in; ++i) {
      gw[i] += g * in[i];
      if (d_in) d_in[i] += g * row[i];
    }
  }
}

struct PointActivations {
  std::array<double, Net::kInput> input;
  std::array<double, Net::kHidden1> a1;  // pre-activations
  std::array<double, Net::kHidden2> a2;
  std::array<double, Net::kGlobal> a3;
  std::array<double, Net::kHidden1> h1;
  std::array<double, Net::kHidden2> h2;
};

void encode_point(const std::vector<double>& p, const Vec3& v, double q, PointActivations& act) {
  act.input = {v.x, v.y, v.z, q};
  affine(p, kLayers[0], act.input.data(), act.a1.data());
  act.h1 = act.a1;
  relu(act.h1.data(), act.h1.size());
  affine(p, kLayers[1], act.h1.data(), act.a2.data());
  act.h2 = act.a2;
  relu(act.h2.data(), act.h2.size());
  affine(p, kLayers[2], act.h2.data(), act.a3.data());
}

struct Forward {
  std::array<double, Net::kGlobal> pooled{};
  std::array<std::size_t, Net::kGlobal> argmax{};
  std::array<double, Net::kHead> z{};
  std::array<double, Net::kHead> r{};
  double output = 0.0;
};

Forward forward(const std::vector<double>& p, std::span<const Vec3> points, double discharge) {
  if (points.empty()) throw Error(ErrorCode::ShapeMismatch, "empty point cloud");
  const double q = normalized_discharge(discharge);
  Forward f;
  PointActivations act;
  for (std::size_t i = 0; i < points.size(); ++i) {
    encode_point(p, points[i], q, act);
    for (std::size_t c = 0; c < Net::kGlobal; ++c) {
      const double h = act.a3[c] > 0.0 ? act.a3[c] : 0.0;
      if (i == 0 || h > f.pooled[c]) {
        f.pooled[c] = h;
        f.argmax[c] = i;
      }
    }
  }
  affine(p, kLayers[3], f.pooled.data(), f.z.data());
  f.r = f.z;
  relu(f.r.data(), f.r.size());
  affine(p, kLayers[4], f.r.data(), &f.output);
  return f;
}

}  // namespace

double normalized_discharge(double discharge_m3s) { return (m3s_to_lps(discharge_m3s) - 50.0) / 200.0; }

PointNetMini::PointNetMini(std::uint64_t seed) : params(kParameterCount) {
  Rng rng(seed);
  for (const auto& layer : kLayers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
    for (std::size_t i = layer.weights; i < layer.bias + layer.out; ++i) params[i] = rng.uniform(-bound, bound);
  }
}

double PointNetMini::predict(std::span<const Vec3> points, double discharge) const {
  return forward(params, points, discharge).output;
}

double PointNetMini::loss_and_gradient(std::span<const CloudExample> batch, std::vector<double>& grad) const {
  if (batch.empty()) throw Error(ErrorCode::ShapeMismatch, "empty batch");
  grad.assign(kParameterCount, 0.0);
  const double scale = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  PointActivations act;
  std::array<double, kHead> d_z;
  std::array<double, kGlobal> d_pooled, d_a3;
  std::array<double, kHidden2> d_h2;
  std::array<double, kHidden1> d_h1;

  for (const auto& ex : batch) {
    if (!ex.points) throw Error(ErrorCode::ShapeMismatch, "example without a cloud");
    const std::span<const Vec3> points(*ex.points);
    const Forward f = forward(params, points, ex.discharge);
    const double err = f.output - ex.target;
    loss += err * err * scale;

    const double d_out = 2.0 * err * scale;
    affine_backward(params, kLayers[4], f.r.data(), &d_out, grad.data(), d_z.data());
    for (std::size_t i = 0; i < kHead; ++i) d_z[i] = f.z[i] > 0.0 ? d_z[i] : 0.0;
    affine_backward(params, kLayers[3], f.pooled.data(), d_z.data(), grad.data(), d_pooled.data());

    // Each point that won at least one channel receives that channel's gradient.
    std::vector<std::size_t> winners(f.argmax.begin(), f.argmax.end());
    std::sort(winners.begin(), winners.end());
    winners.erase(std::unique(winners.begin(), winners.end()), winners.end());
    const double q = normalized_discharge(ex.discharge);
    for (std::size_t point : winners) {
      encode_point(params, points[point], q, act);
      for (std::size_t c = 0; c < kGlobal; ++c) {
        d_a3[c] = (f.argmax[c] == point && act.a3[c] > 0.0) ? d_pooled[c] : 0.0;
      }
      affine_backward(params, kLayers[2], act.h2.data(), d_a3.data(), grad.data(), d_h2.data());
      for (std::size_t i = 0; i < kHidden2; ++i) d_h2[i] = act.a2[i] > 0.0 ? d_h2[i] : 0.0;
      affine_backward(params, kLayers[1], act.h1.data(), d_h2.data(), grad.data(), d_h1.data());
      for (std::size_t i = 0; i < kHidden1; ++i) d_h1[i] = act.a1[i] > 0.0 ? d_h1[i] : 0.0;
      affine_backward(params, kLayers[0], act.input.data(), d_h1.data(), grad.data(), nullptr);
    }
  }
  return loss;
}

namespace {

double dataset_mse(const PointNetMini& net, std::span<const CloudExample> data) {
  double s = 0.0;
  for (const auto& ex : data) {
    const double e = net.predict(*ex.points, ex.discharge) - ex.target;
    s += e * e;
  }
  return s / static_cast<double>(data.size());
}

}  // namespace

PointNetFit fit_pointnet_mini(std::span<const CloudExample> train, std::span<const CloudExample> val,
                              const PointNetConfig& config, std::uint64_t seed) {
  if (train.empty()) throw Error(ErrorCode::ShapeMismatch, "no training clouds");
  for (const auto* set : {&train, &val}) {
    for (const auto& ex : *set) {
      if (!ex.points || ex.points->empty()) throw Error(ErrorCode::ShapeMismatch, "missing or empty cloud");
    }
  }
  const std::size_t batch_size = std::max<std::size_t>(config.batch_size, 1);

  PointNetFit fit;
  fit.model = PointNetMini(derive_seed(seed, 0));
  PointNetMini net = fit.model;
  std::vector<double> m(PointNetMini::kParameterCount, 0.0), v(PointNetMini::kParameterCount, 0.0), grad;
  std::vector<CloudExample> order(train.begin(), train.end());
  double best = INFINITY;
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    Rng rng(derive_seed(seed, epoch + 1));
    rng.shuffle(std::span<CloudExample>(order));
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t n = std::min(batch_size, order.size() - start);
      const double loss = net.loss_and_gradient(std::span<const CloudExample>(order).subspan(start, n), grad);
      if (!std::isfinite(loss)) {
        throw Error(ErrorCode::NonFiniteLoss, "loss " + text::format_sig(loss, 6) + " at epoch " +
                                                  std::to_string(epoch) + ", batch starting at " +
                                                  std::to_string(start));
      }
      ++step;
      const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      for (std::size_t i = 0; i < grad.size(); ++i) {
        m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grad[i];
        v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
        net.params[i] -= config.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + config.epsilon);
      }
    }
    fit.train_mse.push_back(dataset_mse(net, train));
    const double monitored = val.empty() ? fit.train_mse.back() : dataset_mse(net, val);
    if (!std::isfinite(monitored)) {
      throw Error(ErrorCode::NonFiniteLoss, "monitored loss diverged at epoch " + std::to_string(epoch));
    }
    fit.monitor_mse.push_back(monitored);
    if (monitored < best) {
      best = monitored;
      fit.best_epoch = epoch;
      fit.model = net;
    } else if (epoch - fit.best_epoch >= config.patience) {
      fit.stopped_early = true;
      break;
    }
  }
  return fit;
}

}  // namespace pkw
