#pragma once

// Small permutation-invariant point-cloud regressor: a shared per-point MLP
// (x, y, z, q) -> 64 -> 64 -> 128, channel-wise max pooling, and a
// 128 -> 64 -> 1 head. All layers but the last use ReLU.

#include <cstdint>
#include <span>
#include <vector>

#include "pkw/vec3.hpp"

namespace pkw {

// Maps discharge in m^3/s onto [0, 1] over the 50..250 l/s schedule.
double normalized_discharge(double discharge_m3s);

struct CloudExample {
  const std::vector<Vec3>* points = nullptr;  // unit-cube frame
  double discharge = 0.0;                     // m^3/s
  double target = 0.0;
};

class PointNetMini {
 public:
  static constexpr std::size_t kInput = 4;
  static constexpr std::size_t kHidden1 = 64;
  static constexpr std::size_t kHidden2 = 64;
  static constexpr std::size_t kGlobal = 128;
  static constexpr std::size_t kHead = 64;
  static constexpr std::size_t kParameterCount =
      kHidden1 * (kInput + 1) + kHidden2 * (kHidden1 + 1) + kGlobal * (kHidden2 + 1) +
      kHead * (kGlobal + 1) + (kHead + 1);

  // Weights stored layer by layer, each as a row-major (out x in) matrix
  // followed by its bias.
  std::vector<double> params;

  PointNetMini() : params(kParameterCount, 0.0) {}
  // Every weight and bias drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  explicit PointNetMini(std::uint64_t seed);

  double predict(std::span<const Vec3> points, double discharge) const;

  // Mean squared error over the batch; writes its gradient into `grad`
  // (resized and overwritten). Max pooling routes each channel's gradient to
  // the lowest-index point holding the maximum.
  double loss_and_gradient(std::span<const CloudExample> batch, std::vector<double>& grad) const;
};

struct PointNetConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 500;
  std::size_t patience = 20;
};

struct PointNetFit {
  PointNetMini model;  // weights from the best monitored epoch
  std::vector<double> train_mse;
  std::vector<double> monitor_mse;  // validation MSE, or training MSE without a validation set
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

// Mini-batch Adam with early stopping on the monitored MSE. Throws
// ShapeMismatch for empty or missing clouds and NonFiniteLoss on divergence.
PointNetFit fit_pointnet_mini(std::span<const CloudExample> train, std::span<const CloudExample> val,
                              const PointNetConfig& config, std::uint64_t seed);

}  // namespace pkw
