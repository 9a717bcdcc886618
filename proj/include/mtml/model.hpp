#pragma once

// Shared encoder -> linear FC-d feature layer -> one classifier head per camera.
//
// Dense weights are stored input-major: weight[i * out + j] connects input i to
// output j, so a layer computes y = W^T x + b for W of shape in x out.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mtml/datagen.hpp"
#include "mtml/objective.hpp"

namespace mtml {

struct ModelConfig {
  int input_dim = 16;
  std::vector<int> hidden_dims{64};
  int feature_dim = 64;
  std::vector<int> heads;
  double init_scale = 1.0;
  std::uint64_t seed = 1;

  bool operator==(const ModelConfig&) const = default;
  void validate() const;
};

struct Dense {
  int in = 0;
  int out = 0;
  Vector weight;
  Vector bias;

  bool operator==(const Dense&) const = default;

  double& w(int i, int j) { return weight[static_cast<std::size_t>(i) * static_cast<std::size_t>(out) + static_cast<std::size_t>(j)]; }
  double w(int i, int j) const { return weight[static_cast<std::size_t>(i) * static_cast<std::size_t>(out) + static_cast<std::size_t>(j)]; }
};

// Encoder layers end with the FC-d layer; every layer but the last is followed
// by a rectifier.
struct ModelParams {
  ModelConfig config;
  std::vector<Dense> encoder;
  std::vector<Dense> heads;

  bool operator==(const ModelParams&) const = default;

  int num_heads() const { return static_cast<int>(heads.size()); }
  std::size_t num_parameters() const;
};

struct GradientSet {
  std::vector<Dense> encoder;
  std::vector<Dense> heads;

  bool operator==(const GradientSet&) const = default;
};

using SharedFeature = Vector;

ModelParams init_params(const ModelConfig& config);
GradientSet zero_gradients(const ModelParams& params);

// Every parameter tensor, in a fixed order (encoder weight/bias pairs, then
// heads), for optimizers and finite-difference checks.
std::vector<std::span<double>> parameter_tensors(ModelParams& params);
std::vector<std::span<double>> parameter_tensors(GradientSet& grads);
std::vector<std::span<const double>> parameter_tensors(const GradientSet& grads);

SharedFeature forward_shared(const ModelParams& params, std::span<const double> features);

// Throws kNoSuchHead unless 1 <= camera_id <= M.
Vector head_logits(const ModelParams& params, std::span<const double> shared, int camera_id);

Vector softmax(std::span<const double> logits);

struct LossSpec {
  double lambda = kDefaultLambda;
  // nullptr or empty: MT term only.
  const AugmentedLabels* multilabels = nullptr;
};

struct LossAndGradient {
  LossReport report;
  GradientSet grads;
};

// Batch objective L = L_mt + lambda * L_ml without gradients.
LossReport evaluate_loss(const ModelParams& params, std::span<const Sample> batch, const LossSpec& spec);

// Exact analytic gradient of the batch objective. Throws kNumericFailure
// naming the layer if an intermediate becomes non-finite.
LossAndGradient backward(const ModelParams& params, std::span<const Sample> batch, const LossSpec& spec);

inline constexpr int kCheckpointFormatVersion = 1;

std::string serialize_checkpoint(const ModelParams& params);
ModelParams parse_checkpoint(std::string_view data);
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace mtml
