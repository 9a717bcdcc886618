#include "mtml/objective.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mtml/error.hpp"

namespace mtml {

double log_sum_exp(std::span<const double> logits) {
  if (logits.empty()) fail(ErrorCode::kShapeError, "log_sum_exp of empty vector");
  const double hi = *std::max_element(logits.begin(), logits.end());
  double acc = 0.0;
  for (double z : logits) acc += std::exp(z - hi);
  return hi + std::log(acc);
}

double cross_entropy(std::span<const double> logits, int target) {
  if (target < 0 || static_cast<std::size_t>(target) >= logits.size()) {
    fail(ErrorCode::kLabelOutOfRange,
         "label " + std::to_string(target) + " for " + std::to_string(logits.size()) + " classes");
  }
  // Clamp tiny negative round-off so the result stays >= 0.
  return std::max(0.0, log_sum_exp(logits) - logits[static_cast<std::size_t>(target)]);
}

double mt_loss_sample(std::span<const double> logits, int true_label) {
  return cross_entropy(logits, true_label);
}

double ml_loss_sample(std::span<const double> logits, int assigned_label) {
  return cross_entropy(logits, assigned_label);
}

double mt_loss_batch(const std::map<int, std::vector<double>>& losses_by_camera, std::size_t batch_size) {
  if (batch_size == 0) fail(ErrorCode::kEmptyBatch, "batch size is zero");
  std::size_t count = 0;
  double sum = 0.0;
  for (const auto& [camera, losses] : losses_by_camera) {
    double camera_sum = 0.0;
    for (double l : losses) camera_sum += l;
    sum += camera_sum;
    count += losses.size();
  }
  if (count != batch_size) {
    fail(ErrorCode::kInvalidArgument, "camera groups hold " + std::to_string(count) +
                                          " samples but batch size is " + std::to_string(batch_size));
  }
  return sum / static_cast<double>(batch_size);
}

double ml_loss_batch(const std::map<int, std::vector<double>>& losses_by_camera, int num_cameras) {
  if (num_cameras < 1) fail(ErrorCode::kInvalidArgument, "num_cameras must be >= 1");
  double sum = 0.0;
  for (const auto& [camera, losses] : losses_by_camera) {
    if (losses.empty()) continue;
    double camera_sum = 0.0;
    for (double l : losses) camera_sum += l;
    sum += camera_sum / static_cast<double>(losses.size());
  }
  return sum / static_cast<double>(num_cameras);
}

double total_loss(double mt, double ml, double lambda) { return mt + lambda * ml; }

}  // namespace mtml
