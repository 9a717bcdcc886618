#pragma once

// Softmax cross-entropy objectives: the per-camera multi-task (MT) term, the
// cross-camera multi-label (ML) term, and their weighted sum.

#include <map>
#include <span>
#include <vector>

namespace mtml {

inline constexpr double kDefaultLambda = 0.5;

struct CameraMlTerm {
  double loss = 0.0;  // mean over the b_q multi-labeled images
  int count = 0;      // b_q

  bool operator==(const CameraMlTerm&) const = default;
};

struct LossReport {
  double mt_loss = 0.0;
  double ml_loss = 0.0;
  double total = 0.0;
  double lambda = kDefaultLambda;
  std::map<int, double> per_camera_mt;        // camera -> summed per-sample MT loss
  std::map<int, CameraMlTerm> per_camera_ml;  // camera -> (L_ml^q, b_q)
};

// log(sum(exp(logits))) with max subtraction.
double log_sum_exp(std::span<const double> logits);

// -log softmax(logits)[target]; throws kLabelOutOfRange.
double cross_entropy(std::span<const double> logits, int target);

double mt_loss_sample(std::span<const double> logits, int true_label);
double ml_loss_sample(std::span<const double> logits, int assigned_label);

// (1/B) * sum over cameras of the summed per-sample losses. Throws kEmptyBatch.
double mt_loss_batch(const std::map<int, std::vector<double>>& losses_by_camera, std::size_t batch_size);

// (1/M) * sum over cameras of the per-camera mean; cameras without
// multi-labeled images contribute zero but still count in M.
double ml_loss_batch(const std::map<int, std::vector<double>>& losses_by_camera, int num_cameras);

double total_loss(double mt, double ml, double lambda);

}  // namespace mtml
