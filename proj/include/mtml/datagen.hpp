#pragma once

// Intra-camera supervised (ICS) datasets: every camera view carries its own
// dense identity label space, and cross-camera identity links exist only as
// hidden ground truth.

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace mtml {

using Vector = std::vector<double>;

// Camera ids are 1-based throughout; person labels are 0-based within a camera.
struct IdentityKey {
  int camera_id = 0;
  int person_label = 0;

  auto operator<=>(const IdentityKey&) const = default;
};

// Extra (foreign-camera) labels carried by every image of an identity, in
// addition to its native label.
using AugmentedLabels = std::map<IdentityKey, std::vector<IdentityKey>>;

struct Sample {
  Vector features;
  int person_label = 0;
  int camera_id = 0;
  std::optional<int> global_id;  // hidden from the learner

  bool operator==(const Sample&) const = default;
};

struct CameraView {
  int camera_id = 0;
  int num_identities = 0;
  std::vector<Sample> samples;

  bool operator==(const CameraView&) const = default;
};

struct IcsDataset {
  int num_cameras = 0;
  int feature_dim = 0;
  std::vector<CameraView> cameras;
  std::optional<std::map<IdentityKey, int>> ground_truth;

  bool operator==(const IcsDataset&) const = default;

  const CameraView& camera(int camera_id) const;
  std::size_t num_samples() const;
  std::vector<int> identity_counts() const;

  // Throws Error(kInvalidSample / kDegenerateCamera / kLabelOutOfRange) on the
  // first violated invariant.
  void validate() const;
};

struct SynthConfig {
  int num_global_identities = 20;
  int num_cameras = 3;
  int feature_dim = 16;
  int images_per_identity_per_camera = 8;
  double camera_presence_probability = 0.8;
  double cluster_spread = 0.3;
  double camera_shift_scale = 0.5;
  // Per-camera linear distortion A_p = I + distortion * G_p / sqrt(F).
  double camera_distortion = 0.0;
  std::uint64_t seed = 1;

  void validate() const;
};

IcsDataset generate_synthetic(const SynthConfig& config);

struct DatasetSplit {
  IcsDataset train;
  IcsDataset test;
};

// Train identities are exactly generate_synthetic(config); the test part holds
// `test_identities` fresh global identities (ids G..G+T-1) seen through the
// same cameras.
DatasetSplit generate_synthetic_split(const SynthConfig& config, int test_identities);

struct Annotation {
  Vector features;
  int global_id = 0;
  int camera_id = 0;
};

IcsDataset relabel_to_ics(std::span<const Annotation> annotations);

struct Batch {
  std::vector<Sample> samples;
  std::map<int, int> per_camera_counts;

  std::size_t size() const { return samples.size(); }
};

// Identity-balanced P x K sampler. Holds per-identity sample indices so
// repeated draws do not rescan the dataset.
class BatchSampler {
 public:
  BatchSampler(const IcsDataset& dataset, int persons_per_camera, int images_per_person);

  Batch draw(std::mt19937_64& rng) const;
  std::size_t batch_size() const;

 private:
  const IcsDataset* dataset_;
  int persons_;
  int images_;
  // [camera index][label] -> sample indices
  std::vector<std::vector<std::vector<std::size_t>>> index_;
};

Batch sample_batch(const IcsDataset& dataset, std::mt19937_64& rng, int persons_per_camera,
                   int images_per_person);

inline constexpr int kDatasetFormatVersion = 1;

void save_dataset(const IcsDataset& dataset, const std::string& path);
IcsDataset load_dataset(const std::string& path);
std::string serialize_dataset(const IcsDataset& dataset);
IcsDataset parse_dataset(std::string_view data);

}  // namespace mtml
