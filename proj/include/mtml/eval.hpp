#pragma once

// Retrieval evaluation on camera-shared features: Euclidean ranking, CMC and
// mAP under the cross-camera protocol, plus association dynamics.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "mtml/association.hpp"
#include "mtml/datagen.hpp"
#include "mtml/model.hpp"

namespace mtml {

inline constexpr int kCmcRanks[] = {1, 5, 10, 20};

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
};

// Who a feature belongs to, for relevance and same-camera filtering.
struct RetrievalTag {
  int global_id = 0;
  int camera_id = 0;
};

struct RetrievalProblem {
  std::vector<SharedFeature> probe;
  std::vector<RetrievalTag> probe_tags;
  std::vector<SharedFeature> gallery;
  std::vector<RetrievalTag> gallery_tags;
};

struct CmcResult {
  std::map<int, double> rates;
  int num_evaluated = 0;
  int num_excluded = 0;
};

struct MapResult {
  double score = 0.0;
  int num_evaluated = 0;
  int num_excluded = 0;
};

struct EvalReport {
  std::map<int, double> cmc;
  double map_score = 0.0;
  int num_probes_evaluated = 0;
  int num_probes_excluded = 0;
};

std::vector<SharedFeature> extract_features(const ModelParams& params, std::span<const Sample> samples);

Matrix distance_matrix(std::span<const SharedFeature> probe, std::span<const SharedFeature> gallery);

// Gallery entries sharing both global id and camera with the probe are
// dropped; distance ties go to the lower gallery index. Probes without any
// valid match are skipped and tallied in num_excluded.
CmcResult cmc(const Matrix& dist, std::span<const RetrievalTag> probe, std::span<const RetrievalTag> gallery,
              std::span<const int> ranks);

MapResult mean_average_precision(const Matrix& dist, std::span<const RetrievalTag> probe,
                                 std::span<const RetrievalTag> gallery);

EvalReport evaluate(const RetrievalProblem& problem);

// Per camera and identity, holds out round(fraction * n) images (at least one,
// never all) as probes; single-image identities stay in the gallery. Requires
// ground truth (kMissingGroundTruth).
struct ProbeGallerySplit {
  std::vector<Sample> probe;
  std::vector<Sample> gallery;
};

ProbeGallerySplit split_probe_gallery(const IcsDataset& dataset, double probe_fraction, std::uint64_t seed);

// Extracts features for a split and evaluates it. Throws kIncompatibleArtifacts
// when the model input dimension differs from the dataset's.
EvalReport evaluate_model(const ModelParams& params, const IcsDataset& dataset, double probe_fraction,
                          std::uint64_t seed, Matrix* distances_out = nullptr);

struct DynamicsRow {
  int round = 0;
  std::size_t pairs = 0;
  std::optional<double> precision;  // nullopt for empty rounds or unknown truth

  bool operator==(const DynamicsRow&) const = default;
};

// One row per entry of `rounds` (ascending), aggregated from the dump rows.
std::vector<DynamicsRow> association_dynamics_report(std::span<const AssociationDumpRow> rows,
                                                     std::span<const int> rounds);

}  // namespace mtml
