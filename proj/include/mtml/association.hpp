#pragma once

// Inter-camera identity association by cyclic prediction consistency, and the
// multi-label assignments it induces.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mtml/datagen.hpp"
#include "mtml/model.hpp"

namespace mtml {

struct AveragedPrediction {
  int source_camera = 0;
  int source_identity = 0;
  int target_camera = 0;
  Vector probs;
};

struct MatchPair {
  int identity_a = 0;
  int camera_a = 0;
  int identity_b = 0;  // forward nomination l*
  int camera_b = 0;
  int backward_argmax = 0;  // t*
  bool verified = false;

  bool operator==(const MatchPair&) const = default;
};

// An unordered verified association, stored with camera_a < camera_b.
struct AssociatedPair {
  IdentityKey a;
  IdentityKey b;

  auto operator<=>(const AssociatedPair&) const = default;
};

class MultiLabelSet {
 public:
  // Records the mutual assignment a <-> b. Throws kInvalidArgument if a and b
  // share a camera or either side already holds a different label from the
  // other's camera.
  void add_pair(const IdentityKey& a, const IdentityKey& b);

  // Foreign labels of `key`, keyed by foreign camera id.
  const std::map<int, int>* labels_of(const IdentityKey& key) const;
  const std::map<IdentityKey, std::map<int, int>>& entries() const { return entries_; }

  std::vector<AssociatedPair> pairs() const;
  std::size_t num_pairs() const;
  bool empty() const { return entries_.empty(); }

  bool operator==(const MultiLabelSet&) const = default;

 private:
  std::map<IdentityKey, std::map<int, int>> entries_;
};

// Mean over all images of (camera p, identity y_k) of softmax(head_q(v)).
// Throws kEmptyIdentity when the identity has no images.
AveragedPrediction average_prediction(const ModelParams& params, const IcsDataset& dataset, int identity,
                                      int source_camera, int target_camera);

// argmax with ties resolved to the lowest index.
int nominate(const AveragedPrediction& avg);
int nominate(std::span<const double> probs);

MatchPair cyclic_match(const ModelParams& params, const IcsDataset& dataset, int identity, int source_camera,
                       int target_camera);

// Runs the cyclic check for every ordered camera pair and identity, from
// scratch. Shared features and averaged predictions are computed once.
MultiLabelSet discover_all(const ModelParams& params, const IcsDataset& dataset);

// Throws kStaleAssignment if any entry names an identity the dataset lacks.
AugmentedLabels apply_multilabels(const IcsDataset& dataset, const MultiLabelSet& set);

// Fraction of pairs whose hidden global ids agree; nullopt without ground
// truth or without pairs.
std::optional<double> association_precision(const MultiLabelSet& set, const IcsDataset& dataset);

enum class PairCorrectness { kCorrect, kIncorrect, kUnknown };

struct AssociationDumpRow {
  int round = 0;
  int camera_a = 0;
  int identity_a = 0;
  int camera_b = 0;
  int identity_b = 0;
  PairCorrectness correctness = PairCorrectness::kUnknown;

  bool operator==(const AssociationDumpRow&) const = default;
};

std::vector<AssociationDumpRow> association_dump(const MultiLabelSet& set, const IcsDataset& dataset, int round);

}  // namespace mtml
