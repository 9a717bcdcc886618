#include "mtml/association.hpp"

#include <string>

#include "mtml/error.hpp"

namespace mtml {

namespace {

std::string describe(const IdentityKey& k) {
  return "identity " + std::to_string(k.person_label) + "@camera " + std::to_string(k.camera_id);
}

void check_cameras(const IcsDataset& dataset, int source_camera, int target_camera) {
  if (source_camera == target_camera) {
    fail(ErrorCode::kInvalidArgument, "source and target camera must differ");
  }
  dataset.camera(source_camera);
  dataset.camera(target_camera);
}

// Mean of softmax(head_q(v)) over the given shared features, summed in order.
Vector mean_prediction(const ModelParams& params, const std::vector<const SharedFeature*>& features,
                       int target_camera) {
  Vector acc;
  for (const auto* v : features) {
    const Vector p = softmax(head_logits(params, *v, target_camera));
    if (acc.empty()) acc.assign(p.size(), 0.0);
    for (std::size_t k = 0; k < p.size(); ++k) acc[k] += p[k];
  }
  const double n = static_cast<double>(features.size());
  for (auto& a : acc) a /= n;
  return acc;
}

}  // namespace

void MultiLabelSet::add_pair(const IdentityKey& a, const IdentityKey& b) {
  if (a.camera_id == b.camera_id) {
    fail(ErrorCode::kInvalidArgument, "cannot associate identities of the same camera");
  }
  auto check = [this](const IdentityKey& self, const IdentityKey& other) {
    auto it = entries_.find(self);
    if (it == entries_.end()) return;
    auto jt = it->second.find(other.camera_id);
    if (jt != it->second.end() && jt->second != other.person_label) {
      fail(ErrorCode::kInvalidArgument, describe(self) + " already holds a label from camera " +
                                            std::to_string(other.camera_id));
    }
  };
  check(a, b);
  check(b, a);
  entries_[a][b.camera_id] = b.person_label;
  entries_[b][a.camera_id] = a.person_label;
}

const std::map<int, int>* MultiLabelSet::labels_of(const IdentityKey& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<AssociatedPair> MultiLabelSet::pairs() const {
  std::vector<AssociatedPair> out;
  for (const auto& [key, foreign] : entries_) {
    for (const auto& [camera, label] : foreign) {
      if (key.camera_id < camera) out.push_back({key, {camera, label}});
    }
  }
  return out;
}

std::size_t MultiLabelSet::num_pairs() const {
  std::size_t n = 0;
  for (const auto& [key, foreign] : entries_) n += foreign.size();
  return n / 2;
}

AveragedPrediction average_prediction(const ModelParams& params, const IcsDataset& dataset, int identity,
                                      int source_camera, int target_camera) {
  check_cameras(dataset, source_camera, target_camera);
  std::vector<SharedFeature> features;
  for (const auto& s : dataset.camera(source_camera).samples) {
    if (s.person_label == identity) features.push_back(forward_shared(params, s.features));
  }
  if (features.empty()) {
    fail(ErrorCode::kEmptyIdentity, describe({source_camera, identity}) + " has no images");
  }
  std::vector<const SharedFeature*> refs;
  for (const auto& f : features) refs.push_back(&f);
  return {source_camera, identity, target_camera, mean_prediction(params, refs, target_camera)};
}

int nominate(std::span<const double> probs) {
  int best = 0;
  for (std::size_t k = 1; k < probs.size(); ++k) {
    if (probs[k] > probs[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
  }
  return best;
}

int nominate(const AveragedPrediction& avg) { return nominate(avg.probs); }

MatchPair cyclic_match(const ModelParams& params, const IcsDataset& dataset, int identity, int source_camera,
                       int target_camera) {
  MatchPair m;
  m.identity_a = identity;
  m.camera_a = source_camera;
  m.camera_b = target_camera;
  m.identity_b = nominate(average_prediction(params, dataset, identity, source_camera, target_camera));
  m.backward_argmax = nominate(average_prediction(params, dataset, m.identity_b, target_camera, source_camera));
  m.verified = m.backward_argmax == identity;
  return m;
}

MultiLabelSet discover_all(const ModelParams& params, const IcsDataset& dataset) {
  const int m = dataset.num_cameras;
  if (params.num_heads() != m) {
    fail(ErrorCode::kIncompatibleArtifacts, "model has " + std::to_string(params.num_heads()) +
                                                " heads for " + std::to_string(m) + " cameras");
  }
  for (int p = 0; p < m; ++p) {
    if (params.heads[static_cast<std::size_t>(p)].out != dataset.cameras[static_cast<std::size_t>(p)].num_identities) {
      fail(ErrorCode::kIncompatibleArtifacts, "head " + std::to_string(p + 1) + " size differs from camera identity count");
    }
  }
  // members[p][y]: shared features of identity y in camera p+1
  std::vector<std::vector<SharedFeature>> features(static_cast<std::size_t>(m));
  std::vector<std::vector<std::vector<const SharedFeature*>>> members(static_cast<std::size_t>(m));
  for (int p = 0; p < m; ++p) {
    const auto& cam = dataset.cameras[static_cast<std::size_t>(p)];
    auto& feats = features[static_cast<std::size_t>(p)];
    feats.reserve(cam.samples.size());
    for (const auto& s : cam.samples) feats.push_back(forward_shared(params, s.features));
    auto& groups = members[static_cast<std::size_t>(p)];
    groups.resize(static_cast<std::size_t>(cam.num_identities));
    for (std::size_t i = 0; i < cam.samples.size(); ++i) {
      groups[static_cast<std::size_t>(cam.samples[i].person_label)].push_back(&feats[i]);
    }
    for (std::size_t y = 0; y < groups.size(); ++y) {
      if (groups[y].empty()) {
        fail(ErrorCode::kEmptyIdentity, describe({p + 1, static_cast<int>(y)}) + " has no images");
      }
    }
  }

  // nominee[p][q][y] = l* for identity y of camera p+1 predicted into camera q+1
  std::vector<std::vector<std::vector<int>>> nominee(static_cast<std::size_t>(m),
                                                     std::vector<std::vector<int>>(static_cast<std::size_t>(m)));
  for (int p = 0; p < m; ++p) {
    for (int q = 0; q < m; ++q) {
      if (p == q) continue;
      auto& row = nominee[static_cast<std::size_t>(p)][static_cast<std::size_t>(q)];
      for (const auto& group : members[static_cast<std::size_t>(p)]) {
        row.push_back(nominate(mean_prediction(params, group, q + 1)));
      }
    }
  }

  MultiLabelSet set;
  for (int p = 0; p < m; ++p) {
    for (int q = 0; q < m; ++q) {
      if (p == q) continue;
      const auto& forward = nominee[static_cast<std::size_t>(p)][static_cast<std::size_t>(q)];
      const auto& back = nominee[static_cast<std::size_t>(q)][static_cast<std::size_t>(p)];
      for (std::size_t y = 0; y < forward.size(); ++y) {
        const int l = forward[y];
        if (back[static_cast<std::size_t>(l)] == static_cast<int>(y)) {
          set.add_pair({p + 1, static_cast<int>(y)}, {q + 1, l});
        }
      }
    }
  }
  return set;
}

AugmentedLabels apply_multilabels(const IcsDataset& dataset, const MultiLabelSet& set) {
  auto known = [&dataset](const IdentityKey& k) {
    return k.camera_id >= 1 && k.camera_id <= dataset.num_cameras && k.person_label >= 0 &&
           k.person_label < dataset.cameras[static_cast<std::size_t>(k.camera_id - 1)].num_identities;
  };
  AugmentedLabels out;
  for (const auto& [key, foreign] : set.entries()) {
    if (!known(key)) fail(ErrorCode::kStaleAssignment, describe(key) + " is not in the dataset");
    auto& labels = out[key];
    for (const auto& [camera, label] : foreign) {
      const IdentityKey f{camera, label};
      if (!known(f)) fail(ErrorCode::kStaleAssignment, describe(f) + " is not in the dataset");
      labels.push_back(f);
    }
  }
  return out;
}

std::optional<double> association_precision(const MultiLabelSet& set, const IcsDataset& dataset) {
  if (!dataset.ground_truth) return std::nullopt;
  const auto pairs = set.pairs();
  if (pairs.empty()) return std::nullopt;
  std::size_t correct = 0;
  for (const auto& pr : pairs) {
    auto a = dataset.ground_truth->find(pr.a);
    auto b = dataset.ground_truth->find(pr.b);
    if (a != dataset.ground_truth->end() && b != dataset.ground_truth->end() && a->second == b->second) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

std::vector<AssociationDumpRow> association_dump(const MultiLabelSet& set, const IcsDataset& dataset, int round) {
  std::vector<AssociationDumpRow> rows;
  for (const auto& pr : set.pairs()) {
    AssociationDumpRow row{round, pr.a.camera_id, pr.a.person_label, pr.b.camera_id, pr.b.person_label,
                           PairCorrectness::kUnknown};
    if (dataset.ground_truth) {
      auto a = dataset.ground_truth->find(pr.a);
      auto b = dataset.ground_truth->find(pr.b);
      if (a != dataset.ground_truth->end() && b != dataset.ground_truth->end()) {
        row.correctness = a->second == b->second ? PairCorrectness::kCorrect : PairCorrectness::kIncorrect;
      }
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace mtml
