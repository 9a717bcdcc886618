#include "mtml/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "mtml/error.hpp"

namespace mtml {

namespace {

void check_tags(const Matrix& dist, std::span<const RetrievalTag> probe, std::span<const RetrievalTag> gallery) {
  if (dist.rows != probe.size() || dist.cols != gallery.size()) {
    fail(ErrorCode::kShapeError, "distance matrix does not match probe/gallery sizes");
  }
}

// Relevance flags of the gallery ranked by distance (ties by index), with
// same-identity same-camera entries removed.
std::vector<bool> ranked_relevance(const Matrix& dist, std::size_t row, const RetrievalTag& probe,
                                   std::span<const RetrievalTag> gallery) {
  std::vector<std::size_t> order(gallery.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dist(row, a) < dist(row, b); });
  std::vector<bool> relevant;
  relevant.reserve(order.size());
  for (std::size_t g : order) {
    const auto& tag = gallery[g];
    const bool same_id = tag.global_id == probe.global_id;
    if (same_id && tag.camera_id == probe.camera_id) continue;
    relevant.push_back(same_id);
  }
  return relevant;
}

}  // namespace

std::vector<SharedFeature> extract_features(const ModelParams& params, std::span<const Sample> samples) {
  std::vector<SharedFeature> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(forward_shared(params, s.features));
  return out;
}

Matrix distance_matrix(std::span<const SharedFeature> probe, std::span<const SharedFeature> gallery) {
  Matrix m;
  m.rows = probe.size();
  m.cols = gallery.size();
  m.data.assign(m.rows * m.cols, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < m.cols; ++j) {
      const auto& a = probe[i];
      const auto& b = gallery[j];
      if (a.size() != b.size()) fail(ErrorCode::kShapeError, "feature lengths differ");
      double acc = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        acc += d * d;
      }
      m(i, j) = std::sqrt(acc);
    }
  }
  return m;
}

CmcResult cmc(const Matrix& dist, std::span<const RetrievalTag> probe, std::span<const RetrievalTag> gallery,
              std::span<const int> ranks) {
  check_tags(dist, probe, gallery);
  CmcResult out;
  std::map<int, int> hits;
  for (int r : ranks) {
    if (r < 1) fail(ErrorCode::kInvalidArgument, "CMC ranks must be >= 1");
    hits[r] = 0;
  }
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const auto relevant = ranked_relevance(dist, i, probe[i], gallery);
    auto first = std::find(relevant.begin(), relevant.end(), true);
    if (first == relevant.end()) {
      ++out.num_excluded;
      continue;
    }
    ++out.num_evaluated;
    const auto rank = static_cast<int>(first - relevant.begin()) + 1;
    for (auto& [r, h] : hits) {
      if (rank <= r) ++h;
    }
  }
  for (const auto& [r, h] : hits) {
    out.rates[r] = out.num_evaluated == 0 ? 0.0 : static_cast<double>(h) / out.num_evaluated;
  }
  return out;
}

MapResult mean_average_precision(const Matrix& dist, std::span<const RetrievalTag> probe,
                                 std::span<const RetrievalTag> gallery) {
  check_tags(dist, probe, gallery);
  MapResult out;
  double sum = 0.0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const auto relevant = ranked_relevance(dist, i, probe[i], gallery);
    double ap = 0.0;
    int found = 0;
    for (std::size_t k = 0; k < relevant.size(); ++k) {
      if (!relevant[k]) continue;
      ++found;
      ap += static_cast<double>(found) / static_cast<double>(k + 1);
    }
    if (found == 0) {
      ++out.num_excluded;
      continue;
    }
    ++out.num_evaluated;
    sum += ap / found;
  }
  out.score = out.num_evaluated == 0 ? 0.0 : sum / out.num_evaluated;
  return out;
}

EvalReport evaluate(const RetrievalProblem& problem) {
  if (problem.probe.empty() || problem.gallery.empty()) {
    fail(ErrorCode::kInvalidArgument, "probe and gallery must be non-empty");
  }
  if (problem.probe.size() != problem.probe_tags.size() || problem.gallery.size() != problem.gallery_tags.size()) {
    fail(ErrorCode::kShapeError, "feature and tag counts differ");
  }
  const Matrix dist = distance_matrix(problem.probe, problem.gallery);
  const auto c = cmc(dist, problem.probe_tags, problem.gallery_tags, kCmcRanks);
  const auto m = mean_average_precision(dist, problem.probe_tags, problem.gallery_tags);
  if (c.num_evaluated == 0) fail(ErrorCode::kInvalidArgument, "no probe has a cross-camera match");
  return {c.rates, m.score, c.num_evaluated, c.num_excluded};
}

ProbeGallerySplit split_probe_gallery(const IcsDataset& dataset, double probe_fraction, std::uint64_t seed) {
  if (!dataset.ground_truth) fail(ErrorCode::kMissingGroundTruth, "evaluation needs global identities");
  if (!(probe_fraction > 0.0 && probe_fraction < 1.0)) {
    fail(ErrorCode::kInvalidArgument, "probe fraction must be in (0, 1)");
  }
  std::mt19937_64 rng(seed);
  ProbeGallerySplit split;
  for (const auto& cam : dataset.cameras) {
    std::vector<std::vector<std::size_t>> by_label(static_cast<std::size_t>(cam.num_identities));
    for (std::size_t i = 0; i < cam.samples.size(); ++i) {
      by_label[static_cast<std::size_t>(cam.samples[i].person_label)].push_back(i);
    }
    for (auto& images : by_label) {
      const auto n = static_cast<long>(images.size());
      long held = 0;
      if (n >= 2) held = std::clamp(std::lround(probe_fraction * static_cast<double>(n)), 1L, n - 1);
      std::shuffle(images.begin(), images.end(), rng);
      std::sort(images.begin(), images.begin() + held);
      std::sort(images.begin() + held, images.end());
      for (long k = 0; k < n; ++k) {
        const auto& s = cam.samples[images[static_cast<std::size_t>(k)]];
        (k < held ? split.probe : split.gallery).push_back(s);
      }
    }
  }
  if (split.probe.empty()) fail(ErrorCode::kInvalidArgument, "split produced no probes");
  return split;
}

EvalReport evaluate_model(const ModelParams& params, const IcsDataset& dataset, double probe_fraction,
                          std::uint64_t seed, Matrix* distances_out) {
  if (params.config.input_dim != dataset.feature_dim) {
    fail(ErrorCode::kIncompatibleArtifacts, "checkpoint expects " + std::to_string(params.config.input_dim) +
                                                " features, dataset has " + std::to_string(dataset.feature_dim));
  }
  const auto split = split_probe_gallery(dataset, probe_fraction, seed);
  RetrievalProblem problem;
  problem.probe = extract_features(params, split.probe);
  problem.gallery = extract_features(params, split.gallery);
  for (const auto& s : split.probe) problem.probe_tags.push_back({*s.global_id, s.camera_id});
  for (const auto& s : split.gallery) problem.gallery_tags.push_back({*s.global_id, s.camera_id});
  if (distances_out) *distances_out = distance_matrix(problem.probe, problem.gallery);
  return evaluate(problem);
}

std::vector<DynamicsRow> association_dynamics_report(std::span<const AssociationDumpRow> rows,
                                                     std::span<const int> rounds) {
  struct Tally {
    std::size_t pairs = 0;
    std::size_t correct = 0;
    bool unknown = false;
  };
  std::map<int, Tally> tally;
  for (int r : rounds) tally[r];
  for (const auto& row : rows) {
    auto it = tally.find(row.round);
    if (it == tally.end()) fail(ErrorCode::kInvalidArgument, "dump row for unlisted round " + std::to_string(row.round));
    auto& t = it->second;
    ++t.pairs;
    if (row.correctness == PairCorrectness::kCorrect) ++t.correct;
    if (row.correctness == PairCorrectness::kUnknown) t.unknown = true;
  }
  std::vector<DynamicsRow> out;
  for (const auto& [round, t] : tally) {
    DynamicsRow d{round, t.pairs, std::nullopt};
    if (t.pairs > 0 && !t.unknown) d.precision = static_cast<double>(t.correct) / static_cast<double>(t.pairs);
    out.push_back(d);
  }
  return out;
}

}  // namespace mtml
