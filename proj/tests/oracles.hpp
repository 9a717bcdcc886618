// Naive reference implementations used as test oracles. They deliberately
// avoid the library's own forward/softmax/association code paths.
#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <unistd.h>

#include "mtml/association.hpp"
#include "mtml/datagen.hpp"
#include "mtml/error.hpp"
#include "mtml/model.hpp"

namespace oracle {

using mtml::IdentityKey;
using mtml::ModelParams;
using mtml::Vector;

template <class F>
mtml::ErrorCode error_of(F&& f) {
  try {
    f();
  } catch (const mtml::Error& e) {
    return e.code();
  }
  return mtml::ErrorCode::kOk;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("mtml_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline Vector dense_apply(const mtml::Dense& layer, const Vector& x, bool relu) {
  Vector y(static_cast<std::size_t>(layer.out));
  for (int j = 0; j < layer.out; ++j) {
    double acc = layer.bias[static_cast<std::size_t>(j)];
    for (int i = 0; i < layer.in; ++i) acc += layer.w(i, j) * x[static_cast<std::size_t>(i)];
    y[static_cast<std::size_t>(j)] = relu ? std::max(acc, 0.0) : acc;
  }
  return y;
}

inline Vector shared_feature(const ModelParams& params, const Vector& x) {
  Vector h = x;
  for (std::size_t l = 0; l < params.encoder.size(); ++l) {
    h = dense_apply(params.encoder[l], h, l + 1 < params.encoder.size());
  }
  return h;
}

inline Vector probabilities(const ModelParams& params, const Vector& x, int camera) {
  const Vector z = dense_apply(params.heads[static_cast<std::size_t>(camera - 1)], shared_feature(params, x), false);
  const double top = *std::max_element(z.begin(), z.end());
  Vector p(z.size());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) total += (p[i] = std::exp(z[i] - top));
  for (auto& v : p) v /= total;
  return p;
}

// Mean of head-q probabilities over every image of identity `label` in camera p.
inline Vector averaged(const ModelParams& params, const mtml::IcsDataset& ds, int p, int label, int q) {
  Vector acc(static_cast<std::size_t>(ds.cameras[static_cast<std::size_t>(q - 1)].num_identities), 0.0);
  int n = 0;
  for (const auto& s : ds.cameras[static_cast<std::size_t>(p - 1)].samples) {
    if (s.person_label != label) continue;
    const Vector pr = probabilities(params, s.features, q);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += pr[i];
    ++n;
  }
  for (auto& v : acc) v /= n;
  return acc;
}

inline int first_argmax(const Vector& v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i) {
    if (v[static_cast<std::size_t>(i)] > v[static_cast<std::size_t>(best)]) best = i;
  }
  return best;
}

// Every cyclically consistent pair, keyed with the lower camera first.
inline std::set<mtml::AssociatedPair> brute_force_pairs(const ModelParams& params, const mtml::IcsDataset& ds) {
  std::set<mtml::AssociatedPair> out;
  for (int p = 1; p <= ds.num_cameras; ++p) {
    for (int q = 1; q <= ds.num_cameras; ++q) {
      if (p == q) continue;
      for (int k = 0; k < ds.cameras[static_cast<std::size_t>(p - 1)].num_identities; ++k) {
        const int l = first_argmax(averaged(params, ds, p, k, q));
        const int t = first_argmax(averaged(params, ds, q, l, p));
        if (t != k) continue;
        IdentityKey a{p, k};
        IdentityKey b{q, l};
        if (b < a) std::swap(a, b);
        out.insert({a, b});
      }
    }
  }
  return out;
}

// Random toy dataset: M cameras, 1..max_ids identities each, 1..max_imgs images each.
inline mtml::IcsDataset toy_dataset(std::mt19937_64& rng, int cameras, int feature_dim, int max_ids, int max_imgs) {
  std::uniform_int_distribution<int> ids(1, max_ids);
  std::uniform_int_distribution<int> imgs(1, max_imgs);
  std::normal_distribution<double> gauss(0.0, 1.0);
  mtml::IcsDataset ds;
  ds.num_cameras = cameras;
  ds.feature_dim = feature_dim;
  for (int p = 1; p <= cameras; ++p) {
    mtml::CameraView view;
    view.camera_id = p;
    view.num_identities = ids(rng);
    for (int k = 0; k < view.num_identities; ++k) {
      const int n = imgs(rng);
      for (int i = 0; i < n; ++i) {
        mtml::Sample s;
        s.camera_id = p;
        s.person_label = k;
        s.features.resize(static_cast<std::size_t>(feature_dim));
        for (auto& v : s.features) v = gauss(rng);
        view.samples.push_back(std::move(s));
      }
    }
    ds.cameras.push_back(std::move(view));
  }
  return ds;
}

struct GradientCheck {
  double max_relative_error = 0.0;
  std::size_t parameters = 0;
};

// Central differences on every parameter. Relative error uses
// max(|analytic|, |numeric|, floor) as denominator so that exactly-zero
// entries (dead ReLUs, absent heads) are judged on absolute error.
inline GradientCheck finite_difference_check(const ModelParams& params, std::span<const mtml::Sample> batch,
                                             const mtml::LossSpec& spec, double step = 1e-5,
                                             double floor = 1e-6) {
  const auto analytic = mtml::backward(params, batch, spec);
  ModelParams probe = params;
  auto values = mtml::parameter_tensors(probe);
  const auto grads = mtml::parameter_tensors(analytic.grads);
  GradientCheck out;
  for (std::size_t t = 0; t < values.size(); ++t) {
    for (std::size_t i = 0; i < values[t].size(); ++i) {
      const double keep = values[t][i];
      values[t][i] = keep + step;
      const double up = mtml::evaluate_loss(probe, batch, spec).total;
      values[t][i] = keep - step;
      const double down = mtml::evaluate_loss(probe, batch, spec).total;
      values[t][i] = keep;
      const double numeric = (up - down) / (2.0 * step);
      const double a = grads[t][i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      out.max_relative_error = std::max(out.max_relative_error, rel);
      ++out.parameters;
    }
  }
  return out;
}

// A batch mixing native labels from every camera with foreign labels on
// some identities, for gradient checks.
struct MixedFixture {
  mtml::IcsDataset dataset;
  ModelParams params;
  mtml::AugmentedLabels multilabels;
  std::vector<mtml::Sample> batch;
};

inline MixedFixture mixed_fixture(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  MixedFixture f;
  f.dataset = toy_dataset(rng, 3, 4, 4, 3);
  for (auto& cam : f.dataset.cameras) cam.num_identities = std::max(cam.num_identities, 2);
  // Make sure every declared identity has at least one image.
  for (auto& cam : f.dataset.cameras) {
    std::set<int> seen;
    for (const auto& s : cam.samples) seen.insert(s.person_label);
    for (int k = 0; k < cam.num_identities; ++k) {
      if (seen.count(k)) continue;
      mtml::Sample s;
      s.camera_id = cam.camera_id;
      s.person_label = k;
      s.features = {0.3 * k, -0.2, 0.5, 0.1 * cam.camera_id};
      cam.samples.push_back(s);
    }
  }
  mtml::ModelConfig mc;
  mc.input_dim = 4;
  mc.hidden_dims = {6};
  mc.feature_dim = 5;
  mc.heads = f.dataset.identity_counts();
  mc.seed = seed;
  f.params = mtml::init_params(mc);
  // Shift biases off zero so no ReLU sits on its kink.
  std::normal_distribution<double> gauss(0.0, 0.3);
  for (auto& layer : f.params.encoder) {
    for (auto& b : layer.bias) b = gauss(rng);
  }
  f.multilabels[{1, 0}] = {{2, 1}, {3, 0}};
  f.multilabels[{2, 1}] = {{1, 0}};
  f.multilabels[{3, 0}] = {{1, 0}};
  for (const auto& cam : f.dataset.cameras) {
    for (const auto& s : cam.samples) f.batch.push_back(s);
  }
  return f;
}

inline double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace oracle
