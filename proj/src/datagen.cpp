#include "mtml/datagen.hpp"

#include <algorithm>
#include <cmath>

#include "mtml/error.hpp"
#include "text.hpp"

namespace mtml {

namespace {

constexpr int kPresenceRetries = 64;

std::mt19937_64 make_stream(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
  return std::mt19937_64(seq);
}

struct CameraTransform {
  Vector offset;
  std::vector<Vector> mixing;  // empty when there is no distortion
};

Vector project_through(const CameraTransform& t, const Vector& x) {
  Vector y = x;
  if (!t.mixing.empty()) {
    for (std::size_t i = 0; i < y.size(); ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < x.size(); ++j) acc += t.mixing[i][j] * x[j];
      y[i] = acc;
    }
  }
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += t.offset[i];
  return y;
}

std::vector<CameraTransform> draw_cameras(const SynthConfig& c) {
  auto rng = make_stream(c.seed, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<CameraTransform> cams(static_cast<std::size_t>(c.num_cameras));
  const auto f = static_cast<std::size_t>(c.feature_dim);
  for (auto& cam : cams) {
    cam.offset.resize(f);
    for (auto& v : cam.offset) v = c.camera_shift_scale * normal(rng);
    if (c.camera_distortion > 0.0) {
      const double scale = c.camera_distortion / std::sqrt(static_cast<double>(f));
      cam.mixing.assign(f, Vector(f, 0.0));
      for (std::size_t i = 0; i < f; ++i) {
        for (std::size_t j = 0; j < f; ++j) {
          cam.mixing[i][j] = (i == j ? 1.0 : 0.0) + scale * normal(rng);
        }
      }
    }
  }
  return cams;
}

// Draws identities [first_global, first_global + count) through the cameras.
IcsDataset draw_identities(const SynthConfig& c, const std::vector<CameraTransform>& cams,
                           int first_global, int count, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution present(c.camera_presence_probability);
  const auto f = static_cast<std::size_t>(c.feature_dim);

  std::vector<Vector> centers(static_cast<std::size_t>(count), Vector(f));
  for (auto& center : centers) {
    for (auto& v : center) v = normal(rng);
  }

  std::vector<std::vector<int>> members(static_cast<std::size_t>(c.num_cameras));
  for (int p = 0; p < c.num_cameras; ++p) {
    auto& list = members[static_cast<std::size_t>(p)];
    for (int attempt = 0; attempt < kPresenceRetries && list.empty(); ++attempt) {
      for (int g = 0; g < count; ++g) {
        if (present(rng)) list.push_back(g);
      }
    }
    if (list.empty()) {
      fail(ErrorCode::kDegenerateCamera,
           "camera " + std::to_string(p + 1) + " received no identities after " +
               std::to_string(kPresenceRetries) + " attempts");
    }
  }

  IcsDataset ds;
  ds.num_cameras = c.num_cameras;
  ds.feature_dim = c.feature_dim;
  ds.ground_truth.emplace();
  for (int p = 0; p < c.num_cameras; ++p) {
    CameraView view;
    view.camera_id = p + 1;
    const auto& list = members[static_cast<std::size_t>(p)];
    view.num_identities = static_cast<int>(list.size());
    for (std::size_t label = 0; label < list.size(); ++label) {
      const int g = list[label];
      const int global = first_global + g;
      (*ds.ground_truth)[{view.camera_id, static_cast<int>(label)}] = global;
      const Vector base = project_through(cams[static_cast<std::size_t>(p)], centers[static_cast<std::size_t>(g)]);
      for (int k = 0; k < c.images_per_identity_per_camera; ++k) {
        Sample s;
        s.features = base;
        for (auto& v : s.features) v += c.cluster_spread * normal(rng);
        s.person_label = static_cast<int>(label);
        s.camera_id = view.camera_id;
        s.global_id = global;
        view.samples.push_back(std::move(s));
      }
    }
    ds.cameras.push_back(std::move(view));
  }
  return ds;
}

}  // namespace

const CameraView& IcsDataset::camera(int camera_id) const {
  if (camera_id < 1 || camera_id > static_cast<int>(cameras.size())) {
    fail(ErrorCode::kInvalidArgument, "no camera " + std::to_string(camera_id));
  }
  return cameras[static_cast<std::size_t>(camera_id - 1)];
}

std::size_t IcsDataset::num_samples() const {
  std::size_t n = 0;
  for (const auto& cam : cameras) n += cam.samples.size();
  return n;
}

std::vector<int> IcsDataset::identity_counts() const {
  std::vector<int> counts;
  counts.reserve(cameras.size());
  for (const auto& cam : cameras) counts.push_back(cam.num_identities);
  return counts;
}

void IcsDataset::validate() const {
  if (num_cameras < 1 || static_cast<int>(cameras.size()) != num_cameras) {
    fail(ErrorCode::kInvalidArgument, "camera count mismatch");
  }
  if (feature_dim < 1) fail(ErrorCode::kInvalidArgument, "feature_dim must be positive");
  for (std::size_t p = 0; p < cameras.size(); ++p) {
    const auto& cam = cameras[p];
    const std::string where = "camera " + std::to_string(cam.camera_id);
    if (cam.camera_id != static_cast<int>(p) + 1) {
      fail(ErrorCode::kInvalidArgument, where + " out of order (expected " + std::to_string(p + 1) + ")");
    }
    if (cam.num_identities < 1) fail(ErrorCode::kDegenerateCamera, where + " has no identities");
    std::vector<bool> used(static_cast<std::size_t>(cam.num_identities), false);
    std::map<int, int> label_to_global;
    std::map<int, int> global_to_label;
    for (const auto& s : cam.samples) {
      if (s.camera_id != cam.camera_id) fail(ErrorCode::kInvalidSample, where + " holds a foreign sample");
      if (s.person_label < 0 || s.person_label >= cam.num_identities) {
        fail(ErrorCode::kLabelOutOfRange, where + " label " + std::to_string(s.person_label));
      }
      if (static_cast<int>(s.features.size()) != feature_dim) {
        fail(ErrorCode::kInvalidSample, where + " sample has wrong feature length");
      }
      for (double v : s.features) {
        if (!std::isfinite(v)) fail(ErrorCode::kInvalidSample, where + " sample has non-finite feature");
      }
      used[static_cast<std::size_t>(s.person_label)] = true;
      if (s.global_id) {
        auto [it, fresh] = label_to_global.emplace(s.person_label, *s.global_id);
        auto [jt, fresh2] = global_to_label.emplace(*s.global_id, s.person_label);
        if (it->second != *s.global_id || jt->second != s.person_label) {
          fail(ErrorCode::kInvalidSample, where + " label/global id inconsistency");
        }
      }
    }
    for (std::size_t label = 0; label < used.size(); ++label) {
      if (!used[label]) {
        fail(ErrorCode::kDegenerateCamera, where + " label " + std::to_string(label) + " has no samples");
      }
    }
  }
}

void SynthConfig::validate() const {
  if (num_global_identities < 1 || num_cameras < 1 || feature_dim < 1 ||
      images_per_identity_per_camera < 1) {
    fail(ErrorCode::kInvalidArgument, "synthetic config counts must be positive");
  }
  if (!(camera_presence_probability > 0.0 && camera_presence_probability <= 1.0)) {
    fail(ErrorCode::kInvalidArgument, "camera_presence_probability must be in (0, 1]");
  }
  if (!(cluster_spread > 0.0)) fail(ErrorCode::kInvalidArgument, "cluster_spread must be > 0");
  if (!(camera_shift_scale >= 0.0)) fail(ErrorCode::kInvalidArgument, "camera_shift_scale must be >= 0");
  if (!(camera_distortion >= 0.0)) fail(ErrorCode::kInvalidArgument, "camera_distortion must be >= 0");
}

IcsDataset generate_synthetic(const SynthConfig& config) {
  config.validate();
  const auto cams = draw_cameras(config);
  auto rng = make_stream(config.seed, 1);
  return draw_identities(config, cams, 0, config.num_global_identities, rng);
}

DatasetSplit generate_synthetic_split(const SynthConfig& config, int test_identities) {
  if (test_identities < 1) fail(ErrorCode::kInvalidArgument, "test_identities must be positive");
  DatasetSplit split;
  split.train = generate_synthetic(config);
  const auto cams = draw_cameras(config);
  auto rng = make_stream(config.seed, 2);
  split.test = draw_identities(config, cams, config.num_global_identities, test_identities, rng);
  return split;
}

IcsDataset relabel_to_ics(std::span<const Annotation> annotations) {
  if (annotations.empty()) fail(ErrorCode::kDegenerateCamera, "no annotations");
  int max_camera = 0;
  int min_camera = annotations.front().camera_id;
  const std::size_t dim = annotations.front().features.size();
  for (const auto& a : annotations) {
    max_camera = std::max(max_camera, a.camera_id);
    min_camera = std::min(min_camera, a.camera_id);
    if (a.features.size() != dim || dim == 0) {
      fail(ErrorCode::kInvalidSample, "inconsistent feature length");
    }
    for (double v : a.features) {
      if (!std::isfinite(v)) fail(ErrorCode::kInvalidSample, "non-finite feature");
    }
  }
  if (min_camera != 1) fail(ErrorCode::kDegenerateCamera, "camera ids must start at 1");

  IcsDataset ds;
  ds.num_cameras = max_camera;
  ds.feature_dim = static_cast<int>(dim);
  ds.ground_truth.emplace();
  std::vector<std::map<int, int>> label_of(static_cast<std::size_t>(max_camera));
  ds.cameras.resize(static_cast<std::size_t>(max_camera));
  for (int p = 0; p < max_camera; ++p) ds.cameras[static_cast<std::size_t>(p)].camera_id = p + 1;

  for (const auto& a : annotations) {
    const auto p = static_cast<std::size_t>(a.camera_id - 1);
    auto& labels = label_of[p];
    auto [it, fresh] = labels.emplace(a.global_id, static_cast<int>(labels.size()));
    if (fresh) (*ds.ground_truth)[{a.camera_id, it->second}] = a.global_id;
    ds.cameras[p].samples.push_back(Sample{a.features, it->second, a.camera_id, a.global_id});
  }
  for (std::size_t p = 0; p < ds.cameras.size(); ++p) {
    ds.cameras[p].num_identities = static_cast<int>(label_of[p].size());
    if (ds.cameras[p].samples.empty()) {
      fail(ErrorCode::kDegenerateCamera, "camera " + std::to_string(p + 1) + " has no samples");
    }
  }
  return ds;
}

BatchSampler::BatchSampler(const IcsDataset& dataset, int persons_per_camera, int images_per_person)
    : dataset_(&dataset), persons_(persons_per_camera), images_(images_per_person) {
  if (persons_ < 1 || images_ < 1) {
    fail(ErrorCode::kInvalidArgument, "persons_per_camera and images_per_person must be >= 1");
  }
  index_.resize(dataset.cameras.size());
  for (std::size_t p = 0; p < dataset.cameras.size(); ++p) {
    const auto& cam = dataset.cameras[p];
    if (cam.num_identities < persons_) {
      fail(ErrorCode::kInsufficientIdentities,
           "camera " + std::to_string(cam.camera_id) + " has " + std::to_string(cam.num_identities) +
               " identities, need " + std::to_string(persons_));
    }
    index_[p].resize(static_cast<std::size_t>(cam.num_identities));
    for (std::size_t i = 0; i < cam.samples.size(); ++i) {
      index_[p][static_cast<std::size_t>(cam.samples[i].person_label)].push_back(i);
    }
  }
}

std::size_t BatchSampler::batch_size() const {
  return index_.size() * static_cast<std::size_t>(persons_) * static_cast<std::size_t>(images_);
}

Batch BatchSampler::draw(std::mt19937_64& rng) const {
  Batch batch;
  batch.samples.reserve(batch_size());
  for (std::size_t p = 0; p < index_.size(); ++p) {
    const auto& cam = dataset_->cameras[p];
    const auto& ids = index_[p];
    // Partial Fisher-Yates: P distinct identities uniformly without replacement.
    std::vector<std::size_t> order(ids.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (int i = 0; i < persons_; ++i) {
      std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), order.size() - 1);
      std::swap(order[static_cast<std::size_t>(i)], order[pick(rng)]);
    }
    for (int i = 0; i < persons_; ++i) {
      auto images = ids[order[static_cast<std::size_t>(i)]];
      if (static_cast<int>(images.size()) >= images_) {
        for (int k = 0; k < images_; ++k) {
          std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(k), images.size() - 1);
          std::swap(images[static_cast<std::size_t>(k)], images[pick(rng)]);
          batch.samples.push_back(cam.samples[images[static_cast<std::size_t>(k)]]);
        }
      } else {
        std::uniform_int_distribution<std::size_t> pick(0, images.size() - 1);
        for (int k = 0; k < images_; ++k) batch.samples.push_back(cam.samples[images[pick(rng)]]);
      }
    }
    batch.per_camera_counts[cam.camera_id] = persons_ * images_;
  }
  return batch;
}

Batch sample_batch(const IcsDataset& dataset, std::mt19937_64& rng, int persons_per_camera,
                   int images_per_person) {
  return BatchSampler(dataset, persons_per_camera, images_per_person).draw(rng);
}

// File layout:
//   MTMLDS,<version>,<M>,<F>,<N_1>,...,<N_M>
//   <camera_id>,<person_label>,<global_id|->,<f_1>,...,<f_F>
std::string serialize_dataset(const IcsDataset& dataset) {
  std::string out = "MTMLDS," + std::to_string(kDatasetFormatVersion) + "," +
                    std::to_string(dataset.num_cameras) + "," + std::to_string(dataset.feature_dim);
  for (const auto& cam : dataset.cameras) out += "," + std::to_string(cam.num_identities);
  out += '\n';
  for (const auto& cam : dataset.cameras) {
    for (const auto& s : cam.samples) {
      out += std::to_string(s.camera_id);
      out += ',';
      out += std::to_string(s.person_label);
      out += ',';
      out += s.global_id ? std::to_string(*s.global_id) : std::string("-");
      for (double v : s.features) {
        out += ',';
        text::append_real(out, v);
      }
      out += '\n';
    }
  }
  return out;
}

IcsDataset parse_dataset(std::string_view data) {
  const auto rows = text::lines(data);
  if (rows.empty()) fail(ErrorCode::kParseError, "empty dataset file");

  auto header = text::split(rows[0], ',');
  if (header.size() < 4 || text::trim(header[0]) != "MTMLDS") {
    fail(ErrorCode::kParseError, "line 1: missing MTMLDS header");
  }
  int version = 0;
  if (!text::parse_int(header[1], version)) fail(ErrorCode::kParseError, "line 1: bad version field");
  if (version != kDatasetFormatVersion) {
    fail(ErrorCode::kUnsupportedVersion, "dataset version " + std::to_string(version));
  }
  IcsDataset ds;
  if (!text::parse_int(header[2], ds.num_cameras) || !text::parse_int(header[3], ds.feature_dim) ||
      ds.num_cameras < 1 || ds.feature_dim < 1) {
    fail(ErrorCode::kParseError, "line 1: bad camera count or feature dimension");
  }
  if (header.size() != 4 + static_cast<std::size_t>(ds.num_cameras)) {
    fail(ErrorCode::kParseError, "line 1: expected " + std::to_string(ds.num_cameras) + " identity counts");
  }
  for (int p = 0; p < ds.num_cameras; ++p) {
    CameraView view;
    view.camera_id = p + 1;
    if (!text::parse_int(header[4 + static_cast<std::size_t>(p)], view.num_identities) ||
        view.num_identities < 1) {
      fail(ErrorCode::kParseError, "line 1: bad identity count for camera " + std::to_string(p + 1));
    }
    ds.cameras.push_back(std::move(view));
  }

  std::size_t with_gt = 0;
  const std::size_t expected_fields = 3 + static_cast<std::size_t>(ds.feature_dim);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const std::string where = "line " + std::to_string(r + 1);
    auto fields = text::split(rows[r], ',');
    if (fields.size() != expected_fields) {
      fail(ErrorCode::kParseError, where + ": expected " + std::to_string(expected_fields) + " fields, got " +
                                       std::to_string(fields.size()));
    }
    Sample s;
    if (!text::parse_int(fields[0], s.camera_id) || s.camera_id < 1 || s.camera_id > ds.num_cameras) {
      fail(ErrorCode::kParseError, where + ": bad camera id");
    }
    auto& view = ds.cameras[static_cast<std::size_t>(s.camera_id - 1)];
    if (!text::parse_int(fields[1], s.person_label) || s.person_label < 0 ||
        s.person_label >= view.num_identities) {
      fail(ErrorCode::kParseError, where + ": person label out of range");
    }
    if (text::trim(fields[2]) != "-") {
      int g = 0;
      if (!text::parse_int(fields[2], g)) fail(ErrorCode::kParseError, where + ": bad global id");
      s.global_id = g;
      ++with_gt;
    }
    s.features.resize(static_cast<std::size_t>(ds.feature_dim));
    for (std::size_t k = 0; k < s.features.size(); ++k) {
      if (!text::parse_real(fields[3 + k], s.features[k]) || !std::isfinite(s.features[k])) {
        fail(ErrorCode::kParseError, where + ": bad feature " + std::to_string(k + 1));
      }
    }
    view.samples.push_back(std::move(s));
  }

  const std::size_t total = ds.num_samples();
  if (total == 0) fail(ErrorCode::kParseError, "dataset has no samples");
  if (with_gt != 0 && with_gt != total) {
    fail(ErrorCode::kParseError, "global ids must be present on all samples or none");
  }
  try {
    ds.validate();
  } catch (const Error& e) {
    fail(ErrorCode::kParseError, e.what());
  }
  if (with_gt == total) {
    ds.ground_truth.emplace();
    for (const auto& cam : ds.cameras) {
      for (const auto& s : cam.samples) (*ds.ground_truth)[{s.camera_id, s.person_label}] = *s.global_id;
    }
  }
  return ds;
}

void save_dataset(const IcsDataset& dataset, const std::string& path) {
  text::write_file(path, serialize_dataset(dataset));
}

IcsDataset load_dataset(const std::string& path) {
  return parse_dataset(text::read_file(path, ErrorCode::kIoError));
}

}  // namespace mtml
