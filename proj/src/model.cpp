#include "mtml/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mtml/error.hpp"
#include "text.hpp"

namespace mtml {

namespace {

Dense make_dense(int in, int out) {
  Dense d;
  d.in = in;
  d.out = out;
  d.weight.assign(static_cast<std::size_t>(in) * static_cast<std::size_t>(out), 0.0);
  d.bias.assign(static_cast<std::size_t>(out), 0.0);
  return d;
}

void affine(const Dense& layer, std::span<const double> x, Vector& y) {
  y.assign(layer.bias.begin(), layer.bias.end());
  for (int i = 0; i < layer.in; ++i) {
    const double xi = x[static_cast<std::size_t>(i)];
    if (xi == 0.0) continue;
    const double* row = layer.weight.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(layer.out);
    for (int j = 0; j < layer.out; ++j) y[static_cast<std::size_t>(j)] += row[j] * xi;
  }
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void require_finite(std::span<const double> v, const std::string& layer) {
  if (!all_finite(v)) fail(ErrorCode::kNumericFailure, "non-finite values in " + layer);
}

// Accumulates dW += x (outer) delta and db += delta; returns W delta when
// `input_grad` is non-null.
void accumulate(const Dense& layer, Dense& grad, std::span<const double> x, std::span<const double> delta,
                Vector* input_grad) {
  for (int i = 0; i < layer.in; ++i) {
    const double xi = x[static_cast<std::size_t>(i)];
    double* grow = grad.weight.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(layer.out);
    for (int j = 0; j < layer.out; ++j) grow[j] += xi * delta[static_cast<std::size_t>(j)];
  }
  for (int j = 0; j < layer.out; ++j) grad.bias[static_cast<std::size_t>(j)] += delta[static_cast<std::size_t>(j)];
  if (input_grad) {
    input_grad->assign(static_cast<std::size_t>(layer.in), 0.0);
    for (int i = 0; i < layer.in; ++i) {
      const double* row = layer.weight.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(layer.out);
      double acc = 0.0;
      for (int j = 0; j < layer.out; ++j) acc += row[j] * delta[static_cast<std::size_t>(j)];
      (*input_grad)[static_cast<std::size_t>(i)] = acc;
    }
  }
}

struct ForwardCache {
  std::vector<Vector> pre;   // pre-activation of each encoder layer
  std::vector<Vector> post;  // layer outputs (rectified except the last)
};

void forward_cached(const ModelParams& params, std::span<const double> x, ForwardCache& cache) {
  const auto& enc = params.encoder;
  cache.pre.resize(enc.size());
  cache.post.resize(enc.size());
  std::span<const double> input = x;
  for (std::size_t l = 0; l < enc.size(); ++l) {
    affine(enc[l], input, cache.pre[l]);
    cache.post[l] = cache.pre[l];
    if (l + 1 < enc.size()) {
      for (auto& v : cache.post[l]) v = std::max(0.0, v);
    }
    require_finite(cache.post[l], "encoder layer " + std::to_string(l));
    input = cache.post[l];
  }
}

void check_input(const ModelParams& params, std::span<const double> features) {
  if (static_cast<int>(features.size()) != params.config.input_dim) {
    fail(ErrorCode::kShapeError, "expected " + std::to_string(params.config.input_dim) + " features, got " +
                                     std::to_string(features.size()));
  }
}

const Dense& head_for(const ModelParams& params, int camera_id) {
  if (camera_id < 1 || camera_id > params.num_heads()) {
    fail(ErrorCode::kNoSuchHead, "camera " + std::to_string(camera_id) + " (model has " +
                                     std::to_string(params.num_heads()) + " heads)");
  }
  return params.heads[static_cast<std::size_t>(camera_id - 1)];
}

// Per-image target list: native label first, then foreign labels.
struct Target {
  int camera_id;
  int label;
  bool native;
};

std::vector<Target> targets_for(const Sample& s, const LossSpec& spec) {
  std::vector<Target> t{{s.camera_id, s.person_label, true}};
  if (spec.multilabels) {
    auto it = spec.multilabels->find({s.camera_id, s.person_label});
    if (it != spec.multilabels->end()) {
      for (const auto& f : it->second) t.push_back({f.camera_id, f.person_label, false});
    }
  }
  return t;
}

LossAndGradient run(const ModelParams& params, std::span<const Sample> batch, const LossSpec& spec,
                    bool want_grads) {
  if (batch.empty()) fail(ErrorCode::kEmptyBatch, "batch has no samples");
  const int num_cameras = params.num_heads();

  // b_q: multi-labeled images per target camera.
  std::map<int, int> ml_counts;
  for (const auto& s : batch) {
    for (const auto& t : targets_for(s, spec)) {
      if (!t.native) ++ml_counts[t.camera_id];
    }
  }

  LossAndGradient out;
  out.report.lambda = spec.lambda;
  if (want_grads) out.grads = zero_gradients(params);
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  const bool ml_grads = want_grads && spec.lambda != 0.0;

  std::map<int, double> ml_sums;
  ForwardCache cache;
  Vector logits;
  Vector feature_grad;
  Vector delta;
  Vector below;
  for (const auto& s : batch) {
    check_input(params, s.features);
    forward_cached(params, s.features, cache);
    const Vector& v = cache.post.back();
    if (want_grads) feature_grad.assign(v.size(), 0.0);

    for (const auto& t : targets_for(s, spec)) {
      const Dense& head = head_for(params, t.camera_id);
      affine(head, v, logits);
      require_finite(logits, "head " + std::to_string(t.camera_id));
      const double loss = cross_entropy(logits, t.label);
      double weight = 0.0;
      if (t.native) {
        out.report.per_camera_mt[t.camera_id] += loss;
        weight = inv_batch;
      } else {
        ml_sums[t.camera_id] += loss;
        weight = spec.lambda / (static_cast<double>(num_cameras) * ml_counts[t.camera_id]);
      }
      if (!want_grads || (!t.native && !ml_grads)) continue;

      delta = softmax(logits);
      delta[static_cast<std::size_t>(t.label)] -= 1.0;
      for (auto& d : delta) d *= weight;
      Vector head_input_grad;
      accumulate(head, out.grads.heads[static_cast<std::size_t>(t.camera_id - 1)], v, delta, &head_input_grad);
      for (std::size_t k = 0; k < feature_grad.size(); ++k) feature_grad[k] += head_input_grad[k];
    }

    if (!want_grads) continue;
    delta = feature_grad;
    for (std::size_t l = params.encoder.size(); l-- > 0;) {
      std::span<const double> input = l == 0 ? std::span<const double>(s.features) : std::span<const double>(cache.post[l - 1]);
      accumulate(params.encoder[l], out.grads.encoder[l], input, delta, l == 0 ? nullptr : &below);
      if (l == 0) break;
      const Vector& z = cache.pre[l - 1];
      for (std::size_t k = 0; k < below.size(); ++k) {
        if (!(z[k] > 0.0)) below[k] = 0.0;
      }
      delta.swap(below);
    }
  }

  double mt_sum = 0.0;
  for (const auto& [cam, sum] : out.report.per_camera_mt) mt_sum += sum;
  out.report.mt_loss = mt_sum * inv_batch;
  double ml_sum = 0.0;
  for (const auto& [cam, sum] : ml_sums) {
    CameraMlTerm term{sum / ml_counts[cam], ml_counts[cam]};
    out.report.per_camera_ml[cam] = term;
    ml_sum += term.loss;
  }
  out.report.ml_loss = ml_sum / static_cast<double>(num_cameras);
  out.report.total = total_loss(out.report.mt_loss, out.report.ml_loss, spec.lambda);

  if (want_grads) {
    for (std::size_t l = 0; l < out.grads.encoder.size(); ++l) {
      require_finite(out.grads.encoder[l].weight, "gradient of encoder layer " + std::to_string(l));
      require_finite(out.grads.encoder[l].bias, "gradient of encoder layer " + std::to_string(l));
    }
    for (std::size_t h = 0; h < out.grads.heads.size(); ++h) {
      require_finite(out.grads.heads[h].weight, "gradient of head " + std::to_string(h + 1));
      require_finite(out.grads.heads[h].bias, "gradient of head " + std::to_string(h + 1));
    }
  }
  return out;
}

}  // namespace

void ModelConfig::validate() const {
  if (input_dim < 1 || feature_dim < 1) fail(ErrorCode::kInvalidArgument, "model dims must be >= 1");
  for (int h : hidden_dims) {
    if (h < 1) fail(ErrorCode::kInvalidArgument, "hidden widths must be >= 1");
  }
  if (heads.empty()) fail(ErrorCode::kInvalidArgument, "model needs at least one head");
  for (int n : heads) {
    if (n < 1) fail(ErrorCode::kInvalidArgument, "head sizes must be >= 1");
  }
  if (!std::isfinite(init_scale) || init_scale < 0.0) {
    fail(ErrorCode::kInvalidArgument, "init_scale must be finite and >= 0");
  }
}

std::size_t ModelParams::num_parameters() const {
  std::size_t n = 0;
  for (const auto& l : encoder) n += l.weight.size() + l.bias.size();
  for (const auto& h : heads) n += h.weight.size() + h.bias.size();
  return n;
}

ModelParams init_params(const ModelConfig& config) {
  config.validate();
  ModelParams params;
  params.config = config;
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto fill = [&](Dense& d) {
    const double scale = config.init_scale / std::sqrt(static_cast<double>(d.in));
    for (auto& w : d.weight) w = scale * normal(rng);
  };
  int width = config.input_dim;
  for (int h : config.hidden_dims) {
    params.encoder.push_back(make_dense(width, h));
    width = h;
  }
  params.encoder.push_back(make_dense(width, config.feature_dim));
  for (int n : config.heads) params.heads.push_back(make_dense(config.feature_dim, n));
  for (auto& l : params.encoder) fill(l);
  for (auto& h : params.heads) fill(h);
  return params;
}

GradientSet zero_gradients(const ModelParams& params) {
  GradientSet g;
  for (const auto& l : params.encoder) g.encoder.push_back(make_dense(l.in, l.out));
  for (const auto& h : params.heads) g.heads.push_back(make_dense(h.in, h.out));
  return g;
}

namespace {
template <typename Layers, typename Span>
void collect(Layers& layers, std::vector<Span>& out) {
  for (auto& l : layers) {
    out.emplace_back(l.weight);
    out.emplace_back(l.bias);
  }
}
}  // namespace

std::vector<std::span<double>> parameter_tensors(ModelParams& params) {
  std::vector<std::span<double>> out;
  collect(params.encoder, out);
  collect(params.heads, out);
  return out;
}

std::vector<std::span<double>> parameter_tensors(GradientSet& grads) {
  std::vector<std::span<double>> out;
  collect(grads.encoder, out);
  collect(grads.heads, out);
  return out;
}

std::vector<std::span<const double>> parameter_tensors(const GradientSet& grads) {
  std::vector<std::span<const double>> out;
  collect(grads.encoder, out);
  collect(grads.heads, out);
  return out;
}

SharedFeature forward_shared(const ModelParams& params, std::span<const double> features) {
  check_input(params, features);
  ForwardCache cache;
  forward_cached(params, features, cache);
  return std::move(cache.post.back());
}

Vector head_logits(const ModelParams& params, std::span<const double> shared, int camera_id) {
  const Dense& head = head_for(params, camera_id);
  if (static_cast<int>(shared.size()) != head.in) {
    fail(ErrorCode::kShapeError, "shared feature has length " + std::to_string(shared.size()) + ", expected " +
                                     std::to_string(head.in));
  }
  Vector logits;
  affine(head, shared, logits);
  return logits;
}

Vector softmax(std::span<const double> logits) {
  Vector p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const double hi = *std::max_element(p.begin(), p.end());
  double sum = 0.0;
  for (auto& v : p) {
    v = std::exp(v - hi);
    sum += v;
  }
  for (auto& v : p) v /= sum;
  return p;
}

LossReport evaluate_loss(const ModelParams& params, std::span<const Sample> batch, const LossSpec& spec) {
  return run(params, batch, spec, false).report;
}

LossAndGradient backward(const ModelParams& params, std::span<const Sample> batch, const LossSpec& spec) {
  return run(params, batch, spec, true);
}

// Checkpoint layout (text, one record per line):
//   MTMLCKPT,<version>
//   config,<input_dim>,<feature_dim>,<init_scale>,<seed>
//   hidden,<h_1>,...         (no values when there are no hidden layers)
//   heads,<N_1>,...,<N_M>
//   layer,encoder|head,<index>,<in>,<out>
//   w,<out values>           (one line per input row)
//   b,<out values>
//   end
std::string serialize_checkpoint(const ModelParams& params) {
  const auto& c = params.config;
  std::string out = "MTMLCKPT," + std::to_string(kCheckpointFormatVersion) + "\n";
  out += "config," + std::to_string(c.input_dim) + "," + std::to_string(c.feature_dim) + ",";
  text::append_real(out, c.init_scale);
  out += "," + std::to_string(c.seed) + "\nhidden";
  for (int h : c.hidden_dims) out += "," + std::to_string(h);
  out += "\nheads";
  for (int h : c.heads) out += "," + std::to_string(h);
  out += '\n';
  auto emit = [&out](const char* kind, std::size_t index, const Dense& d) {
    out += std::string("layer,") + kind + "," + std::to_string(index) + "," + std::to_string(d.in) + "," +
           std::to_string(d.out) + "\n";
    for (int i = 0; i < d.in; ++i) {
      out += 'w';
      for (int j = 0; j < d.out; ++j) {
        out += ',';
        text::append_real(out, d.w(i, j));
      }
      out += '\n';
    }
    out += 'b';
    for (double b : d.bias) {
      out += ',';
      text::append_real(out, b);
    }
    out += '\n';
  };
  for (std::size_t l = 0; l < params.encoder.size(); ++l) emit("encoder", l, params.encoder[l]);
  for (std::size_t h = 0; h < params.heads.size(); ++h) emit("head", h, params.heads[h]);
  out += "end\n";
  return out;
}

ModelParams parse_checkpoint(std::string_view data) {
  const auto rows = text::lines(data);
  std::size_t r = 0;
  auto bad = [&r](const std::string& what) {
    fail(ErrorCode::kIncompatibleCheckpoint, "line " + std::to_string(r + 1) + ": " + what);
  };
  auto next = [&](std::string_view tag) {
    if (r >= rows.size()) bad("unexpected end of file (truncated checkpoint)");
    auto f = text::split(rows[r], ',');
    if (f.empty() || text::trim(f[0]) != tag) bad("expected '" + std::string(tag) + "' record");
    return f;
  };
  auto ints = [&](const std::vector<std::string_view>& f, std::size_t from) {
    std::vector<int> v;
    for (std::size_t i = from; i < f.size(); ++i) {
      int x = 0;
      if (!text::parse_int(f[i], x)) bad("bad integer");
      v.push_back(x);
    }
    return v;
  };

  auto header = next("MTMLCKPT");
  int version = 0;
  if (header.size() != 2 || !text::parse_int(header[1], version)) bad("bad header");
  if (version != kCheckpointFormatVersion) {
    fail(ErrorCode::kIncompatibleCheckpoint, "unsupported checkpoint version " + std::to_string(version));
  }
  ++r;
  ModelConfig c;
  auto cfg = next("config");
  if (cfg.size() != 5 || !text::parse_int(cfg[1], c.input_dim) || !text::parse_int(cfg[2], c.feature_dim) ||
      !text::parse_real(cfg[3], c.init_scale) || !text::parse_int(cfg[4], c.seed)) {
    bad("bad config record");
  }
  ++r;
  c.hidden_dims = ints(next("hidden"), 1);
  ++r;
  c.heads = ints(next("heads"), 1);
  ++r;
  try {
    c.validate();
  } catch (const Error& e) {
    bad(e.what());
  }

  ModelParams params = init_params([&] {
    ModelConfig zero = c;
    zero.init_scale = 0.0;
    return zero;
  }());
  params.config = c;

  auto read_layer = [&](const char* kind, std::size_t index, Dense& d) {
    auto f = next("layer");
    if (f.size() != 5 || text::trim(f[1]) != kind) bad(std::string("expected ") + kind + " layer");
    auto dims = ints(f, 2);
    if (dims[0] != static_cast<int>(index) || dims[1] != d.in || dims[2] != d.out) bad("layer shape mismatch");
    ++r;
    for (int i = 0; i < d.in; ++i) {
      auto w = next("w");
      if (static_cast<int>(w.size()) != d.out + 1) bad("weight row has wrong length");
      for (int j = 0; j < d.out; ++j) {
        if (!text::parse_real(w[static_cast<std::size_t>(j) + 1], d.w(i, j))) bad("bad weight value");
      }
      ++r;
    }
    auto b = next("b");
    if (static_cast<int>(b.size()) != d.out + 1) bad("bias row has wrong length");
    for (int j = 0; j < d.out; ++j) {
      if (!text::parse_real(b[static_cast<std::size_t>(j) + 1], d.bias[static_cast<std::size_t>(j)])) {
        bad("bad bias value");
      }
    }
    ++r;
  };
  for (std::size_t l = 0; l < params.encoder.size(); ++l) read_layer("encoder", l, params.encoder[l]);
  for (std::size_t h = 0; h < params.heads.size(); ++h) read_layer("head", h, params.heads[h]);
  next("end");
  if (r + 1 != rows.size()) bad("trailing data after end");
  for (auto t : parameter_tensors(params)) {
    if (!all_finite(t)) fail(ErrorCode::kIncompatibleCheckpoint, "non-finite parameter");
  }
  return params;
}

void save_checkpoint(const ModelParams& params, const std::string& path) {
  text::write_file(path, serialize_checkpoint(params));
}

ModelParams load_checkpoint(const std::string& path) {
  return parse_checkpoint(text::read_file(path, ErrorCode::kIncompatibleCheckpoint));
}

}  // namespace mtml
