#include "potv/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include "json.hpp"

namespace potv::training {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

std::string to_string(LossKind k) { return k == LossKind::mse ? "mse" : "cross_entropy"; }
std::string to_string(DataGen g) {
  return g == DataGen::tanh_teacher ? "tanh_teacher" : "argmax_teacher";
}
std::string to_string(Optimizer o) { return o == Optimizer::sgd ? "sgd" : "sgd_momentum"; }

LossKind loss_from_string(const std::string& s) {
  if (s == "mse") return LossKind::mse;
  if (s == "cross_entropy") return LossKind::cross_entropy;
  throw std::invalid_argument("unknown loss: " + s);
}
DataGen data_gen_from_string(const std::string& s) {
  if (s == "tanh_teacher") return DataGen::tanh_teacher;
  if (s == "argmax_teacher") return DataGen::argmax_teacher;
  throw std::invalid_argument("unknown data generator: " + s);
}
Optimizer optimizer_from_string(const std::string& s) {
  if (s == "sgd") return Optimizer::sgd;
  if (s == "sgd_momentum") return Optimizer::sgd_momentum;
  throw std::invalid_argument("unknown optimizer: " + s);
}

void Hyperparams::validate() const {
  require(layer_sizes.size() >= 2, "Hyperparams: need input and output layer sizes");
  for (auto s : layer_sizes) require(s >= 1, "Hyperparams: layer sizes must be >= 1");
  require(std::isfinite(learning_rate) && learning_rate > 0,
          "Hyperparams: learning_rate must be positive");
  require(batch_size >= 1, "Hyperparams: batch_size must be >= 1");
  require(checkpoint_interval >= 1, "Hyperparams: checkpoint_interval must be >= 1");
  require(total_steps % checkpoint_interval == 0,
          "Hyperparams: checkpoint_interval must divide total_steps");
  require(momentum >= 0 && momentum < 1, "Hyperparams: momentum must be in [0,1)");
  if (loss == LossKind::cross_entropy) {
    require(data_gen == DataGen::argmax_teacher,
            "Hyperparams: cross_entropy needs one-hot targets (argmax_teacher)");
  }
}

std::uint64_t Hyperparams::param_count() const {
  std::uint64_t n = 0;
  for (size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    n += (layer_sizes[l] + 1) * layer_sizes[l + 1];
  }
  return n;
}

double Hyperparams::flops_per_step() const {
  return 6.0 * static_cast<double>(param_count()) * static_cast<double>(batch_size);
}

void Transcript::validate_shape() const {
  meta.validate();
  if (data.size() != meta.total_steps) {
    throw std::invalid_argument("Transcript: batch count does not match total_steps");
  }
  const std::uint64_t expect_ckpts = meta.total_steps / meta.checkpoint_interval + 1;
  if (checkpoints.size() != expect_ckpts) {
    throw std::invalid_argument("Transcript: checkpoint count does not match total_steps/k + 1");
  }
  if (losses.size() != checkpoints.size()) {
    throw std::invalid_argument("Transcript: loss record count does not match checkpoints");
  }
  const std::uint64_t params = meta.param_count();
  for (size_t j = 0; j < checkpoints.size(); ++j) {
    const auto& c = checkpoints[j];
    if (c.step != j * meta.checkpoint_interval || c.weights.size() != params) {
      throw std::invalid_argument("Transcript: malformed checkpoint");
    }
    const size_t want_vel = meta.optimizer == Optimizer::sgd_momentum ? params : 0;
    if (c.velocity.size() != want_vel) {
      throw std::invalid_argument("Transcript: optimizer state missing or unexpected");
    }
  }
  for (const auto& b : data) {
    if (b.rows != meta.batch_size || b.input_dim != meta.input_dim() ||
        b.output_dim != meta.output_dim() || b.inputs.size() != b.rows * b.input_dim ||
        b.targets.size() != b.rows * b.output_dim) {
      throw std::invalid_argument("Transcript: malformed batch");
    }
  }
}

std::vector<float> regenerate_init(const Hyperparams& meta) {
  Rng rng(meta.seed, "init");
  std::vector<float> weights;
  weights.reserve(meta.param_count());
  for (size_t l = 0; l + 1 < meta.layer_sizes.size(); ++l) {
    const double fan_in = static_cast<double>(meta.layer_sizes[l]);
    const double fan_out = static_cast<double>(meta.layer_sizes[l + 1]);
    const double scale = std::sqrt(6.0 / (fan_in + fan_out));
    const std::uint64_t n = meta.layer_sizes[l] * meta.layer_sizes[l + 1];
    for (std::uint64_t i = 0; i < n; ++i) {
      weights.push_back(static_cast<float>(scale * (2.0 * rng.next_double() - 1.0)));
    }
    for (std::uint64_t i = 0; i < meta.layer_sizes[l + 1]; ++i) weights.push_back(0.0f);
  }
  return weights;
}

std::vector<Batch> generate_data(const Hyperparams& meta) {
  const std::uint64_t in = meta.input_dim();
  const std::uint64_t out = meta.output_dim();

  // Fixed ground-truth map drawn once from the seed's "truth" stream.
  Rng truth(meta.seed, "truth");
  std::vector<double> teacher(out * in);
  std::vector<double> teacher_bias(out);
  const double teacher_scale = 1.0 / std::sqrt(static_cast<double>(in));
  for (auto& v : teacher) v = truth.next_gaussian() * teacher_scale;
  for (auto& v : teacher_bias) v = 0.1 * truth.next_gaussian();

  Rng data_rng(meta.seed, "data");
  std::vector<Batch> data;
  data.reserve(meta.total_steps);
  for (std::uint64_t step = 0; step < meta.total_steps; ++step) {
    Batch b;
    b.rows = meta.batch_size;
    b.input_dim = in;
    b.output_dim = out;
    b.inputs.resize(b.rows * in);
    b.targets.resize(b.rows * out);
    for (auto& x : b.inputs) x = static_cast<float>(data_rng.next_gaussian());
    for (std::uint64_t r = 0; r < b.rows; ++r) {
      for (std::uint64_t o = 0; o < out; ++o) {
        double z = teacher_bias[o];
        for (std::uint64_t i = 0; i < in; ++i) {
          z += teacher[o * in + i] * static_cast<double>(b.inputs[r * in + i]);
        }
        if (meta.data_gen == DataGen::tanh_teacher) {
          b.targets[r * out + o] =
              static_cast<float>(std::tanh(z) + 0.05 * data_rng.next_gaussian());
        } else {
          b.targets[r * out + o] = static_cast<float>(z);  // logits, one-hot below
        }
      }
      if (meta.data_gen == DataGen::argmax_teacher) {
        std::uint64_t best = 0;
        for (std::uint64_t o = 1; o < out; ++o) {
          if (b.targets[r * out + o] > b.targets[r * out + best]) best = o;
        }
        for (std::uint64_t o = 0; o < out; ++o) {
          b.targets[r * out + o] = (o == best) ? 1.0f : 0.0f;
        }
      }
    }
    data.push_back(std::move(b));
  }
  return data;
}

namespace {

// Forward pass for a whole batch; activations in double. acts[l] has shape
// rows x layer_sizes[l]; the output layer stays pre-softmax for
// cross-entropy.
void forward(std::span<const float> weights, const Hyperparams& meta, const Batch& batch,
             std::vector<std::vector<double>>& acts) {
  const auto& sizes = meta.layer_sizes;
  const std::uint64_t rows = batch.rows;
  const size_t layers = sizes.size();
  acts.resize(layers);
  acts[0].resize(rows * sizes[0]);
  for (size_t i = 0; i < acts[0].size(); ++i) acts[0][i] = batch.inputs[i];

  size_t offset = 0;
  for (size_t l = 0; l + 1 < layers; ++l) {
    const std::uint64_t in = sizes[l];
    const std::uint64_t out = sizes[l + 1];
    const float* w = weights.data() + offset;
    const float* b = w + in * out;
    const bool last = (l + 2 == layers);
    acts[l + 1].resize(rows * out);
    for (std::uint64_t r = 0; r < rows; ++r) {
      for (std::uint64_t o = 0; o < out; ++o) {
        double z = static_cast<double>(b[o]);
        for (std::uint64_t i = 0; i < in; ++i) {
          z += static_cast<double>(w[o * in + i]) * acts[l][r * in + i];
        }
        acts[l + 1][r * out + o] = last ? z : std::tanh(z);
      }
    }
    offset += (in + 1) * out;
  }
}

double loss_from_output(const Hyperparams& meta, const Batch& batch,
                        const std::vector<double>& output) {
  const std::uint64_t rows = batch.rows;
  const std::uint64_t out = meta.output_dim();
  double loss = 0.0;
  if (meta.loss == LossKind::mse) {
    for (std::uint64_t r = 0; r < rows; ++r) {
      for (std::uint64_t o = 0; o < out; ++o) {
        const double d = output[r * out + o] - static_cast<double>(batch.targets[r * out + o]);
        loss += d * d;
      }
    }
    loss /= static_cast<double>(rows * out);
  } else {
    for (std::uint64_t r = 0; r < rows; ++r) {
      double zmax = output[r * out];
      for (std::uint64_t o = 1; o < out; ++o) zmax = std::max(zmax, output[r * out + o]);
      double denom = 0.0;
      for (std::uint64_t o = 0; o < out; ++o) denom += std::exp(output[r * out + o] - zmax);
      for (std::uint64_t o = 0; o < out; ++o) {
        if (batch.targets[r * out + o] > 0.5f) {
          loss -= (output[r * out + o] - zmax - std::log(denom));
        }
      }
    }
    loss /= static_cast<double>(rows);
  }
  return loss;
}

}  // namespace

double batch_loss(std::span<const float> weights, const Hyperparams& meta, const Batch& batch) {
  if (weights.size() != meta.param_count()) {
    throw std::invalid_argument("batch_loss: weight vector has wrong length");
  }
  std::vector<std::vector<double>> acts;
  forward(weights, meta, batch, acts);
  return loss_from_output(meta, batch, acts.back());
}

std::vector<double> batch_gradient(std::span<const float> weights, const Hyperparams& meta,
                                   const Batch& batch) {
  if (weights.size() != meta.param_count()) {
    throw std::invalid_argument("batch_gradient: weight vector has wrong length");
  }
  if (batch.input_dim != meta.input_dim() || batch.output_dim != meta.output_dim() ||
      batch.rows == 0) {
    throw std::invalid_argument("batch_gradient: batch shape does not match hyperparameters");
  }
  const auto& sizes = meta.layer_sizes;
  const std::uint64_t rows = batch.rows;
  const size_t layers = sizes.size();

  std::vector<std::vector<double>> acts;
  forward(weights, meta, batch, acts);

  // Output-layer delta = dL/dz for the last linear layer.
  std::vector<double> delta(rows * sizes.back());
  const auto& out_act = acts.back();
  const std::uint64_t out = sizes.back();
  if (meta.loss == LossKind::mse) {
    const double scale = 2.0 / static_cast<double>(rows * out);
    for (size_t i = 0; i < delta.size(); ++i) {
      delta[i] = scale * (out_act[i] - static_cast<double>(batch.targets[i]));
    }
  } else {
    const double scale = 1.0 / static_cast<double>(rows);
    for (std::uint64_t r = 0; r < rows; ++r) {
      double zmax = out_act[r * out];
      for (std::uint64_t o = 1; o < out; ++o) zmax = std::max(zmax, out_act[r * out + o]);
      double denom = 0.0;
      for (std::uint64_t o = 0; o < out; ++o) denom += std::exp(out_act[r * out + o] - zmax);
      for (std::uint64_t o = 0; o < out; ++o) {
        const double p = std::exp(out_act[r * out + o] - zmax) / denom;
        delta[r * out + o] = scale * (p - static_cast<double>(batch.targets[r * out + o]));
      }
    }
  }

  std::vector<double> grad(weights.size(), 0.0);
  // Layer offsets, walked backward.
  std::vector<size_t> offsets(layers - 1);
  size_t off = 0;
  for (size_t l = 0; l + 1 < layers; ++l) {
    offsets[l] = off;
    off += (sizes[l] + 1) * sizes[l + 1];
  }

  for (size_t l = layers - 1; l-- > 0;) {
    const std::uint64_t in = sizes[l];
    const std::uint64_t on = sizes[l + 1];
    const float* w = weights.data() + offsets[l];
    double* gw = grad.data() + offsets[l];
    double* gb = gw + in * on;
    for (std::uint64_t r = 0; r < rows; ++r) {
      for (std::uint64_t o = 0; o < on; ++o) {
        const double d = delta[r * on + o];
        for (std::uint64_t i = 0; i < in; ++i) {
          gw[o * in + i] += d * acts[l][r * in + i];
        }
        gb[o] += d;
      }
    }
    if (l == 0) break;
    // Propagate: delta_prev = (W^T delta) * (1 - a^2), a = tanh activation.
    std::vector<double> prev(rows * in, 0.0);
    for (std::uint64_t r = 0; r < rows; ++r) {
      for (std::uint64_t i = 0; i < in; ++i) {
        double s = 0.0;
        for (std::uint64_t o = 0; o < on; ++o) {
          s += static_cast<double>(w[o * in + i]) * delta[r * on + o];
        }
        const double a = acts[l][r * in + i];
        prev[r * in + i] = s * (1.0 - a * a);
      }
    }
    delta = std::move(prev);
  }
  return grad;
}

namespace {

// The single optimizer-step routine shared by train() and replay_segment().
// Keeping one compiled instance is what makes replay bit-exact.
void apply_step(std::vector<float>& weights, std::vector<float>& velocity,
                const Hyperparams& meta, const Batch& batch, double noise_sigma,
                Rng* noise_rng) {
  auto grad = batch_gradient(weights, meta, batch);
  if (noise_sigma > 0.0 && noise_rng != nullptr) {
    for (auto& g : grad) g += noise_sigma * noise_rng->next_gaussian();
  }
  const double lr = meta.learning_rate;
  if (meta.optimizer == Optimizer::sgd_momentum) {
    for (size_t i = 0; i < weights.size(); ++i) {
      const double v = meta.momentum * static_cast<double>(velocity[i]) + grad[i];
      velocity[i] = static_cast<float>(v);
      weights[i] = static_cast<float>(static_cast<double>(weights[i]) -
                                      lr * static_cast<double>(velocity[i]));
    }
  } else {
    for (size_t i = 0; i < weights.size(); ++i) {
      weights[i] = static_cast<float>(static_cast<double>(weights[i]) - lr * grad[i]);
    }
  }
}

}  // namespace

Transcript train(const Hyperparams& meta, double noise_sigma) {
  meta.validate();
  if (noise_sigma < 0) throw std::invalid_argument("train: noise_sigma must be >= 0");

  Transcript t;
  t.meta = meta;
  t.data = generate_data(meta);

  std::vector<float> weights = regenerate_init(meta);
  std::vector<float> velocity(
      meta.optimizer == Optimizer::sgd_momentum ? weights.size() : 0, 0.0f);
  Rng noise_rng(meta.seed, "gradnoise");

  auto record = [&](std::uint64_t step) {
    Checkpoint c;
    c.step = step;
    c.weights = weights;
    c.velocity = velocity;
    t.checkpoints.push_back(std::move(c));
    const double loss =
        t.data.empty()
            ? 0.0
            : batch_loss(weights, meta, t.data[std::min<std::uint64_t>(step, meta.total_steps - 1)]);
    if (!std::isfinite(loss)) throw TrainingError("train: loss diverged", step);
    t.losses.push_back(loss);
  };

  record(0);
  for (std::uint64_t step = 0; step < meta.total_steps; ++step) {
    apply_step(weights, velocity, meta, t.data[step], noise_sigma, &noise_rng);
    if ((step + 1) % meta.checkpoint_interval == 0) record(step + 1);
  }
  return t;
}

Checkpoint replay_segment(const Checkpoint& start, std::span<const Batch> batches,
                          const Hyperparams& meta) {
  if (start.weights.size() != meta.param_count()) {
    throw std::invalid_argument("replay_segment: starting weights have wrong length");
  }
  Checkpoint result;
  result.step = start.step + batches.size();
  result.weights = start.weights;
  result.velocity = start.velocity;
  if (meta.optimizer == Optimizer::sgd_momentum && result.velocity.size() != result.weights.size()) {
    throw std::invalid_argument("replay_segment: missing optimizer state");
  }
  for (const auto& batch : batches) {
    if (batch.input_dim != meta.input_dim() || batch.output_dim != meta.output_dim()) {
      throw std::invalid_argument("replay_segment: batch shape mismatch");
    }
    apply_step(result.weights, result.velocity, meta, batch, 0.0, nullptr);
  }
  return result;
}

std::vector<chip::WeightShard> shard_weights(std::span<const float> weights,
                                             std::uint64_t count) {
  if (count == 0 || count > weights.size()) {
    throw std::invalid_argument("shard_weights: count must be in [1, weight count]");
  }
  const std::uint64_t n = weights.size();
  const std::uint64_t base = n / count;
  const std::uint64_t extra = n % count;
  std::vector<chip::WeightShard> shards;
  shards.reserve(count);
  std::uint64_t begin = 0;
  for (std::uint64_t s = 0; s < count; ++s) {
    const std::uint64_t len = base + (s < extra ? 1 : 0);
    chip::WeightShard shard;
    shard.shard_index = s;
    shard.begin = begin;
    shard.end = begin + len;
    shard.values.assign(weights.begin() + static_cast<std::ptrdiff_t>(begin),
                        weights.begin() + static_cast<std::ptrdiff_t>(begin + len));
    shards.push_back(std::move(shard));
    begin += len;
  }
  return shards;
}

Digest meta_digest(const Hyperparams& meta) {
  ByteWriter w;
  w.str("potv-meta-v1");
  w.u64(meta.seed);
  w.u64(meta.layer_sizes.size());
  for (auto s : meta.layer_sizes) w.u64(s);
  w.f64(meta.learning_rate);
  w.u64(meta.batch_size);
  w.u64(meta.checkpoint_interval);
  w.u8(static_cast<std::uint8_t>(meta.loss));
  w.u8(static_cast<std::uint8_t>(meta.data_gen));
  w.u8(static_cast<std::uint8_t>(meta.optimizer));
  w.f64(meta.momentum);
  return w.sha256();
}

Digest batch_digest(const Batch& batch) {
  ByteWriter w;
  w.str("potv-batch-v1");
  w.u64(batch.rows);
  w.u64(batch.input_dim);
  w.u64(batch.output_dim);
  w.f32_array(batch.inputs);
  w.f32_array(batch.targets);
  return w.sha256();
}

Digest checkpoint_digest(const Checkpoint& ckpt) {
  ByteWriter w;
  w.str("potv-ckpt-v1");
  w.u64(ckpt.weights.size());
  w.f32_array(ckpt.weights);
  w.u64(ckpt.velocity.size());
  w.f32_array(ckpt.velocity);
  return w.sha256();
}

// ---------------------------------------------------------------------------
// Transcript files
// ---------------------------------------------------------------------------

namespace {

void write_f32_file(const std::string& path, const std::vector<const std::vector<float>*>& arrays) {
  ByteWriter w;
  for (const auto* a : arrays) w.f32_array(*a);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(w.bytes().data()),
            static_cast<std::streamsize>(w.bytes().size()));
}

std::vector<float> read_f32_file(const std::string& path, std::uint64_t expect_count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<std::uint8_t> raw((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
  if (raw.size() != expect_count * 4) {
    throw std::runtime_error(path + ": unexpected size");
  }
  std::vector<float> values(expect_count);
  for (std::uint64_t i = 0; i < expect_count; ++i) {
    std::uint32_t bits = 0;
    for (int b = 3; b >= 0; --b) bits = (bits << 8) | raw[i * 4 + static_cast<size_t>(b)];
    std::memcpy(&values[i], &bits, 4);
  }
  return values;
}

}  // namespace

void save_transcript(const Transcript& t, const std::string& dir) {
  t.validate_shape();
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  nlohmann::json manifest;
  manifest["format"] = "potv-transcript-v1";
  manifest["meta"] = {
      {"seed", t.meta.seed},
      {"layer_sizes", t.meta.layer_sizes},
      {"learning_rate", t.meta.learning_rate},
      {"batch_size", t.meta.batch_size},
      {"total_steps", t.meta.total_steps},
      {"checkpoint_interval", t.meta.checkpoint_interval},
      {"loss", to_string(t.meta.loss)},
      {"data_gen", to_string(t.meta.data_gen)},
      {"optimizer", to_string(t.meta.optimizer)},
      {"momentum", t.meta.momentum},
  };
  manifest["losses"] = t.losses;
  manifest["batch_count"] = t.data.size();
  manifest["checkpoint_count"] = t.checkpoints.size();

  std::ofstream mf(dir + "/manifest.json");
  if (!mf) throw std::runtime_error("cannot write " + dir + "/manifest.json");
  mf << manifest.dump(2) << "\n";

  std::vector<const std::vector<float>*> arrays;
  for (const auto& b : t.data) {
    arrays.push_back(&b.inputs);
    arrays.push_back(&b.targets);
  }
  write_f32_file(dir + "/batches.bin", arrays);

  arrays.clear();
  for (const auto& c : t.checkpoints) {
    arrays.push_back(&c.weights);
    if (!c.velocity.empty()) arrays.push_back(&c.velocity);
  }
  write_f32_file(dir + "/checkpoints.bin", arrays);
}

Transcript load_transcript(const std::string& dir) {
  std::ifstream mf(dir + "/manifest.json");
  if (!mf) throw std::runtime_error("cannot read " + dir + "/manifest.json");
  nlohmann::json manifest = nlohmann::json::parse(mf);
  if (manifest.value("format", "") != "potv-transcript-v1") {
    throw std::runtime_error(dir + ": not a transcript directory");
  }

  Transcript t;
  const auto& m = manifest.at("meta");
  t.meta.seed = m.at("seed").get<std::uint64_t>();
  t.meta.layer_sizes = m.at("layer_sizes").get<std::vector<std::uint64_t>>();
  t.meta.learning_rate = m.at("learning_rate").get<double>();
  t.meta.batch_size = m.at("batch_size").get<std::uint64_t>();
  t.meta.total_steps = m.at("total_steps").get<std::uint64_t>();
  t.meta.checkpoint_interval = m.at("checkpoint_interval").get<std::uint64_t>();
  t.meta.loss = loss_from_string(m.at("loss").get<std::string>());
  t.meta.data_gen = data_gen_from_string(m.at("data_gen").get<std::string>());
  t.meta.optimizer = optimizer_from_string(m.at("optimizer").get<std::string>());
  t.meta.momentum = m.at("momentum").get<double>();
  t.losses = manifest.at("losses").get<std::vector<double>>();

  const auto batch_count = manifest.at("batch_count").get<std::uint64_t>();
  const auto ckpt_count = manifest.at("checkpoint_count").get<std::uint64_t>();
  const std::uint64_t in = t.meta.input_dim();
  const std::uint64_t out = t.meta.output_dim();
  const std::uint64_t rows = t.meta.batch_size;
  const std::uint64_t per_batch = rows * (in + out);

  auto batch_values = read_f32_file(dir + "/batches.bin", batch_count * per_batch);
  for (std::uint64_t i = 0; i < batch_count; ++i) {
    Batch b;
    b.rows = rows;
    b.input_dim = in;
    b.output_dim = out;
    const float* base = batch_values.data() + i * per_batch;
    b.inputs.assign(base, base + rows * in);
    b.targets.assign(base + rows * in, base + per_batch);
    t.data.push_back(std::move(b));
  }

  const std::uint64_t params = t.meta.param_count();
  const bool has_vel = t.meta.optimizer == Optimizer::sgd_momentum;
  const std::uint64_t per_ckpt = params * (has_vel ? 2 : 1);
  auto ckpt_values = read_f32_file(dir + "/checkpoints.bin", ckpt_count * per_ckpt);
  for (std::uint64_t i = 0; i < ckpt_count; ++i) {
    Checkpoint c;
    c.step = i * t.meta.checkpoint_interval;
    const float* base = ckpt_values.data() + i * per_ckpt;
    c.weights.assign(base, base + params);
    if (has_vel) c.velocity.assign(base + params, base + 2 * params);
    t.checkpoints.push_back(std::move(c));
  }

  t.validate_shape();
  return t;
}

}  // namespace potv::training
