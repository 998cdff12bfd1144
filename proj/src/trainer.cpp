// Copyright 2026 The VNet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "vnet/trainer.hpp"

#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "vnet/error.hpp"
#include "vnet/io_util.hpp"
#include "vnet/ops.hpp"

namespace vnet {

namespace {

std::string format_g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Batch {
  int iteration = 0;
  Tensor5 images;
  std::vector<std::uint8_t> labels;
};

template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {}

  bool push(T item) {
    std::unique_lock lock(mutex_);
    not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
    if (closed_) return false;
    items_.push_back(std::move(item));
    not_empty_.notify_one();
    return true;
  }

  std::optional<T> pop() {
    std::unique_lock lock(mutex_);
    not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return item;
  }

  void close() {
    std::lock_guard lock(mutex_);
    closed_ = true;
    not_full_.notify_all();
    not_empty_.notify_all();
  }

 private:
  std::size_t capacity_;
  std::mutex mutex_;
  std::condition_variable not_full_;
  std::condition_variable not_empty_;
  std::deque<T> items_;
  bool closed_ = false;
};

class BatchSource {
 public:
  BatchSource(const Dataset& dataset, const TrainConfig& config, Dims dims)
      : dataset_(dataset), config_(config), dims_(dims) {
    if (dataset.empty()) {
      throw InvalidArgument("training needs at least one image/label pair");
    }
    for (const Sample& s : dataset) {
      if (s.image.dims() != dims || s.label.dims() != dims) {
        throw ShapeError("sample '" + s.name + "' has dims " + format_xyz_dims(s.image.dims()) +
                         " (x,y,z) but the model expects " + format_xyz_dims(dims));
      }
    }
    if (!config.augmenting()) {
      for (const Sample& s : dataset) {
        normalized_.push_back(normalize_zscore(s.image).volume);
      }
    }
  }

  Batch make(int iteration) const {
    const int b = config_.batch_size;
    const std::size_t sp = dims_.count();
    Batch batch{iteration, Tensor5(Shape{b, 1, dims_.d, dims_.h, dims_.w}), {}};
    batch.labels.resize(sp * static_cast<std::size_t>(b));

    auto pick = make_stream({config_.seed, static_cast<std::uint64_t>(iteration), 0});
    std::uniform_int_distribution<std::size_t> choose(0, dataset_.size() - 1);
    for (int slot = 0; slot < b; ++slot) {
      const std::size_t index = choose(pick);
      const Sample& s = dataset_[index];
      const std::size_t offset = static_cast<std::size_t>(slot) * sp;
      if (!config_.augmenting()) {
        std::copy(normalized_[index].data().begin(), normalized_[index].data().end(),
                  batch.images.data() + offset);
        std::copy(s.label.data().begin(), s.label.data().end(), batch.labels.begin() +
                  static_cast<std::ptrdiff_t>(offset));
        continue;
      }
      auto rng = make_stream({config_.effective_augment_seed(), static_cast<std::uint64_t>(iteration),
                              static_cast<std::uint64_t>(slot) + 1, index});
      const Volume* reference = nullptr;
      if (config_.augment.histogram_match && dataset_.size() > 1) {
        std::uniform_int_distribution<std::size_t> other(0, dataset_.size() - 2);
        std::size_t r = other(rng);
        if (r >= index) ++r;
        reference = &dataset_[r].image;
      }
      AugmentedPair a = augment_pair(s.image, s.label, reference, config_.augment, rng);
      std::copy(a.image.data().begin(), a.image.data().end(), batch.images.data() + offset);
      std::copy(a.label.data().begin(), a.label.data().end(),
                batch.labels.begin() + static_cast<std::ptrdiff_t>(offset));
    }
    return batch;
  }

 private:
  const Dataset& dataset_;
  const TrainConfig& config_;
  Dims dims_;
  std::vector<Volume> normalized_;
};

double batch_hard_dice(const Tensor5& probs, const std::vector<std::uint8_t>& labels) {
  const Shape& s = probs.shape();
  const std::size_t sp = s.spatial();
  double total = 0.0;
  for (int n = 0; n < s.n; ++n) {
    const double* p = probs.data() + (static_cast<std::size_t>(n) * 2 + 1) * sp;
    const std::uint8_t* g = labels.data() + static_cast<std::size_t>(n) * sp;
    std::size_t both = 0, pred = 0, truth = 0;
    for (std::size_t i = 0; i < sp; ++i) {
      const bool a = p[i] > 0.5;
      pred += a;
      truth += g[i];
      both += a && g[i];
    }
    total += pred + truth == 0 ? 1.0 : 2.0 * static_cast<double>(both) / static_cast<double>(pred + truth);
  }
  return total / s.n;
}

void write_outputs(const TrainOptions& options, const VNetModel& model, const TrainConfig& config,
                   const TrainRun& run, bool checkpoint) {
  if (!options.out_dir) return;
  std::filesystem::create_directories(*options.out_dir);
  write_file_atomic(*options.out_dir / "history.csv", format_history(run.history));
  if (checkpoint) {
    save_checkpoint(make_checkpoint(model, config, run),
                    *options.out_dir / checkpoint_filename(run.iteration));
  }
}

}  // namespace

LossKind parse_loss_kind(const std::string& text) {
  if (text == "dice") return LossKind::dice;
  if (text == "weighted_logistic") return LossKind::weighted_logistic;
  throw InvalidArgument("loss must be dice or weighted_logistic, got '" + text + "'");
}

std::string to_string(LossKind kind) {
  return kind == LossKind::dice ? "dice" : "weighted_logistic";
}

TrainConfig TrainConfig::paper() { return TrainConfig{}; }

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  c.learning_rate = 1e-3;
  c.decay_interval = 200;
  c.max_iterations = 600;
  c.checkpoint_interval = 100;
  return c;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw InvalidArgument("batch_size must be at least 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidArgument("momentum must lie in [0, 1)");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidArgument("lr must be positive");
  }
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) {
    throw InvalidArgument("lr_decay_factor must lie in (0, 1]");
  }
  if (decay_interval < 1) throw InvalidArgument("lr_decay_interval must be at least 1");
  if (max_iterations < 0) throw InvalidArgument("max_iter must be non-negative");
  if (checkpoint_interval < 1) throw InvalidArgument("checkpoint_interval must be at least 1");
  if (class_weights) class_weights->validate();
  augment.validate();
}

TrainConfig TrainConfig::from_kv(const KeyValues& kv, TrainConfig base) {
  TrainConfig c = std::move(base);
  if (auto v = kv.get_int("batch_size")) c.batch_size = static_cast<int>(*v);
  if (auto v = kv.get_double("momentum")) c.momentum = *v;
  if (auto v = kv.get_double("lr")) c.learning_rate = *v;
  if (auto v = kv.get_double("lr_decay_factor")) c.decay_factor = *v;
  if (auto v = kv.get_int("lr_decay_interval")) c.decay_interval = static_cast<int>(*v);
  if (auto v = kv.get_int("max_iter")) c.max_iterations = static_cast<int>(*v);
  if (auto v = kv.get_string("loss")) c.loss = parse_loss_kind(*v);
  if (auto v = kv.get_string("dice_reduction")) c.dice_reduction = parse_dice_reduction(*v);
  if (auto v = kv.get_string("class_weights")) {
    if (*v == "inverse_frequency") {
      c.class_weights.reset();
    } else {
      const auto w = kv.get_doubles("class_weights");
      if (w->size() != 2) {
        throw InvalidArgument("class_weights must be inverse_frequency or 'background,foreground'");
      }
      c.class_weights = ClassWeights{(*w)[0], (*w)[1]};
    }
  }
  if (auto v = kv.get_int("checkpoint_interval")) c.checkpoint_interval = static_cast<int>(*v);
  if (auto v = kv.get_u64("seed")) c.seed = *v;
  if (auto v = kv.get_bool("deform")) c.augment.deform = *v;
  if (auto v = kv.get_double("deform_sigma")) c.augment.sigma = *v;
  if (auto v = kv.get_int("deform_grid")) c.augment.grid_size = static_cast<int>(*v);
  if (auto v = kv.get_int("deform_order")) c.augment.spline_degree = static_cast<int>(*v);
  if (auto v = kv.get_bool("hist_match")) c.augment.histogram_match = *v;
  if (auto v = kv.get_u64("augment_seed")) c.augment_seed = *v;
  c.validate();
  return c;
}

void TrainConfig::to_kv(KeyValues& kv) const {
  kv.set("batch_size", std::to_string(batch_size));
  kv.set("momentum", format_real(momentum));
  kv.set("lr", format_real(learning_rate));
  kv.set("lr_decay_factor", format_real(decay_factor));
  kv.set("lr_decay_interval", std::to_string(decay_interval));
  kv.set("max_iter", std::to_string(max_iterations));
  kv.set("loss", to_string(loss));
  kv.set("dice_reduction", to_string(dice_reduction));
  kv.set("class_weights", class_weights ? format_real(class_weights->background) + "," +
                                              format_real(class_weights->foreground)
                                        : "inverse_frequency");
  kv.set("checkpoint_interval", std::to_string(checkpoint_interval));
  kv.set("seed", std::to_string(seed));
  kv.set("deform", augment.deform ? "true" : "false");
  kv.set("deform_sigma", format_real(augment.sigma));
  kv.set("deform_grid", std::to_string(augment.grid_size));
  kv.set("deform_order", std::to_string(augment.spline_degree));
  kv.set("hist_match", augment.histogram_match ? "true" : "false");
  kv.set("augment_seed", std::to_string(effective_augment_seed()));
}

const std::vector<std::string>& TrainConfig::keys() {
  static const std::vector<std::string> k{
      "batch_size", "momentum",     "lr",          "lr_decay_factor", "lr_decay_interval",
      "max_iter",   "loss",         "dice_reduction", "class_weights", "checkpoint_interval",
      "seed",       "deform",       "deform_sigma", "deform_grid",    "deform_order",
      "hist_match", "augment_seed"};
  return k;
}

double lr_schedule(int iteration, const TrainConfig& config) {
  if (iteration < 0) {
    throw InvalidArgument("lr_schedule: negative iteration");
  }
  const int drops = iteration / config.decay_interval;
  // A decade factor is applied as a division by 10 so 1e-4 lands exactly on 1e-5, 1e-6, ...
  if (config.decay_factor == 0.1) {
    return config.learning_rate / std::pow(10.0, drops);
  }
  return config.learning_rate * std::pow(config.decay_factor, drops);
}

void sgd_momentum_step(std::span<double> weights, std::span<const double> grads,
                       std::span<double> velocity, double lr, double momentum) {
  if (weights.size() != grads.size() || weights.size() != velocity.size()) {
    throw ShapeError("sgd step: " + std::to_string(weights.size()) + " weights, " +
                     std::to_string(grads.size()) + " gradients, " +
                     std::to_string(velocity.size()) + " velocities");
  }
  require_finite(grads, "gradient");
  for (std::size_t i = 0; i < weights.size(); ++i) {
    velocity[i] = momentum * velocity[i] - lr * grads[i];
    weights[i] += velocity[i];
  }
}

std::string format_history(const std::vector<HistoryRow>& rows) {
  std::string out = "iter,lr,loss,train_dice\n";
  for (const auto& r : rows) {
    out += std::to_string(r.iteration) + "," + format_g17(r.lr) + "," + format_g17(r.loss) + "," +
           format_g17(r.train_dice) + "\n";
  }
  return out;
}

std::vector<HistoryRow> parse_history(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<HistoryRow> rows;
  if (!std::getline(in, line) || line != "iter,lr,loss,train_dice") {
    throw FormatError("header", "history: expected 'iter,lr,loss,train_dice' header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const KeyValues kv = KeyValues::parse("row=" + line);
    const auto parts = kv.get_doubles("row");
    if (parts->size() != 4) {
      throw FormatError("row", "history: malformed row '" + line + "'");
    }
    rows.push_back({static_cast<int>((*parts)[0]), (*parts)[1], (*parts)[2], (*parts)[3]});
  }
  return rows;
}

TrainRun train(const Dataset& dataset, VNetModel& model, const TrainConfig& config,
               const TrainOptions& options, TrainRun run) {
  config.validate();
  const auto& params = model.parameters();
  if (run.velocities.empty()) {
    for (const auto& p : params) run.velocities.emplace_back(p.var->value.shape());
  }
  if (run.velocities.size() != params.size()) {
    throw ShapeError("optimiser state has " + std::to_string(run.velocities.size()) +
                     " velocity blocks for " + std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (run.velocities[i].shape() != params[i].var->value.shape()) {
      throw ShapeError("velocity of '" + params[i].name + "' has shape " +
                       to_string(run.velocities[i].shape()));
    }
  }
  if (run.iteration >= config.max_iterations) {
    return run;
  }

  const BatchSource source(dataset, config, model.config().input);
  BoundedQueue<Batch> queue(2);
  std::exception_ptr producer_error;
  const int first = run.iteration;
  std::jthread producer([&](std::stop_token stop) {
    try {
      for (int it = first; it < config.max_iterations && !stop.stop_requested(); ++it) {
        if (!queue.push(source.make(it))) return;
      }
    } catch (...) {
      producer_error = std::current_exception();
    }
    queue.close();
  });
  struct Closer {
    BoundedQueue<Batch>& q;
    ~Closer() { q.close(); }
  } closer{queue};

  while (run.iteration < config.max_iterations) {
    std::optional<Batch> batch = queue.pop();
    if (!batch) {
      producer.join();
      if (producer_error) std::rethrow_exception(producer_error);
      throw StateError("batch producer stopped early");
    }
    const int it = run.iteration;
    const double lr = lr_schedule(it, config);
    for (const auto& p : params) zero_grad(p.var);

    Tape tape;
    const Var x = constant(std::move(batch->images));
    Var loss;
    Tensor5 probs;
    try {
      const Var logits = model.forward(tape, x);
      if (config.loss == LossKind::dice) {
        const Var p = softmax_voxelwise(tape, logits);
        probs = p->value;
        loss = dice_loss(tape, p, batch->labels, config.dice_reduction);
      } else {
        const ClassWeights w = config.class_weights.value_or(inverse_frequency_weights(batch->labels));
        loss = weighted_logistic_loss(tape, logits, batch->labels, w);
        Tape scratch(false);
        probs = softmax_voxelwise(scratch, constant(logits->value))->value;
      }
      tape.backward(loss);
      for (std::size_t i = 0; i < params.size(); ++i) {
        require_finite(params[i].var->grad.span(), "gradient of " + params[i].name);
      }
    } catch (const NumericError& e) {
      throw NumericError("iteration " + std::to_string(it) + ": " + e.what());
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      Node& node = *params[i].var;
      sgd_momentum_step(node.value.span(), node.grad_buffer().span(), run.velocities[i].span(), lr,
                        config.momentum);
    }

    const HistoryRow row{it, lr, loss->value[0], batch_hard_dice(probs, batch->labels)};
    run.history.push_back(row);
    run.iteration = it + 1;
    if (options.on_iteration) options.on_iteration(row);
    const bool last = run.iteration == config.max_iterations;
    if (last || run.iteration % config.checkpoint_interval == 0) {
      write_outputs(options, model, config, run, true);
    }
  }
  return run;
}

std::string checkpoint_filename(int iteration) {
  return "ckpt_" + std::to_string(iteration) + ".vpar";
}

Checkpoint make_checkpoint(const VNetModel& model, const TrainConfig& config, const TrainRun& run) {
  Checkpoint ckpt;
  KeyValues net;
  model.config().to_kv(net);
  for (const auto& [k, v] : net.entries()) ckpt.meta.set("net." + k, v);
  KeyValues tr;
  config.to_kv(tr);
  for (const auto& [k, v] : tr.entries()) ckpt.meta.set("train." + k, v);
  ckpt.meta.set("iteration", std::to_string(run.iteration));

  const auto& params = model.parameters();
  for (const auto& p : params) ckpt.blocks.emplace_back(p.name, p.var->value);
  for (std::size_t i = 0; i < params.size() && i < run.velocities.size(); ++i) {
    ckpt.blocks.emplace_back("velocity/" + params[i].name, run.velocities[i]);
  }
  return ckpt;
}

namespace {

KeyValues strip_prefix(const KeyValues& kv, const std::string& prefix) {
  KeyValues out;
  for (const auto& [k, v] : kv.entries()) {
    if (k.rfind(prefix, 0) == 0) out.set(k.substr(prefix.size()), v);
  }
  return out;
}

void load_parameters(const Checkpoint& ckpt, VNetModel& model) {
  for (const auto& p : model.parameters()) {
    const Tensor5* t = ckpt.find(p.name);
    if (!t) {
      throw FormatError("block", "checkpoint lacks parameter '" + p.name + "'");
    }
    if (t->shape() != p.var->value.shape()) {
      throw FormatError("block", "checkpoint parameter '" + p.name + "' has shape " +
                                     to_string(t->shape()) + ", model expects " +
                                     to_string(p.var->value.shape()));
    }
    p.var->value = *t;
  }
}

}  // namespace

RestoredTraining restore_checkpoint(const Checkpoint& ckpt, std::vector<HistoryRow> history) {
  const NetworkConfig net = NetworkConfig::from_kv(strip_prefix(ckpt.meta, "net."), NetworkConfig{});
  const TrainConfig tc = TrainConfig::from_kv(strip_prefix(ckpt.meta, "train."), TrainConfig{});
  const auto iteration = ckpt.meta.get_int("iteration");
  if (!iteration || *iteration < 0) {
    throw FormatError("meta", "checkpoint lacks a valid 'iteration'");
  }
  RestoredTraining r{VNetModel::build(net, tc.seed), tc, {}};
  load_parameters(ckpt, r.model);
  r.run.iteration = static_cast<int>(*iteration);
  for (const auto& p : r.model.parameters()) {
    const Tensor5* v = ckpt.find("velocity/" + p.name);
    if (!v || v->shape() != p.var->value.shape()) {
      throw FormatError("block", "checkpoint lacks a matching velocity for '" + p.name + "'");
    }
    r.run.velocities.push_back(*v);
  }
  std::erase_if(history, [&](const HistoryRow& row) { return row.iteration >= r.run.iteration; });
  r.run.history = std::move(history);
  return r;
}

VNetModel load_model(const std::filesystem::path& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  const NetworkConfig net = NetworkConfig::from_kv(strip_prefix(ckpt.meta, "net."), NetworkConfig{});
  VNetModel model = VNetModel::build(net, 0);
  load_parameters(ckpt, model);
  return model;
}

}  // namespace vnet
