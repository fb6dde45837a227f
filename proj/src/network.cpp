#include "speechyolo/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "speechyolo/error.hpp"
#include "speechyolo/metrics.hpp"

namespace speechyolo {

namespace {

constexpr int P = BackboneSpec::kPool;

}  // namespace

BackboneSpec BackboneSpec::preset(const std::string& name, int input_bins, int input_frames) {
  BackboneSpec spec;
  spec.name = name;
  spec.input_bins = input_bins;
  spec.input_frames = input_frames;
  if (name == "vgg19star") {
    spec.conv_schedule = {64,  64,  P,   128, 128, P,   256, 256, 256, 256, P,
                          512, 512, 512, 512, P,   512, 512, 512, 512, P};
    spec.fc_widths = {1024};
  } else if (name == "vgg11star") {
    spec.conv_schedule = {64, P, 128, P, 256, 256, P, 512, 512, P, 512, 512, P};
    spec.fc_widths = {1024};
  } else if (name == "tiny") {
    spec.conv_schedule = {32, P, 32, P, 64, P, 64, P};
    spec.fc_widths = {};
  } else {
    throw InvalidInput("unknown backbone '" + name + "'");
  }
  return spec;
}

int BackboneSpec::conv_layer_count() const {
  return static_cast<int>(std::count_if(conv_schedule.begin(), conv_schedule.end(),
                                        [](int c) { return c != kPool; }));
}

void BackboneSpec::validate() const {
  if (input_bins < 1 || input_frames < 1) throw InvalidInput("backbone input shape is empty");
  int h = input_bins, w = input_frames;
  for (int c : conv_schedule) {
    if (c < 0) throw InvalidInput("negative channel count in conv schedule");
    if (c == kPool) {
      h /= 2;
      w /= 2;
      if (h < 1 || w < 1) throw InvalidInput("input too small for the pooling schedule");
    }
  }
  for (int f : fc_widths) {
    if (f < 1) throw InvalidInput("fully connected widths must be positive");
  }
}

Model::Model(BackboneSpec spec, ModelHead head, std::uint64_t seed, bool normalize_input)
    : spec_(std::move(spec)),
      head_spec_(head),
      normalize_input_(normalize_input),
      rng_(seed) {
  spec_.validate();
  if (head.kind == ModelHead::Kind::kDetection) head.grid.validate();
  if (head.output_dim() < 1) throw InvalidInput("model head has no outputs");

  int channels = 1, h = spec_.input_bins, w = spec_.input_frames, conv = 0;
  for (int c : spec_.conv_schedule) {
    if (c == BackboneSpec::kPool) {
      backbone_.push_back(std::make_unique<nn::MaxPool2d>());
      h /= 2;
      w /= 2;
      continue;
    }
    const std::string name = "conv" + std::to_string(conv++);
    auto layer = std::make_unique<nn::Conv2d>(channels, c, name);
    layer->init(rng_);
    backbone_.push_back(std::move(layer));
    backbone_.push_back(std::make_unique<nn::BatchNorm2d>(c, name + ".bn"));
    backbone_.push_back(std::make_unique<nn::ReLU>());
    channels = c;
  }
  backbone_.push_back(std::make_unique<nn::Flatten>());
  flat_dim_ = channels * h * w;
  int width = flat_dim_;
  for (std::size_t i = 0; i < spec_.fc_widths.size(); ++i) {
    auto fc = std::make_unique<nn::Linear>(width, spec_.fc_widths[i], "fc" + std::to_string(i));
    fc->init(rng_);
    backbone_.push_back(std::move(fc));
    backbone_.push_back(std::make_unique<nn::ReLU>());
    width = spec_.fc_widths[i];
  }
  head_in_ = width;
  replace_head(head);
}

void Model::replace_head(const ModelHead& head) {
  if (head.kind == ModelHead::Kind::kDetection) head.grid.validate();
  if (head.output_dim() < 1) throw InvalidInput("model head has no outputs");
  head_spec_ = head;
  head_ = std::make_unique<nn::Linear>(head_in_, head.output_dim(), "head");
  head_->init(rng_);
}

void replace_head(Model& model, const GridConfig& grid) {
  model.replace_head(ModelHead::detection(grid));
}

nn::Tensor Model::to_input(std::span<const FeatureMatrix* const> batch) const {
  nn::Tensor x(static_cast<int>(batch.size()), 1, spec_.input_bins, spec_.input_frames);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const FeatureMatrix& f = *batch[i];
    if (f.rows() != spec_.input_bins || f.cols() != spec_.input_frames) {
      throw InvalidInput("feature shape " + std::to_string(f.rows()) + "x" +
                         std::to_string(f.cols()) + " does not match model input " +
                         std::to_string(spec_.input_bins) + "x" +
                         std::to_string(spec_.input_frames));
    }
    const FeatureMatrix g = normalize_input_ ? normalize_features(f) : f;
    std::memcpy(x.example(static_cast<int>(i)), g.data(), sizeof(float) * g.size());
  }
  return x;
}

std::vector<float> Model::infer(const FeatureMatrix& features) const {
  const FeatureMatrix* one[] = {&features};
  nn::Tensor x = to_input(one);
  for (const auto& layer : backbone_) x = layer->infer(x);
  return sigmoid_.infer(head_->infer(x)).data;
}

PredictionGrid Model::forward(const FeatureMatrix& features) const {
  if (head_spec_.kind != ModelHead::Kind::kDetection) {
    throw InvalidInput("forward: model has a classification head");
  }
  std::vector<float> out = infer(features);
  std::vector<double> values(out.begin(), out.end());
  return vector_to_grid(values, head_spec_.grid);
}

nn::Tensor Model::forward_train(std::span<const FeatureMatrix* const> batch) {
  nn::Tensor x = to_input(batch);
  for (auto& layer : backbone_) x = layer->forward(x);
  return sigmoid_.forward(head_->forward(x));
}

void Model::backward(const nn::Tensor& grad_output) {
  nn::Tensor g = head_->backward(sigmoid_.backward(grad_output));
  for (auto it = backbone_.rbegin(); it != backbone_.rend(); ++it) g = (*it)->backward(g);
}

void Model::zero_grad() {
  for (nn::Param* p : params()) std::fill(p->grad.begin(), p->grad.end(), 0.0f);
}

std::vector<nn::Param*> Model::params() {
  std::vector<nn::Param*> out;
  for (auto& layer : backbone_) {
    for (nn::Param* p : layer->params()) out.push_back(p);
  }
  for (nn::Param* p : head_->params()) out.push_back(p);
  return out;
}

std::vector<const nn::Param*> Model::params() const {
  auto mutable_params = const_cast<Model*>(this)->params();
  return {mutable_params.begin(), mutable_params.end()};
}

std::vector<const nn::Param*> Model::backbone_params() const {
  std::vector<const nn::Param*> out;
  for (const auto& layer : backbone_) {
    for (nn::Param* p : layer->params()) out.push_back(p);
  }
  return out;
}

std::uint64_t Model::backbone_checksum() const {
  std::uint64_t h = 1469598103934665603ull;
  for (const nn::Param* p : backbone_params()) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p->value.data());
    for (std::size_t i = 0; i < p->value.size() * sizeof(float); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  }
  return h;
}

namespace {

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(epoch));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

nn::AdamConfig adam_config(const OptimizerConfig& opt) {
  if (opt.algorithm != "adam") throw InvalidInput("unsupported optimizer '" + opt.algorithm + "'");
  if (opt.batch_size < 1) throw InvalidInput("batch_size must be >= 1");
  if (opt.learning_rate < 0) throw InvalidInput("learning rate must be non-negative");
  nn::AdamConfig cfg;
  cfg.learning_rate = opt.learning_rate;
  return cfg;
}

std::optional<double> heldout_f1(const Model& model, std::span<const DetectionExample> heldout,
                                 double* theta_out) {
  if (heldout.empty()) return std::nullopt;
  const GridConfig& grid = model.head().grid;
  std::vector<ScoredUtterance> scored;
  scored.reserve(heldout.size());
  for (const auto& ex : heldout) {
    scored.push_back({"", decode(model.forward(ex.features), 0.0, grid), ex.events});
  }
  auto thetas = default_theta_grid();
  auto sweep = sweep_threshold(scored, thetas);
  *theta_out = sweep.best_theta;
  return sweep.best.f1;
}

}  // namespace

PretrainReport pretrain_classifier(Model& model, std::span<const LabeledExample> corpus,
                                   int epochs, const OptimizerConfig& opt) {
  if (corpus.empty()) throw InvalidInput("pretrain_classifier: empty corpus");
  if (model.head().kind != ModelHead::Kind::kClassification) {
    throw InvalidInput("pretrain_classifier: model needs a classification head");
  }
  const int classes = model.head().classes;
  for (const auto& ex : corpus) {
    if (ex.label < 0 || ex.label >= classes) throw InvalidInput("label out of range");
  }
  const nn::AdamConfig adam = adam_config(opt);
  nn::AdamState state;
  PretrainReport report;

  for (int epoch = 1; epoch <= epochs; ++epoch) {
    auto order = epoch_order(corpus.size(), opt.seed, epoch);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
      const std::size_t end = std::min(order.size(), start + opt.batch_size);
      std::vector<const FeatureMatrix*> batch;
      for (std::size_t b = start; b < end; ++b) batch.push_back(&corpus[order[b]].features);
      const int n = static_cast<int>(batch.size());

      model.zero_grad();
      nn::Tensor out = model.forward_train(batch);
      nn::Tensor grad(n, classes, 1, 1);
      for (int i = 0; i < n; ++i) {
        const int label = corpus[order[start + i]].label;
        for (int k = 0; k < classes; ++k) {
          const double diff = out.example(i)[k] - (k == label ? 1.0 : 0.0);
          epoch_loss += diff * diff;
          grad.example(i)[k] = static_cast<float>(2.0 * diff / n);
        }
      }
      if (!std::isfinite(epoch_loss)) throw DivergenceError("pretraining loss is not finite");
      model.backward(grad);
      nn::adam_step(model.params(), state, adam);
    }
    report.final_loss = epoch_loss / corpus.size();
  }

  long correct = 0;
  for (const auto& ex : corpus) {
    auto out = model.infer(ex.features);
    int best = static_cast<int>(std::max_element(out.begin(), out.end()) - out.begin());
    if (best == ex.label) ++correct;
  }
  report.accuracy = static_cast<double>(correct) / corpus.size();
  return report;
}

TrainingLog train_detector(Model& model, std::span<const DetectionExample> train,
                           std::span<const DetectionExample> heldout, const LossWeights& weights,
                           LossMode mode, const OptimizerConfig& opt, TrainState& state,
                           const TrainHooks& hooks) {
  if (model.head().kind != ModelHead::Kind::kDetection) {
    throw InvalidInput("train_detector: model needs a detection head");
  }
  if (train.empty()) throw InvalidInput("train_detector: empty training corpus");
  weights.validate();
  const nn::AdamConfig adam = adam_config(opt);
  const GridConfig& grid = model.head().grid;
  const int dim = grid.output_dim();
  TrainingLog log;

  for (int epoch = state.epochs_done + 1; epoch <= opt.epochs; ++epoch) {
    auto order = epoch_order(train.size(), opt.seed, epoch);
    LossBreakdown epoch_sum;
    int steps = 0;
    for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
      const std::size_t end = std::min(order.size(), start + opt.batch_size);
      std::vector<const FeatureMatrix*> batch;
      for (std::size_t b = start; b < end; ++b) batch.push_back(&train[order[b]].features);
      const int n = static_cast<int>(batch.size());

      model.zero_grad();
      nn::Tensor out = model.forward_train(batch);
      nn::Tensor grad(n, dim, 1, 1);
      LossBreakdown step_loss;
      for (int i = 0; i < n; ++i) {
        std::vector<double> values(out.example(i), out.example(i) + dim);
        auto result = speechyolo_loss(vector_to_grid(values, grid), train[order[start + i]].target,
                                      grid, weights, mode);
        step_loss += result.breakdown;
        auto g = grid_to_vector(result.gradient);
        for (int k = 0; k < dim; ++k) grad.example(i)[k] = static_cast<float>(g[k] / n);
      }
      step_loss = step_loss.scaled(1.0 / n);
      if (!std::isfinite(step_loss.total)) {
        throw DivergenceError("loss became non-finite at epoch " + std::to_string(epoch) +
                              ", step " + std::to_string(steps + 1));
      }
      model.backward(grad);
      nn::adam_step(model.params(), state.adam, adam);
      log.steps.push_back(step_loss);
      if (hooks.on_step) hooks.on_step(step_loss);
      epoch_sum += step_loss;
      ++steps;
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.mean_loss = epoch_sum.scaled(1.0 / steps);
    entry.heldout_f1 = heldout_f1(model, heldout, &entry.heldout_theta);
    state.epochs_done = epoch;
    log.epochs.push_back(entry);
    if (hooks.on_epoch) hooks.on_epoch(entry, model, state);
  }
  return log;
}

}  // namespace speechyolo
