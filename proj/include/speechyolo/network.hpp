#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "speechyolo/features.hpp"
#include "speechyolo/grid.hpp"
#include "speechyolo/layers.hpp"
#include "speechyolo/loss.hpp"

namespace speechyolo {

// Convolution plan plus the hidden fully connected widths that sit between
// the flattened conv output and the replaceable head layer. Every conv is
// followed by batch norm and ReLU.
struct BackboneSpec {
  static constexpr int kPool = 0;  // marker in conv_schedule

  std::string name;
  std::vector<int> conv_schedule;  // output channels, or kPool
  std::vector<int> fc_widths;      // hidden layers, each followed by ReLU
  int input_bins = 257;
  int input_frames = 99;

  // "vgg19star" (16 conv), "vgg11star" (8 conv), or "tiny" (4 conv).
  static BackboneSpec preset(const std::string& name, int input_bins, int input_frames);

  int conv_layer_count() const;
  void validate() const;
  bool operator==(const BackboneSpec&) const = default;
};

struct ModelHead {
  enum class Kind { kDetection, kClassification };
  Kind kind = Kind::kDetection;
  GridConfig grid;  // detection heads
  int classes = 0;  // classification heads

  static ModelHead detection(const GridConfig& grid) { return {Kind::kDetection, grid, 0}; }
  static ModelHead classification(int classes) { return {Kind::kClassification, {}, classes}; }
  int output_dim() const { return kind == Kind::kDetection ? grid.output_dim() : classes; }
};

class Model {
 public:
  Model(BackboneSpec spec, ModelHead head, std::uint64_t seed, bool normalize_input = true);

  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  const BackboneSpec& spec() const { return spec_; }
  const ModelHead& head() const { return head_spec_; }
  bool normalize_input() const { return normalize_input_; }

  // Sigmoid outputs for one feature matrix; read-only.
  std::vector<float> infer(const FeatureMatrix& features) const;
  // Detection heads only.
  PredictionGrid forward(const FeatureMatrix& features) const;

  // Training-mode forward over a batch (batch-norm uses batch statistics);
  // returns an N x output_dim tensor of sigmoid outputs.
  nn::Tensor forward_train(std::span<const FeatureMatrix* const> batch);
  void backward(const nn::Tensor& grad_output);
  void zero_grad();

  // Every parameter and buffer, backbone first, head last.
  std::vector<nn::Param*> params();
  std::vector<const nn::Param*> params() const;
  std::vector<const nn::Param*> backbone_params() const;
  // FNV-1a over the raw bytes of every backbone parameter and buffer.
  std::uint64_t backbone_checksum() const;

  // Re-initializes the final linear layer for `head`; earlier layers are
  // untouched. Each call draws fresh weights from the model's generator.
  void replace_head(const ModelHead& head);

  std::mt19937_64& rng() { return rng_; }
  const std::mt19937_64& rng() const { return rng_; }

 private:
  nn::Tensor to_input(std::span<const FeatureMatrix* const> batch) const;

  BackboneSpec spec_;
  ModelHead head_spec_;
  bool normalize_input_;
  std::mt19937_64 rng_;
  std::vector<std::unique_ptr<nn::Layer>> backbone_;
  int flat_dim_ = 0;
  int head_in_ = 0;
  std::unique_ptr<nn::Linear> head_;
  nn::Sigmoid sigmoid_;
};

// Swaps a detection head sized for `grid` onto `model`.
void replace_head(Model& model, const GridConfig& grid);

struct OptimizerConfig {
  std::string algorithm = "adam";
  double learning_rate = 1e-3;
  int epochs = 30;
  int batch_size = 16;
  std::uint64_t seed = 0;
};

// Resumable training progress.
struct TrainState {
  int epochs_done = 0;
  nn::AdamState adam;
};

struct LabeledExample {
  FeatureMatrix features;
  int label = 0;
};

struct PretrainReport {
  double accuracy = 0.0;    // on the training corpus, inference mode
  double final_loss = 0.0;  // mean squared error of the last epoch
};

// Trains a classification-headed model with squared error against one-hot
// targets. Throws InvalidInput on an empty corpus, out-of-range labels, or
// a model whose head is not a classifier.
PretrainReport pretrain_classifier(Model& model, std::span<const LabeledExample> corpus,
                                   int epochs, const OptimizerConfig& opt);

struct DetectionExample {
  FeatureMatrix features;
  TargetGrid target;
  std::vector<Event> events;  // all reference events, for evaluation
};

struct EpochLog {
  int epoch = 0;  // 1-based
  LossBreakdown mean_loss;
  std::optional<double> heldout_f1;
  double heldout_theta = 0.0;
};

struct TrainingLog {
  std::vector<LossBreakdown> steps;
  std::vector<EpochLog> epochs;
};

struct TrainHooks {
  std::function<void(const LossBreakdown&)> on_step;
  std::function<void(const EpochLog&, const Model&, const TrainState&)> on_epoch;
};

// Mini-batch training of the detection loss (mean over the batch). Runs
// epochs state.epochs_done + 1 .. opt.epochs; batch order depends only on
// (seed, epoch), so a resumed run matches an uninterrupted one. Throws
// DivergenceError on a non-finite loss.
TrainingLog train_detector(Model& model, std::span<const DetectionExample> train,
                           std::span<const DetectionExample> heldout, const LossWeights& weights,
                           LossMode mode, const OptimizerConfig& opt, TrainState& state,
                           const TrainHooks& hooks = {});

}  // namespace speechyolo
