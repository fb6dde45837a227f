#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace speechyolo::nn {

// Dense NCHW float tensor. Fully connected activations use h = w = 1.
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<float> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_) : n(n_), c(c_), h(h_), w(w_),
      data(static_cast<std::size_t>(n_) * c_ * h_ * w_, 0.0f) {}

  std::size_t per_example() const { return static_cast<std::size_t>(c) * h * w; }
  float* example(int i) { return data.data() + i * per_example(); }
  const float* example(int i) const { return data.data() + i * per_example(); }
};

// A named parameter or buffer. Buffers (batch-norm running statistics) are
// checkpointed and checksummed but never receive gradients.
struct Param {
  std::string name;
  std::vector<float> value;
  std::vector<float> grad;
  bool trainable = true;
};

class Layer {
 public:
  virtual ~Layer() = default;
  // Read-only inference path; safe to call concurrently.
  virtual Tensor infer(const Tensor& x) const = 0;
  // Training forward; caches what backward needs.
  virtual Tensor forward(const Tensor& x) = 0;
  // Returns d loss / d input and accumulates parameter gradients.
  virtual Tensor backward(const Tensor& dy) = 0;
  virtual std::vector<Param*> params() { return {}; }
  virtual std::string kind() const = 0;
};

// 3x3 convolution, stride 1, zero padding 1.
class Conv2d : public Layer {
 public:
  Conv2d(int in_channels, int out_channels, std::string name);
  void init(std::mt19937_64& rng);
  Tensor infer(const Tensor& x) const override;
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  std::vector<Param*> params() override { return {&weight_, &bias_}; }
  std::string kind() const override { return "conv"; }

 private:
  int in_, out_;
  Param weight_, bias_;  // weight is out x (in * 9), row-major
  Tensor input_;
};

// Per-channel batch normalization with learned affine.
class BatchNorm2d : public Layer {
 public:
  BatchNorm2d(int channels, std::string name, float momentum = 0.1f, float eps = 1e-5f);
  Tensor infer(const Tensor& x) const override;
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  std::vector<Param*> params() override {
    return {&gamma_, &beta_, &running_mean_, &running_var_};
  }
  std::string kind() const override { return "batchnorm"; }

 private:
  int channels_;
  float momentum_, eps_;
  Param gamma_, beta_, running_mean_, running_var_;
  Tensor xhat_;
  std::vector<float> inv_std_;
};

class ReLU : public Layer {
 public:
  Tensor infer(const Tensor& x) const override;
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  std::string kind() const override { return "relu"; }

 private:
  Tensor output_;
};

// 2x2 max pooling, stride 2; odd trailing rows/columns are dropped.
class MaxPool2d : public Layer {
 public:
  Tensor infer(const Tensor& x) const override;
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  std::string kind() const override { return "maxpool"; }

 private:
  int in_h_ = 0, in_w_ = 0;
  std::vector<std::uint32_t> argmax_;
};

// Collapses C x H x W into C*H*W x 1 x 1.
class Flatten : public Layer {
 public:
  Tensor infer(const Tensor& x) const override;
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  std::string kind() const override { return "flatten"; }

 private:
  int c_ = 0, h_ = 0, w_ = 0;
};

class Linear : public Layer {
 public:
  Linear(int in_features, int out_features, std::string name);
  void init(std::mt19937_64& rng);
  int in_features() const { return in_; }
  int out_features() const { return out_; }
  Tensor infer(const Tensor& x) const override;
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  std::vector<Param*> params() override { return {&weight_, &bias_}; }
  std::string kind() const override { return "linear"; }

 private:
  int in_, out_;
  Param weight_, bias_;  // weight is out x in, row-major
  Tensor input_;
};

class Sigmoid : public Layer {
 public:
  Tensor infer(const Tensor& x) const override;
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  std::string kind() const override { return "sigmoid"; }

 private:
  Tensor output_;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam moments, one slot per trainable parameter in registration order.
struct AdamState {
  std::int64_t step = 0;
  std::vector<std::vector<float>> m, v;
};

void adam_step(const std::vector<Param*>& params, AdamState& state, const AdamConfig& cfg);

}  // namespace speechyolo::nn
