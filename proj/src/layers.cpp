#include "speechyolo/layers.hpp"

#include <Eigen/Core>

#include <cmath>
#include <limits>

#include "speechyolo/error.hpp"

namespace speechyolo::nn {

namespace {

using MatR = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;
using CVec = Eigen::Map<const Eigen::VectorXf>;
using Vec = Eigen::Map<Eigen::VectorXf>;

Param make_param(std::string name, std::size_t size, bool trainable = true) {
  Param p;
  p.name = std::move(name);
  p.value.assign(size, 0.0f);
  p.grad.assign(size, 0.0f);
  p.trainable = trainable;
  return p;
}

// Column matrix of 3x3 neighbourhoods: row (ci, ky, kx), column (y, x).
void im2col(const float* in, int channels, int h, int w, float* col) {
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int c = 0; c < channels; ++c) {
    const float* plane = in + c * hw;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        float* row = col + ((c * 3 + ky) * 3 + kx) * hw;
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - 1;
          float* dst = row + static_cast<std::size_t>(y) * w;
          if (sy < 0 || sy >= h) {
            std::fill(dst, dst + w, 0.0f);
            continue;
          }
          const float* src = plane + static_cast<std::size_t>(sy) * w;
          for (int x = 0; x < w; ++x) {
            const int sx = x + kx - 1;
            dst[x] = (sx >= 0 && sx < w) ? src[sx] : 0.0f;
          }
        }
      }
    }
  }
}

void col2im(const float* col, int channels, int h, int w, float* out) {
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  std::fill(out, out + channels * hw, 0.0f);
  for (int c = 0; c < channels; ++c) {
    float* plane = out + c * hw;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const float* row = col + ((c * 3 + ky) * 3 + kx) * hw;
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          const float* src = row + static_cast<std::size_t>(y) * w;
          float* dst = plane + static_cast<std::size_t>(sy) * w;
          for (int x = 0; x < w; ++x) {
            const int sx = x + kx - 1;
            if (sx >= 0 && sx < w) dst[sx] += src[x];
          }
        }
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int in_channels, int out_channels, std::string name)
    : in_(in_channels),
      out_(out_channels),
      weight_(make_param(name + ".weight", static_cast<std::size_t>(out_channels) * in_channels * 9)),
      bias_(make_param(name + ".bias", out_channels)) {}

void Conv2d::init(std::mt19937_64& rng) {
  // Kaiming normal, fan-out mode.
  std::normal_distribution<float> dist(0.0f, std::sqrt(2.0f / (out_ * 9.0f)));
  for (auto& v : weight_.value) v = dist(rng);
  std::fill(bias_.value.begin(), bias_.value.end(), 0.0f);
}

Tensor Conv2d::infer(const Tensor& x) const {
  if (x.c != in_) throw InvalidInput("conv: channel mismatch");
  Tensor y(x.n, out_, x.h, x.w);
  const int hw = x.h * x.w;
  std::vector<float> col(static_cast<std::size_t>(in_) * 9 * hw);
  CMapR wmat(weight_.value.data(), out_, in_ * 9);
  CVec b(bias_.value.data(), out_);
  for (int i = 0; i < x.n; ++i) {
    im2col(x.example(i), in_, x.h, x.w, col.data());
    MapR out(y.example(i), out_, hw);
    out.noalias() = wmat * CMapR(col.data(), in_ * 9, hw);
    out.colwise() += b;
  }
  return y;
}

Tensor Conv2d::forward(const Tensor& x) {
  input_ = x;
  return infer(x);
}

Tensor Conv2d::backward(const Tensor& dy) {
  const Tensor& x = input_;
  const int hw = x.h * x.w;
  Tensor dx(x.n, x.c, x.h, x.w);
  std::vector<float> col(static_cast<std::size_t>(in_) * 9 * hw);
  std::vector<float> dcol(col.size());
  CMapR wmat(weight_.value.data(), out_, in_ * 9);
  MapR dw(weight_.grad.data(), out_, in_ * 9);
  Vec db(bias_.grad.data(), out_);
  for (int i = 0; i < x.n; ++i) {
    CMapR g(dy.example(i), out_, hw);
    im2col(x.example(i), in_, x.h, x.w, col.data());
    dw.noalias() += g * CMapR(col.data(), in_ * 9, hw).transpose();
    db += g.rowwise().sum();
    MapR(dcol.data(), in_ * 9, hw).noalias() = wmat.transpose() * g;
    col2im(dcol.data(), in_, x.h, x.w, dx.example(i));
  }
  return dx;
}

// ----------------------------------------------------------- BatchNorm2d

BatchNorm2d::BatchNorm2d(int channels, std::string name, float momentum, float eps)
    : channels_(channels),
      momentum_(momentum),
      eps_(eps),
      gamma_(make_param(name + ".gamma", channels)),
      beta_(make_param(name + ".beta", channels)),
      running_mean_(make_param(name + ".running_mean", channels, false)),
      running_var_(make_param(name + ".running_var", channels, false)) {
  std::fill(gamma_.value.begin(), gamma_.value.end(), 1.0f);
  std::fill(running_var_.value.begin(), running_var_.value.end(), 1.0f);
}

Tensor BatchNorm2d::infer(const Tensor& x) const {
  if (x.c != channels_) throw InvalidInput("batchnorm: channel mismatch");
  Tensor y(x.n, x.c, x.h, x.w);
  const std::size_t hw = static_cast<std::size_t>(x.h) * x.w;
  for (int c = 0; c < channels_; ++c) {
    const float scale = gamma_.value[c] / std::sqrt(running_var_.value[c] + eps_);
    const float shift = beta_.value[c] - running_mean_.value[c] * scale;
    for (int i = 0; i < x.n; ++i) {
      const float* src = x.example(i) + c * hw;
      float* dst = y.example(i) + c * hw;
      for (std::size_t k = 0; k < hw; ++k) dst[k] = src[k] * scale + shift;
    }
  }
  return y;
}

Tensor BatchNorm2d::forward(const Tensor& x) {
  if (x.c != channels_) throw InvalidInput("batchnorm: channel mismatch");
  const std::size_t hw = static_cast<std::size_t>(x.h) * x.w;
  const double count = static_cast<double>(x.n) * hw;
  xhat_ = Tensor(x.n, x.c, x.h, x.w);
  inv_std_.assign(channels_, 0.0f);
  Tensor y(x.n, x.c, x.h, x.w);
  for (int c = 0; c < channels_; ++c) {
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < x.n; ++i) {
      const float* src = x.example(i) + c * hw;
      for (std::size_t k = 0; k < hw; ++k) {
        sum += src[k];
        sq += static_cast<double>(src[k]) * src[k];
      }
    }
    const double mean = sum / count;
    const double var = std::max(0.0, sq / count - mean * mean);
    const float inv = static_cast<float>(1.0 / std::sqrt(var + eps_));
    inv_std_[c] = inv;
    for (int i = 0; i < x.n; ++i) {
      const float* src = x.example(i) + c * hw;
      float* xh = xhat_.example(i) + c * hw;
      float* dst = y.example(i) + c * hw;
      for (std::size_t k = 0; k < hw; ++k) {
        xh[k] = (src[k] - static_cast<float>(mean)) * inv;
        dst[k] = gamma_.value[c] * xh[k] + beta_.value[c];
      }
    }
    const double unbiased = count > 1 ? var * count / (count - 1) : var;
    running_mean_.value[c] =
        (1 - momentum_) * running_mean_.value[c] + momentum_ * static_cast<float>(mean);
    running_var_.value[c] =
        (1 - momentum_) * running_var_.value[c] + momentum_ * static_cast<float>(unbiased);
  }
  return y;
}

Tensor BatchNorm2d::backward(const Tensor& dy) {
  const std::size_t hw = static_cast<std::size_t>(dy.h) * dy.w;
  const double count = static_cast<double>(dy.n) * hw;
  Tensor dx(dy.n, dy.c, dy.h, dy.w);
  for (int c = 0; c < channels_; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int i = 0; i < dy.n; ++i) {
      const float* g = dy.example(i) + c * hw;
      const float* xh = xhat_.example(i) + c * hw;
      for (std::size_t k = 0; k < hw; ++k) {
        sum_dy += g[k];
        sum_dy_xhat += static_cast<double>(g[k]) * xh[k];
      }
    }
    gamma_.grad[c] += static_cast<float>(sum_dy_xhat);
    beta_.grad[c] += static_cast<float>(sum_dy);
    const float scale = gamma_.value[c] * inv_std_[c];
    const float mean_dy = static_cast<float>(sum_dy / count);
    const float mean_dy_xhat = static_cast<float>(sum_dy_xhat / count);
    for (int i = 0; i < dy.n; ++i) {
      const float* g = dy.example(i) + c * hw;
      const float* xh = xhat_.example(i) + c * hw;
      float* d = dx.example(i) + c * hw;
      for (std::size_t k = 0; k < hw; ++k) {
        d[k] = scale * (g[k] - mean_dy - xh[k] * mean_dy_xhat);
      }
    }
  }
  return dx;
}

// ------------------------------------------------------------------ ReLU

Tensor ReLU::infer(const Tensor& x) const {
  Tensor y = x;
  for (auto& v : y.data) v = std::max(v, 0.0f);
  return y;
}

Tensor ReLU::forward(const Tensor& x) {
  output_ = infer(x);
  return output_;
}

Tensor ReLU::backward(const Tensor& dy) {
  Tensor dx = dy;
  for (std::size_t k = 0; k < dx.data.size(); ++k) {
    if (output_.data[k] <= 0.0f) dx.data[k] = 0.0f;
  }
  return dx;
}

// ------------------------------------------------------------- MaxPool2d

namespace {

Tensor pool(const Tensor& x, std::vector<std::uint32_t>* argmax) {
  const int oh = x.h / 2, ow = x.w / 2;
  if (oh < 1 || ow < 1) throw InvalidInput("maxpool: input smaller than 2x2");
  Tensor y(x.n, x.c, oh, ow);
  if (argmax) argmax->assign(y.data.size(), 0);
  std::size_t o = 0;
  for (int i = 0; i < x.n; ++i) {
    for (int c = 0; c < x.c; ++c) {
      const float* plane = x.example(i) + static_cast<std::size_t>(c) * x.h * x.w;
      for (int yy = 0; yy < oh; ++yy) {
        for (int xx = 0; xx < ow; ++xx, ++o) {
          std::uint32_t best = (2 * yy) * x.w + 2 * xx;
          for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
              std::uint32_t idx = (2 * yy + dy) * x.w + 2 * xx + dx;
              if (plane[idx] > plane[best]) best = idx;
            }
          }
          y.data[o] = plane[best];
          if (argmax) (*argmax)[o] = best;
        }
      }
    }
  }
  return y;
}

}  // namespace

Tensor MaxPool2d::infer(const Tensor& x) const { return pool(x, nullptr); }

Tensor MaxPool2d::forward(const Tensor& x) {
  in_h_ = x.h;
  in_w_ = x.w;
  return pool(x, &argmax_);
}

Tensor MaxPool2d::backward(const Tensor& dy) {
  Tensor dx(dy.n, dy.c, in_h_, in_w_);
  const std::size_t plane = static_cast<std::size_t>(in_h_) * in_w_;
  const std::size_t out_plane = static_cast<std::size_t>(dy.h) * dy.w;
  for (std::size_t o = 0; o < dy.data.size(); ++o) {
    const std::size_t plane_index = o / out_plane;  // (example, channel)
    dx.data[plane_index * plane + argmax_[o]] += dy.data[o];
  }
  return dx;
}

// --------------------------------------------------------------- Flatten

Tensor Flatten::infer(const Tensor& x) const {
  Tensor y = x;
  y.c = x.c * x.h * x.w;
  y.h = y.w = 1;
  return y;
}

Tensor Flatten::forward(const Tensor& x) {
  c_ = x.c;
  h_ = x.h;
  w_ = x.w;
  return infer(x);
}

Tensor Flatten::backward(const Tensor& dy) {
  Tensor dx = dy;
  dx.c = c_;
  dx.h = h_;
  dx.w = w_;
  return dx;
}

// ---------------------------------------------------------------- Linear

Linear::Linear(int in_features, int out_features, std::string name)
    : in_(in_features),
      out_(out_features),
      weight_(make_param(name + ".weight", static_cast<std::size_t>(out_features) * in_features)),
      bias_(make_param(name + ".bias", out_features)) {}

void Linear::init(std::mt19937_64& rng) {
  std::normal_distribution<float> dist(0.0f, 0.01f);
  for (auto& v : weight_.value) v = dist(rng);
  std::fill(bias_.value.begin(), bias_.value.end(), 0.0f);
}

Tensor Linear::infer(const Tensor& x) const {
  if (static_cast<int>(x.per_example()) != in_) {
    throw InvalidInput("linear: expected " + std::to_string(in_) + " inputs, got " +
                       std::to_string(x.per_example()));
  }
  Tensor y(x.n, out_, 1, 1);
  CMapR wmat(weight_.value.data(), out_, in_);
  CVec b(bias_.value.data(), out_);
  // Per-example products keep each output independent of batch composition.
  for (int i = 0; i < x.n; ++i) {
    Vec(y.example(i), out_).noalias() = wmat * CVec(x.example(i), in_) + b;
  }
  return y;
}

Tensor Linear::forward(const Tensor& x) {
  input_ = x;
  return infer(x);
}

Tensor Linear::backward(const Tensor& dy) {
  const Tensor& x = input_;
  CMapR xs(x.data.data(), x.n, in_);
  CMapR g(dy.data.data(), dy.n, out_);
  MapR(weight_.grad.data(), out_, in_).noalias() += g.transpose() * xs;
  Vec(bias_.grad.data(), out_) += g.colwise().sum().transpose();
  Tensor dx(x.n, x.c, x.h, x.w);
  MapR(dx.data.data(), x.n, in_).noalias() = g * CMapR(weight_.value.data(), out_, in_);
  return dx;
}

// --------------------------------------------------------------- Sigmoid

Tensor Sigmoid::infer(const Tensor& x) const {
  Tensor y = x;
  for (auto& v : y.data) v = 1.0f / (1.0f + std::exp(-v));
  return y;
}

Tensor Sigmoid::forward(const Tensor& x) {
  output_ = infer(x);
  return output_;
}

Tensor Sigmoid::backward(const Tensor& dy) {
  Tensor dx = dy;
  for (std::size_t k = 0; k < dx.data.size(); ++k) {
    const float s = output_.data[k];
    dx.data[k] *= s * (1.0f - s);
  }
  return dx;
}

// ------------------------------------------------------------------ Adam

void adam_step(const std::vector<Param*>& params, AdamState& state, const AdamConfig& cfg) {
  std::vector<Param*> trainable;
  for (Param* p : params) {
    if (p->trainable) trainable.push_back(p);
  }
  if (state.m.size() != trainable.size()) {
    state.m.clear();
    state.v.clear();
    for (Param* p : trainable) {
      state.m.emplace_back(p->value.size(), 0.0f);
      state.v.emplace_back(p->value.size(), 0.0f);
    }
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const float b1 = static_cast<float>(cfg.beta1), b2 = static_cast<float>(cfg.beta2);
  const float step_size = static_cast<float>(cfg.learning_rate / bc1);
  const float inv_bc2 = static_cast<float>(1.0 / bc2);
  const float eps = static_cast<float>(cfg.eps);
  for (std::size_t n = 0; n < trainable.size(); ++n) {
    Param& p = *trainable[n];
    auto& m = state.m[n];
    auto& v = state.v[n];
    if (m.size() != p.value.size()) throw InvalidInput("adam state does not match parameters");
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const float g = p.grad[k];
      m[k] = b1 * m[k] + (1 - b1) * g;
      v[k] = b2 * v[k] + (1 - b2) * g * g;
      if (cfg.learning_rate != 0.0) {
        p.value[k] -= step_size * m[k] / (std::sqrt(v[k] * inv_bc2) + eps);
      }
    }
  }
}

}  // namespace speechyolo::nn
