#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace mtb::nn {

// Dense NCHW batch tensor. Fully-connected activations use (n, c, 1, 1).
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<float> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_, 0.0f) {}

  std::size_t size() const { return data.size(); }
  std::size_t chw() const { return static_cast<std::size_t>(c) * h * w; }
  float* ptr() { return data.data(); }
  const float* ptr() const { return data.data(); }
  float* sample(int i) { return data.data() + i * chw(); }
  const float* sample(int i) const { return data.data() + i * chw(); }
  void zero() { std::fill(data.begin(), data.end(), 0.0f); }
  void resize(int n_, int c_, int h_, int w_) {
    n = n_; c = c_; h = h_; w = w_;
    data.assign(static_cast<std::size_t>(n_) * c_ * h_ * w_, 0.0f);
  }
};

struct Param {
  float* value = nullptr;
  float* grad = nullptr;
  std::size_t count = 0;
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual void forward(const Tensor& x, Tensor& y, bool train) = 0;
  // Consumes the gradient w.r.t. the forward output; accumulates parameter
  // gradients and writes the gradient w.r.t. the forward input.
  virtual void backward(const Tensor& dy, Tensor& dx) = 0;
  virtual void collect_params(std::vector<Param>& out) {}
  // Persistent state (parameters plus any running statistics).
  virtual void save_state(std::vector<float>& out) const {}
  virtual void load_state(const float*& in) {}
};

class Conv2d : public Layer {
 public:
  Conv2d(int in_c, int out_c, int kernel, int stride, int pad, std::uint64_t init_seed);

  void forward(const Tensor& x, Tensor& y, bool train) override;
  void backward(const Tensor& dy, Tensor& dx) override;
  void collect_params(std::vector<Param>& out) override;
  void save_state(std::vector<float>& out) const override;
  void load_state(const float*& in) override;

  int in_channels() const { return in_c_; }
  int out_channels() const { return out_c_; }
  // Direct weight access for pruning; rows are output channels.
  std::vector<float>& weights() { return w_; }
  std::vector<float>& bias() { return b_; }
  std::size_t weights_per_channel() const { return static_cast<std::size_t>(in_c_) * k_ * k_; }

 private:
  int in_c_, out_c_, k_, stride_, pad_;
  std::vector<float> w_, b_, gw_, gb_;
  Tensor x_cache_;
  std::vector<float> col_;  // per-sample im2col scratch

  int out_dim(int in) const { return (in + 2 * pad_ - k_) / stride_ + 1; }
  void im2col(const float* x, int h, int w, float* col) const;
  void col2im(const float* col, int h, int w, float* dx) const;
};

class ReLU : public Layer {
 public:
  void forward(const Tensor& x, Tensor& y, bool train) override;
  void backward(const Tensor& dy, Tensor& dx) override;

 private:
  std::vector<std::uint8_t> mask_;
  int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
};

class MaxPool2 : public Layer {
 public:
  void forward(const Tensor& x, Tensor& y, bool train) override;
  void backward(const Tensor& dy, Tensor& dx) override;

 private:
  std::vector<std::int32_t> argmax_;
  int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
};

class Linear : public Layer {
 public:
  Linear(int in_f, int out_f, std::uint64_t init_seed);

  void forward(const Tensor& x, Tensor& y, bool train) override;
  void backward(const Tensor& dy, Tensor& dx) override;
  void collect_params(std::vector<Param>& out) override;
  void save_state(std::vector<float>& out) const override;
  void load_state(const float*& in) override;

 private:
  int in_f_, out_f_;
  std::vector<float> w_, b_, gw_, gb_;
  Tensor x_cache_;
};

class BatchNorm2d : public Layer {
 public:
  explicit BatchNorm2d(int channels);

  void forward(const Tensor& x, Tensor& y, bool train) override;
  void backward(const Tensor& dy, Tensor& dx) override;
  void collect_params(std::vector<Param>& out) override;
  void save_state(std::vector<float>& out) const override;
  void load_state(const float*& in) override;

 private:
  int c_;
  float eps_ = 1e-5f, momentum_ = 0.1f;
  std::vector<float> gamma_, beta_, g_gamma_, g_beta_;
  std::vector<float> running_mean_, running_var_;
  std::vector<float> batch_mean_, batch_inv_std_;
  Tensor x_hat_;
};

class GlobalAvgPool : public Layer {
 public:
  void forward(const Tensor& x, Tensor& y, bool train) override;
  void backward(const Tensor& dy, Tensor& dx) override;

 private:
  int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
};

// Mean softmax cross-entropy over the batch; fills dlogits when given.
float softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                            Tensor* dlogits);
// Row-wise argmax of logits.
std::vector<int> argmax_rows(const Tensor& logits);

struct ModelConfig {
  std::string architecture = "small-cnn";  // "small-cnn" | "resnet18-like"
  int num_classes = 10;
  float width_mult = 1.0f;

  bool operator==(const ModelConfig&) const = default;
};

class Network {
 public:
  virtual ~Network() = default;
  virtual const Tensor& forward(const Tensor& x, bool train) = 0;
  virtual void backward(const Tensor& dlogits, bool need_input_grad = false) = 0;
  virtual const Tensor& input_grad() const = 0;
  // Penultimate activations captured by the last forward.
  virtual const Tensor& features() const = 0;
  virtual int feature_dim() const = 0;
  virtual std::vector<Param> params() = 0;
  virtual std::vector<float> save_state() const = 0;
  virtual void load_state(const std::vector<float>& state) = 0;
  // Final convolution stage (the one fine-pruning ranks); null when the
  // architecture has no convolution.
  virtual Conv2d* final_conv() = 0;
  // Post-ReLU activations of that stage from the last forward.
  virtual const Tensor& final_conv_activations() const = 0;
};

std::unique_ptr<Network> make_network(const ModelConfig& cfg, std::uint64_t init_seed);

// SGD with momentum and decoupled-from-schedule weight decay:
//   v <- momentum*v + g + weight_decay*w ; w <- w - lr*v
class SgdOptimizer {
 public:
  SgdOptimizer(float momentum, float weight_decay) : momentum_(momentum), weight_decay_(weight_decay) {}

  void bind(const std::vector<Param>& params);
  void zero_grad(const std::vector<Param>& params);
  void step(const std::vector<Param>& params, float lr);

 private:
  float momentum_, weight_decay_;
  std::vector<std::vector<float>> velocity_;
};

// Caps the BLAS thread pool; deterministic runs use a single thread.
void set_blas_threads(int n);

}  // namespace mtb::nn
