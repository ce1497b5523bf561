#include "mtb/nn.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <stdexcept>

#include "mtb/error.hpp"
#include "mtb/rng.hpp"

extern "C" void openblas_set_num_threads(int);

namespace mtb::nn {

void set_blas_threads(int n) { openblas_set_num_threads(n); }

namespace {

// C(m x n) = alpha * op(A) * op(B) + beta * C, row-major.
void sgemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a, int lda,
           const float* b, int ldb, float beta, float* c, int ldc) {
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void he_init(std::vector<float>& w, std::size_t fan_in, std::uint64_t seed) {
  std::mt19937_64 eng(mtb::derive_seed(seed, "he-init"));
  std::normal_distribution<float> dist(0.0f, std::sqrt(2.0f / static_cast<float>(fan_in)));
  for (float& v : w) v = dist(eng);
}

void append(std::vector<float>& out, const std::vector<float>& v) {
  out.insert(out.end(), v.begin(), v.end());
}

void take(const float*& in, std::vector<float>& v) {
  std::memcpy(v.data(), in, v.size() * sizeof(float));
  in += v.size();
}

}  // namespace

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int in_c, int out_c, int kernel, int stride, int pad, std::uint64_t init_seed)
    : in_c_(in_c), out_c_(out_c), k_(kernel), stride_(stride), pad_(pad) {
  w_.assign(static_cast<std::size_t>(out_c) * in_c * kernel * kernel, 0.0f);
  b_.assign(out_c, 0.0f);
  gw_.assign(w_.size(), 0.0f);
  gb_.assign(b_.size(), 0.0f);
  he_init(w_, static_cast<std::size_t>(in_c) * kernel * kernel, init_seed);
}

void Conv2d::im2col(const float* x, int h, int w, float* col) const {
  const int oh = out_dim(h), ow = out_dim(w);
  const std::size_t npos = static_cast<std::size_t>(oh) * ow;
  for (int ic = 0; ic < in_c_; ++ic) {
    const float* plane = x + static_cast<std::size_t>(ic) * h * w;
    for (int ky = 0; ky < k_; ++ky) {
      for (int kx = 0; kx < k_; ++kx) {
        float* dst = col + ((static_cast<std::size_t>(ic) * k_ + ky) * k_ + kx) * npos;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride_ - pad_ + ky;
          if (iy < 0 || iy >= h) {
            std::memset(dst + static_cast<std::size_t>(oy) * ow, 0, sizeof(float) * ow);
            continue;
          }
          const float* src_row = plane + static_cast<std::size_t>(iy) * w;
          float* dst_row = dst + static_cast<std::size_t>(oy) * ow;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride_ - pad_ + kx;
            dst_row[ox] = (ix >= 0 && ix < w) ? src_row[ix] : 0.0f;
          }
        }
      }
    }
  }
}

void Conv2d::col2im(const float* col, int h, int w, float* dx) const {
  const int oh = out_dim(h), ow = out_dim(w);
  const std::size_t npos = static_cast<std::size_t>(oh) * ow;
  for (int ic = 0; ic < in_c_; ++ic) {
    float* plane = dx + static_cast<std::size_t>(ic) * h * w;
    for (int ky = 0; ky < k_; ++ky) {
      for (int kx = 0; kx < k_; ++kx) {
        const float* src = col + ((static_cast<std::size_t>(ic) * k_ + ky) * k_ + kx) * npos;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride_ - pad_ + ky;
          if (iy < 0 || iy >= h) continue;
          float* dst_row = plane + static_cast<std::size_t>(iy) * w;
          const float* src_row = src + static_cast<std::size_t>(oy) * ow;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride_ - pad_ + kx;
            if (ix >= 0 && ix < w) dst_row[ix] += src_row[ox];
          }
        }
      }
    }
  }
}

void Conv2d::forward(const Tensor& x, Tensor& y, bool) {
  const int oh = out_dim(x.h), ow = out_dim(x.w);
  const std::size_t npos = static_cast<std::size_t>(oh) * ow;
  const int ick2 = in_c_ * k_ * k_;
  y.resize(x.n, out_c_, oh, ow);
  col_.resize(static_cast<std::size_t>(ick2) * npos);
  x_cache_ = x;
  for (int i = 0; i < x.n; ++i) {
    im2col(x.sample(i), x.h, x.w, col_.data());
    sgemm(false, false, out_c_, static_cast<int>(npos), ick2, 1.0f, w_.data(), ick2, col_.data(),
          static_cast<int>(npos), 0.0f, y.sample(i), static_cast<int>(npos));
    float* ys = y.sample(i);
    for (int oc = 0; oc < out_c_; ++oc) {
      const float bias = b_[oc];
      float* row = ys + static_cast<std::size_t>(oc) * npos;
      for (std::size_t p = 0; p < npos; ++p) row[p] += bias;
    }
  }
}

void Conv2d::backward(const Tensor& dy, Tensor& dx) {
  const Tensor& x = x_cache_;
  const int oh = dy.h, ow = dy.w;
  const std::size_t npos = static_cast<std::size_t>(oh) * ow;
  const int ick2 = in_c_ * k_ * k_;
  dx.resize(x.n, x.c, x.h, x.w);
  std::vector<float> dcol(static_cast<std::size_t>(ick2) * npos);
  for (int i = 0; i < x.n; ++i) {
    im2col(x.sample(i), x.h, x.w, col_.data());
    const float* dyi = dy.sample(i);
    // gw += dy_i * col_i^T
    sgemm(false, true, out_c_, ick2, static_cast<int>(npos), 1.0f, dyi, static_cast<int>(npos),
          col_.data(), static_cast<int>(npos), 1.0f, gw_.data(), ick2);
    for (int oc = 0; oc < out_c_; ++oc) {
      const float* row = dyi + static_cast<std::size_t>(oc) * npos;
      float acc = 0.0f;
      for (std::size_t p = 0; p < npos; ++p) acc += row[p];
      gb_[oc] += acc;
    }
    // dcol = W^T * dy_i, then scatter back to image layout.
    sgemm(true, false, ick2, static_cast<int>(npos), out_c_, 1.0f, w_.data(), ick2, dyi,
          static_cast<int>(npos), 0.0f, dcol.data(), static_cast<int>(npos));
    col2im(dcol.data(), x.h, x.w, dx.sample(i));
  }
}

void Conv2d::collect_params(std::vector<Param>& out) {
  out.push_back({w_.data(), gw_.data(), w_.size()});
  out.push_back({b_.data(), gb_.data(), b_.size()});
}

void Conv2d::save_state(std::vector<float>& out) const {
  append(out, w_);
  append(out, b_);
}

void Conv2d::load_state(const float*& in) {
  take(in, w_);
  take(in, b_);
}

// ---------------------------------------------------------------- ReLU

void ReLU::forward(const Tensor& x, Tensor& y, bool) {
  n_ = x.n; c_ = x.c; h_ = x.h; w_ = x.w;
  y.resize(x.n, x.c, x.h, x.w);
  mask_.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const bool on = x.data[i] > 0.0f;
    mask_[i] = on;
    y.data[i] = on ? x.data[i] : 0.0f;
  }
}

void ReLU::backward(const Tensor& dy, Tensor& dx) {
  dx.resize(n_, c_, h_, w_);
  for (std::size_t i = 0; i < dy.size(); ++i) dx.data[i] = mask_[i] ? dy.data[i] : 0.0f;
}

// ---------------------------------------------------------------- MaxPool2

void MaxPool2::forward(const Tensor& x, Tensor& y, bool) {
  n_ = x.n; c_ = x.c; h_ = x.h; w_ = x.w;
  const int oh = x.h / 2, ow = x.w / 2;
  y.resize(x.n, x.c, oh, ow);
  argmax_.resize(y.size());
  std::size_t oi = 0;
  for (int i = 0; i < x.n; ++i) {
    for (int c = 0; c < x.c; ++c) {
      const float* plane = x.sample(i) + static_cast<std::size_t>(c) * x.h * x.w;
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox, ++oi) {
          int best = (2 * oy) * x.w + 2 * ox;
          float bv = plane[best];
          const int cand[3] = {(2 * oy) * x.w + 2 * ox + 1, (2 * oy + 1) * x.w + 2 * ox,
                               (2 * oy + 1) * x.w + 2 * ox + 1};
          for (int idx : cand) {
            if (plane[idx] > bv) { bv = plane[idx]; best = idx; }
          }
          y.data[oi] = bv;
          argmax_[oi] = best;
        }
      }
    }
  }
}

void MaxPool2::backward(const Tensor& dy, Tensor& dx) {
  dx.resize(n_, c_, h_, w_);
  const int oh = h_ / 2, ow = w_ / 2;
  std::size_t oi = 0;
  for (int i = 0; i < n_; ++i) {
    for (int c = 0; c < c_; ++c) {
      float* plane = dx.sample(i) + static_cast<std::size_t>(c) * h_ * w_;
      for (int p = 0; p < oh * ow; ++p, ++oi) plane[argmax_[oi]] += dy.data[oi];
    }
  }
}

// ---------------------------------------------------------------- Linear

Linear::Linear(int in_f, int out_f, std::uint64_t init_seed) : in_f_(in_f), out_f_(out_f) {
  w_.assign(static_cast<std::size_t>(out_f) * in_f, 0.0f);
  b_.assign(out_f, 0.0f);
  gw_.assign(w_.size(), 0.0f);
  gb_.assign(b_.size(), 0.0f);
  he_init(w_, in_f, init_seed);
}

void Linear::forward(const Tensor& x, Tensor& y, bool) {
  x_cache_ = x;
  y.resize(x.n, out_f_, 1, 1);
  sgemm(false, true, x.n, out_f_, in_f_, 1.0f, x.ptr(), in_f_, w_.data(), in_f_, 0.0f, y.ptr(),
        out_f_);
  for (int i = 0; i < x.n; ++i) {
    float* row = y.sample(i);
    for (int o = 0; o < out_f_; ++o) row[o] += b_[o];
  }
}

void Linear::backward(const Tensor& dy, Tensor& dx) {
  const Tensor& x = x_cache_;
  dx.resize(x.n, x.c, x.h, x.w);
  // gw += dy^T x ; gb += colsum(dy) ; dx = dy W
  sgemm(true, false, out_f_, in_f_, x.n, 1.0f, dy.ptr(), out_f_, x.ptr(), in_f_, 1.0f, gw_.data(),
        in_f_);
  for (int i = 0; i < x.n; ++i) {
    const float* row = dy.sample(i);
    for (int o = 0; o < out_f_; ++o) gb_[o] += row[o];
  }
  sgemm(false, false, x.n, in_f_, out_f_, 1.0f, dy.ptr(), out_f_, w_.data(), in_f_, 0.0f, dx.ptr(),
        in_f_);
}

void Linear::collect_params(std::vector<Param>& out) {
  out.push_back({w_.data(), gw_.data(), w_.size()});
  out.push_back({b_.data(), gb_.data(), b_.size()});
}

void Linear::save_state(std::vector<float>& out) const {
  append(out, w_);
  append(out, b_);
}

void Linear::load_state(const float*& in) {
  take(in, w_);
  take(in, b_);
}

// ---------------------------------------------------------------- BatchNorm2d

BatchNorm2d::BatchNorm2d(int channels) : c_(channels) {
  gamma_.assign(c_, 1.0f);
  beta_.assign(c_, 0.0f);
  g_gamma_.assign(c_, 0.0f);
  g_beta_.assign(c_, 0.0f);
  running_mean_.assign(c_, 0.0f);
  running_var_.assign(c_, 1.0f);
  batch_mean_.assign(c_, 0.0f);
  batch_inv_std_.assign(c_, 0.0f);
}

void BatchNorm2d::forward(const Tensor& x, Tensor& y, bool train) {
  y.resize(x.n, x.c, x.h, x.w);
  const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
  const std::size_t m = static_cast<std::size_t>(x.n) * plane;
  if (train) {
    x_hat_.resize(x.n, x.c, x.h, x.w);
    for (int c = 0; c < c_; ++c) {
      double sum = 0.0, sq = 0.0;
      for (int i = 0; i < x.n; ++i) {
        const float* p = x.sample(i) + c * plane;
        for (std::size_t j = 0; j < plane; ++j) { sum += p[j]; sq += static_cast<double>(p[j]) * p[j]; }
      }
      const float mean = static_cast<float>(sum / m);
      const float var = static_cast<float>(sq / m - static_cast<double>(mean) * mean);
      const float inv_std = 1.0f / std::sqrt(std::max(var, 0.0f) + eps_);
      batch_mean_[c] = mean;
      batch_inv_std_[c] = inv_std;
      running_mean_[c] = (1.0f - momentum_) * running_mean_[c] + momentum_ * mean;
      running_var_[c] = (1.0f - momentum_) * running_var_[c] + momentum_ * var;
      for (int i = 0; i < x.n; ++i) {
        const float* p = x.sample(i) + c * plane;
        float* xh = x_hat_.sample(i) + c * plane;
        float* out = y.sample(i) + c * plane;
        for (std::size_t j = 0; j < plane; ++j) {
          xh[j] = (p[j] - mean) * inv_std;
          out[j] = gamma_[c] * xh[j] + beta_[c];
        }
      }
    }
  } else {
    for (int c = 0; c < c_; ++c) {
      const float inv_std = 1.0f / std::sqrt(running_var_[c] + eps_);
      const float scale = gamma_[c] * inv_std;
      const float shift = beta_[c] - running_mean_[c] * scale;
      for (int i = 0; i < x.n; ++i) {
        const float* p = x.sample(i) + c * plane;
        float* out = y.sample(i) + c * plane;
        for (std::size_t j = 0; j < plane; ++j) out[j] = scale * p[j] + shift;
      }
    }
  }
}

void BatchNorm2d::backward(const Tensor& dy, Tensor& dx) {
  const int n = dy.n;
  const std::size_t plane = static_cast<std::size_t>(dy.h) * dy.w;
  const float m = static_cast<float>(static_cast<std::size_t>(n) * plane);
  dx.resize(dy.n, dy.c, dy.h, dy.w);
  for (int c = 0; c < c_; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int i = 0; i < n; ++i) {
      const float* d = dy.sample(i) + c * plane;
      const float* xh = x_hat_.sample(i) + c * plane;
      for (std::size_t j = 0; j < plane; ++j) {
        sum_dy += d[j];
        sum_dy_xhat += static_cast<double>(d[j]) * xh[j];
      }
    }
    g_beta_[c] += static_cast<float>(sum_dy);
    g_gamma_[c] += static_cast<float>(sum_dy_xhat);
    const float k1 = static_cast<float>(sum_dy) / m;
    const float k2 = static_cast<float>(sum_dy_xhat) / m;
    const float scale = gamma_[c] * batch_inv_std_[c];
    for (int i = 0; i < n; ++i) {
      const float* d = dy.sample(i) + c * plane;
      const float* xh = x_hat_.sample(i) + c * plane;
      float* out = dx.sample(i) + c * plane;
      for (std::size_t j = 0; j < plane; ++j) {
        out[j] = scale * (d[j] - k1 - xh[j] * k2);
      }
    }
  }
}

void BatchNorm2d::collect_params(std::vector<Param>& out) {
  out.push_back({gamma_.data(), g_gamma_.data(), gamma_.size()});
  out.push_back({beta_.data(), g_beta_.data(), beta_.size()});
}

void BatchNorm2d::save_state(std::vector<float>& out) const {
  append(out, gamma_);
  append(out, beta_);
  append(out, running_mean_);
  append(out, running_var_);
}

void BatchNorm2d::load_state(const float*& in) {
  take(in, gamma_);
  take(in, beta_);
  take(in, running_mean_);
  take(in, running_var_);
}

// ---------------------------------------------------------------- GlobalAvgPool

void GlobalAvgPool::forward(const Tensor& x, Tensor& y, bool) {
  n_ = x.n; c_ = x.c; h_ = x.h; w_ = x.w;
  y.resize(x.n, x.c, 1, 1);
  const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
  for (int i = 0; i < x.n; ++i) {
    for (int c = 0; c < x.c; ++c) {
      const float* p = x.sample(i) + c * plane;
      float acc = 0.0f;
      for (std::size_t j = 0; j < plane; ++j) acc += p[j];
      y.sample(i)[c] = acc / static_cast<float>(plane);
    }
  }
}

void GlobalAvgPool::backward(const Tensor& dy, Tensor& dx) {
  dx.resize(n_, c_, h_, w_);
  const std::size_t plane = static_cast<std::size_t>(h_) * w_;
  const float inv = 1.0f / static_cast<float>(plane);
  for (int i = 0; i < n_; ++i) {
    for (int c = 0; c < c_; ++c) {
      const float g = dy.sample(i)[c] * inv;
      float* p = dx.sample(i) + c * plane;
      for (std::size_t j = 0; j < plane; ++j) p[j] = g;
    }
  }
}

// ---------------------------------------------------------------- loss

float softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                            Tensor* dlogits) {
  const int n = logits.n;
  const int k = logits.c;
  if (static_cast<int>(labels.size()) != n) {
    throw PreconditionError("cross_entropy: label count mismatch");
  }
  if (dlogits != nullptr) dlogits->resize(n, k, 1, 1);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const float* row = logits.sample(i);
    float mx = row[0];
    for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int j = 0; j < k; ++j) sum += std::exp(static_cast<double>(row[j] - mx));
    const double log_sum = std::log(sum) + mx;
    total += log_sum - row[labels[i]];
    if (dlogits != nullptr) {
      float* drow = dlogits->sample(i);
      for (int j = 0; j < k; ++j) {
        const double p = std::exp(static_cast<double>(row[j]) - log_sum);
        drow[j] = static_cast<float>(p) / static_cast<float>(n);
      }
      drow[labels[i]] -= 1.0f / static_cast<float>(n);
    }
  }
  return static_cast<float>(total / n);
}

std::vector<int> argmax_rows(const Tensor& logits) {
  std::vector<int> out(logits.n);
  for (int i = 0; i < logits.n; ++i) {
    const float* row = logits.sample(i);
    int best = 0;
    for (int j = 1; j < logits.c; ++j) {
      if (row[j] > row[best]) best = j;
    }
    out[i] = best;
  }
  return out;
}

// ---------------------------------------------------------------- SmallCnn

namespace {

int scaled(int base, float mult, int floor_val) {
  return std::max(floor_val, static_cast<int>(std::lround(base * mult)));
}

class SmallCnn : public Network {
 public:
  SmallCnn(const ModelConfig& cfg, std::uint64_t seed)
      : c1_(scaled(32, cfg.width_mult, 4)),
        c2_(scaled(64, cfg.width_mult, 4)),
        fdim_(scaled(256, cfg.width_mult, 8)),
        conv1_(3, c1_, 3, 1, 1, derive_seed(seed, 1)),
        conv2_(c1_, c1_, 3, 1, 1, derive_seed(seed, 2)),
        conv3_(c1_, c2_, 3, 1, 1, derive_seed(seed, 3)),
        conv4_(c2_, c2_, 3, 1, 1, derive_seed(seed, 4)),
        fc1_(0, 0, 0),  // shaped lazily on first forward
        fc2_(0, 0, 0),
        num_classes_(cfg.num_classes),
        seed_(seed) {}

  const Tensor& forward(const Tensor& x, bool train) override {
    if (!shaped_) shape_dense(x.h, x.w);
    conv1_.forward(x, a1_, train);
    r1_.forward(a1_, a2_, train);
    conv2_.forward(a2_, a3_, train);
    r2_.forward(a3_, a4_, train);
    p1_.forward(a4_, a5_, train);
    conv3_.forward(a5_, a6_, train);
    r3_.forward(a6_, a7_, train);
    conv4_.forward(a7_, a8_, train);
    r4_.forward(a8_, a9_, train);
    p2_.forward(a9_, a10_, train);
    flat_ = a10_;
    flat_.c = static_cast<int>(flat_.chw());
    flat_.h = flat_.w = 1;
    fc1_dyn_->forward(flat_, a11_, train);
    r5_.forward(a11_, feat_, train);
    fc2_dyn_->forward(feat_, logits_, train);
    return logits_;
  }

  void backward(const Tensor& dlogits, bool need_input_grad) override {
    Tensor d;
    fc2_dyn_->backward(dlogits, d);
    Tensor d2;
    r5_.backward(d, d2);
    fc1_dyn_->backward(d2, d);
    d.n = a10_.n; d.c = a10_.c; d.h = a10_.h; d.w = a10_.w;
    p2_.backward(d, d2);
    r4_.backward(d2, d);
    conv4_.backward(d, d2);
    r3_.backward(d2, d);
    conv3_.backward(d, d2);
    p1_.backward(d2, d);
    r2_.backward(d, d2);
    conv2_.backward(d2, d);
    r1_.backward(d, d2);
    if (need_input_grad) {
      conv1_.backward(d2, input_grad_);
    } else {
      Tensor sink;
      conv1_.backward(d2, sink);
    }
  }

  const Tensor& input_grad() const override { return input_grad_; }
  const Tensor& features() const override { return feat_; }
  int feature_dim() const override { return fdim_; }

  std::vector<Param> params() override {
    std::vector<Param> out;
    conv1_.collect_params(out);
    conv2_.collect_params(out);
    conv3_.collect_params(out);
    conv4_.collect_params(out);
    fc1_dyn_->collect_params(out);
    fc2_dyn_->collect_params(out);
    return out;
  }

  std::vector<float> save_state() const override {
    std::vector<float> out;
    conv1_.save_state(out);
    conv2_.save_state(out);
    conv3_.save_state(out);
    conv4_.save_state(out);
    fc1_dyn_->save_state(out);
    fc2_dyn_->save_state(out);
    return out;
  }

  void load_state(const std::vector<float>& state) override {
    const float* in = state.data();
    conv1_.load_state(in);
    conv2_.load_state(in);
    conv3_.load_state(in);
    conv4_.load_state(in);
    fc1_dyn_->load_state(in);
    fc2_dyn_->load_state(in);
    if (in != state.data() + state.size()) {
      throw PreconditionError("small-cnn: checkpoint blob size mismatch");
    }
  }

  Conv2d* final_conv() override { return &conv4_; }
  const Tensor& final_conv_activations() const override { return a9_; }

 private:
  void shape_dense(int h, int w) {
    const int flat = c2_ * (h / 4) * (w / 4);
    fc1_dyn_ = std::make_unique<Linear>(flat, fdim_, derive_seed(seed_, 5));
    fc2_dyn_ = std::make_unique<Linear>(fdim_, num_classes_, derive_seed(seed_, 6));
    shaped_ = true;
  }

  int c1_, c2_, fdim_;
  Conv2d conv1_, conv2_, conv3_, conv4_;
  Linear fc1_, fc2_;  // unused placeholders; real layers are the dyn ones
  std::unique_ptr<Linear> fc1_dyn_, fc2_dyn_;
  ReLU r1_, r2_, r3_, r4_, r5_;
  MaxPool2 p1_, p2_;
  Tensor a1_, a2_, a3_, a4_, a5_, a6_, a7_, a8_, a9_, a10_, flat_, a11_, feat_, logits_;
  Tensor input_grad_;
  int num_classes_;
  std::uint64_t seed_;
  bool shaped_ = false;
};

// ---------------------------------------------------------------- ResNet

struct BasicBlock {
  BasicBlock(int in_c, int out_c, int stride, std::uint64_t seed)
      : conv1(in_c, out_c, 3, stride, 1, derive_seed(seed, 1)),
        bn1(out_c),
        conv2(out_c, out_c, 3, 1, 1, derive_seed(seed, 2)),
        bn2(out_c),
        has_down(stride != 1 || in_c != out_c) {
    if (has_down) {
      down_conv = std::make_unique<Conv2d>(in_c, out_c, 1, stride, 0, derive_seed(seed, 3));
      down_bn = std::make_unique<BatchNorm2d>(out_c);
    }
  }

  const Tensor& forward(const Tensor& x, bool train) {
    conv1.forward(x, t1, train);
    bn1.forward(t1, t2, train);
    relu1.forward(t2, t3, train);
    conv2.forward(t3, t4, train);
    bn2.forward(t4, main_out, train);
    if (has_down) {
      down_conv->forward(x, t5, train);
      down_bn->forward(t5, skip_out, train);
    } else {
      skip_out = x;
    }
    sum_out = main_out;
    for (std::size_t i = 0; i < sum_out.size(); ++i) sum_out.data[i] += skip_out.data[i];
    relu_out.forward(sum_out, out, train);
    return out;
  }

  void backward(const Tensor& dy, Tensor& dx) {
    Tensor dsum;
    relu_out.backward(dy, dsum);
    Tensor d1, d2;
    bn2.backward(dsum, d1);
    conv2.backward(d1, d2);
    relu1.backward(d2, d1);
    bn1.backward(d1, d2);
    conv1.backward(d2, dx);
    if (has_down) {
      down_bn->backward(dsum, d1);
      Tensor dskip;
      down_conv->backward(d1, dskip);
      for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += dskip.data[i];
    } else {
      for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += dsum.data[i];
    }
  }

  void collect_params(std::vector<Param>& out) {
    conv1.collect_params(out);
    bn1.collect_params(out);
    conv2.collect_params(out);
    bn2.collect_params(out);
    if (has_down) {
      down_conv->collect_params(out);
      down_bn->collect_params(out);
    }
  }

  void save_state(std::vector<float>& out) const {
    conv1.save_state(out);
    bn1.save_state(out);
    conv2.save_state(out);
    bn2.save_state(out);
    if (has_down) {
      down_conv->save_state(out);
      down_bn->save_state(out);
    }
  }

  void load_state(const float*& in) {
    conv1.load_state(in);
    bn1.load_state(in);
    conv2.load_state(in);
    bn2.load_state(in);
    if (has_down) {
      down_conv->load_state(in);
      down_bn->load_state(in);
    }
  }

  Conv2d conv1;
  BatchNorm2d bn1;
  Conv2d conv2;
  BatchNorm2d bn2;
  ReLU relu1, relu_out;
  bool has_down;
  std::unique_ptr<Conv2d> down_conv;
  std::unique_ptr<BatchNorm2d> down_bn;
  Tensor t1, t2, t3, t4, t5, main_out, skip_out, sum_out, out;
};

class ResNetLike : public Network {
 public:
  ResNetLike(const ModelConfig& cfg, std::uint64_t seed)
      : base_(scaled(64, cfg.width_mult, 8)),
        stem_(3, base_, 3, 1, 1, derive_seed(seed, 100)),
        stem_bn_(base_),
        fc_(base_ * 8, cfg.num_classes, derive_seed(seed, 101)) {
    const int chans[4] = {base_, base_ * 2, base_ * 4, base_ * 8};
    int in_c = base_;
    for (int s = 0; s < 4; ++s) {
      const int stride = (s == 0) ? 1 : 2;
      blocks_.push_back(std::make_unique<BasicBlock>(in_c, chans[s], stride,
                                                     derive_seed(seed, 200 + 2 * s)));
      blocks_.push_back(std::make_unique<BasicBlock>(chans[s], chans[s], 1,
                                                     derive_seed(seed, 201 + 2 * s)));
      in_c = chans[s];
    }
  }

  const Tensor& forward(const Tensor& x, bool train) override {
    stem_.forward(x, s1_, train);
    stem_bn_.forward(s1_, s2_, train);
    stem_relu_.forward(s2_, s3_, train);
    const Tensor* cur = &s3_;
    for (auto& b : blocks_) cur = &b->forward(*cur, train);
    gap_.forward(*cur, feat_, train);
    fc_.forward(feat_, logits_, train);
    return logits_;
  }

  void backward(const Tensor& dlogits, bool need_input_grad) override {
    Tensor d, d2;
    fc_.backward(dlogits, d);
    gap_.backward(d, d2);
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
      (*it)->backward(d2, d);
      std::swap(d, d2);
    }
    stem_relu_.backward(d2, d);
    stem_bn_.backward(d, d2);
    if (need_input_grad) {
      stem_.backward(d2, input_grad_);
    } else {
      Tensor sink;
      stem_.backward(d2, sink);
    }
  }

  const Tensor& input_grad() const override { return input_grad_; }
  const Tensor& features() const override { return feat_; }
  int feature_dim() const override { return base_ * 8; }

  std::vector<Param> params() override {
    std::vector<Param> out;
    stem_.collect_params(out);
    stem_bn_.collect_params(out);
    for (auto& b : blocks_) b->collect_params(out);
    fc_.collect_params(out);
    return out;
  }

  std::vector<float> save_state() const override {
    std::vector<float> out;
    stem_.save_state(out);
    stem_bn_.save_state(out);
    for (const auto& b : blocks_) b->save_state(out);
    fc_.save_state(out);
    return out;
  }

  void load_state(const std::vector<float>& state) override {
    const float* in = state.data();
    stem_.load_state(in);
    stem_bn_.load_state(in);
    for (auto& b : blocks_) b->load_state(in);
    fc_.load_state(in);
    if (in != state.data() + state.size()) {
      throw PreconditionError("resnet18-like: checkpoint blob size mismatch");
    }
  }

  Conv2d* final_conv() override { return &blocks_.back()->conv2; }
  const Tensor& final_conv_activations() const override { return blocks_.back()->out; }

 private:
  int base_;
  Conv2d stem_;
  BatchNorm2d stem_bn_;
  ReLU stem_relu_;
  std::vector<std::unique_ptr<BasicBlock>> blocks_;
  GlobalAvgPool gap_;
  Linear fc_;
  Tensor s1_, s2_, s3_, feat_, logits_, input_grad_;
};

}  // namespace

std::unique_ptr<Network> make_network(const ModelConfig& cfg, std::uint64_t init_seed) {
  if (cfg.architecture == "small-cnn") return std::make_unique<SmallCnn>(cfg, init_seed);
  if (cfg.architecture == "resnet18-like") return std::make_unique<ResNetLike>(cfg, init_seed);
  throw PreconditionError("unknown architecture: " + cfg.architecture);
}

// ---------------------------------------------------------------- SGD

void SgdOptimizer::bind(const std::vector<Param>& params) {
  velocity_.clear();
  for (const auto& p : params) velocity_.emplace_back(p.count, 0.0f);
}

void SgdOptimizer::zero_grad(const std::vector<Param>& params) {
  for (const auto& p : params) std::memset(p.grad, 0, p.count * sizeof(float));
}

void SgdOptimizer::step(const std::vector<Param>& params, float lr) {
  if (velocity_.size() != params.size()) bind(params);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    float* v = velocity_[i].data();
    for (std::size_t j = 0; j < p.count; ++j) {
      v[j] = momentum_ * v[j] + p.grad[j] + weight_decay_ * p.value[j];
      p.value[j] -= lr * v[j];
    }
  }
}

}  // namespace mtb::nn
