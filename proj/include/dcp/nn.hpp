#ifndef DCP_NN_HPP
#define DCP_NN_HPP

// Minimal CHW convolution layers with hand-written backward passes, shared by
// the inpainting network and the texture feature stack.

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "dcp/error.hpp"
#include "dcp/image.hpp"

namespace dcp::nn {

struct Tensor {
  int c = 0;
  int h = 0;
  int w = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int c_, int h_, int w_, double fill = 0.0)
      : c(c_), h(h_), w(w_), v(static_cast<size_t>(c_) * h_ * w_, fill) {}

  size_t size() const { return v.size(); }
  double& at(int ch, int r, int col) { return v[(static_cast<size_t>(ch) * h + r) * w + col]; }
  double at(int ch, int r, int col) const { return v[(static_cast<size_t>(ch) * h + r) * w + col]; }
  bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }
};

inline Tensor from_image(const Image& img) {
  Tensor t(img.channels, img.height, img.width);
  for (int r = 0; r < img.height; ++r)
    for (int col = 0; col < img.width; ++col)
      for (int ch = 0; ch < img.channels; ++ch) t.at(ch, r, col) = img.at(r, col, ch);
  return t;
}

inline Image to_image(const Tensor& t) {
  Image img(t.h, t.w, t.c);
  for (int r = 0; r < t.h; ++r)
    for (int col = 0; col < t.w; ++col)
      for (int ch = 0; ch < t.c; ++ch) img.at(r, col, ch) = t.at(ch, r, col);
  return img;
}

struct Param {
  std::vector<double> value;
  std::vector<double> grad;

  explicit Param(size_t n = 0) : value(n, 0.0), grad(n, 0.0) {}
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

/// Unfolds k x k windows of `x` into a (c*k*k) x (oh*ow) matrix.
inline std::vector<double> im2col(const Tensor& x, int k, int stride, int pad, int oh, int ow) {
  std::vector<double> col(static_cast<size_t>(x.c) * k * k * oh * ow, 0.0);
  size_t row = 0;
  for (int ch = 0; ch < x.c; ++ch)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx, ++row) {
        double* dst = col.data() + row * static_cast<size_t>(oh) * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= x.h) continue;
          const double* src = x.v.data() + (static_cast<size_t>(ch) * x.h + iy) * x.w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < x.w) dst[oy * ow + ox] = src[ix];
          }
        }
      }
  return col;
}

/// Adjoint of im2col: scatters-and-adds columns back into a c x h x w tensor.
inline Tensor col2im(const std::vector<double>& col, int c, int h, int w, int k, int stride, int pad, int oh,
                     int ow) {
  Tensor x(c, h, w);
  size_t row = 0;
  for (int ch = 0; ch < c; ++ch)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx, ++row) {
        const double* src = col.data() + row * static_cast<size_t>(oh) * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          double* dst = x.v.data() + (static_cast<size_t>(ch) * h + iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) dst[ix] += src[oy * ow + ox];
          }
        }
      }
  return x;
}

inline void he_init(Param& p, int fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, std::sqrt(2.0 / fan_in));
  for (double& v : p.value) v = n(rng);
}

struct Conv2d {
  int in_c = 0, out_c = 0, k = 3, stride = 1, pad = 1;
  Param weight;  // out_c x (in_c*k*k)
  Param bias;    // out_c

  Conv2d() = default;
  Conv2d(int in, int out, int kernel, int s, int p)
      : in_c(in), out_c(out), k(kernel), stride(s), pad(p),
        weight(static_cast<size_t>(out) * in * kernel * kernel), bias(static_cast<size_t>(out)) {}

  int out_size(int in) const { return (in + 2 * pad - k) / stride + 1; }
  bool valid_for(int in) const { return in + 2 * pad >= k && (in + 2 * pad - k) % stride == 0; }

  void init(std::mt19937_64& rng) { he_init(weight, in_c * k * k, rng); }

  Tensor forward(const Tensor& x) const {
    const int oh = out_size(x.h), ow = out_size(x.w);
    const std::vector<double> col = im2col(x, k, stride, pad, oh, ow);
    Tensor y(out_c, oh, ow);
    const long kk = static_cast<long>(in_c) * k * k, P = static_cast<long>(oh) * ow;
    MatMap Y(y.v.data(), out_c, P);
    Y.noalias() = ConstMatMap(weight.value.data(), out_c, kk) * ConstMatMap(col.data(), kk, P);
    for (int o = 0; o < out_c; ++o) Y.row(o).array() += bias.value[static_cast<size_t>(o)];
    return y;
  }

  /// Accumulates parameter gradients when `accumulate` is set; returns dL/dx.
  Tensor backward(const Tensor& x, const Tensor& dy, bool accumulate = true) {
    const int oh = dy.h, ow = dy.w;
    const long kk = static_cast<long>(in_c) * k * k, P = static_cast<long>(oh) * ow;
    ConstMatMap dY(dy.v.data(), out_c, P);
    std::vector<double> col;
    if (accumulate) {
      col = im2col(x, k, stride, pad, oh, ow);
      MatMap(weight.grad.data(), out_c, kk).noalias() += dY * ConstMatMap(col.data(), kk, P).transpose();
      for (int o = 0; o < out_c; ++o) bias.grad[static_cast<size_t>(o)] += dY.row(o).sum();
    }
    std::vector<double> dcol(static_cast<size_t>(kk * P));
    MatMap(dcol.data(), kk, P).noalias() = ConstMatMap(weight.value.data(), out_c, kk).transpose() * dY;
    return col2im(dcol, in_c, x.h, x.w, k, stride, pad, oh, ow);
  }
};

/// Transposed convolution: the adjoint of Conv2d with the same geometry.
struct ConvTranspose2d {
  int in_c = 0, out_c = 0, k = 4, stride = 2, pad = 1;
  Param weight;  // in_c x (out_c*k*k)
  Param bias;    // out_c

  ConvTranspose2d() = default;
  ConvTranspose2d(int in, int out, int kernel, int s, int p)
      : in_c(in), out_c(out), k(kernel), stride(s), pad(p),
        weight(static_cast<size_t>(in) * out * kernel * kernel), bias(static_cast<size_t>(out)) {}

  int out_size(int in) const { return (in - 1) * stride - 2 * pad + k; }

  void init(std::mt19937_64& rng) { he_init(weight, std::max(1, in_c * k * k / (stride * stride)), rng); }

  Tensor forward(const Tensor& x) const {
    const int oh = out_size(x.h), ow = out_size(x.w);
    const long ck = static_cast<long>(out_c) * k * k, P = static_cast<long>(x.h) * x.w;
    std::vector<double> col(static_cast<size_t>(ck * P));
    MatMap(col.data(), ck, P).noalias() =
        ConstMatMap(weight.value.data(), in_c, ck).transpose() * ConstMatMap(x.v.data(), in_c, P);
    Tensor y = col2im(col, out_c, oh, ow, k, stride, pad, x.h, x.w);
    const size_t plane = static_cast<size_t>(oh) * ow;
    for (int o = 0; o < out_c; ++o)
      for (size_t i = 0; i < plane; ++i) y.v[o * plane + i] += bias.value[static_cast<size_t>(o)];
    return y;
  }

  Tensor backward(const Tensor& x, const Tensor& dy, bool accumulate = true) {
    const long ck = static_cast<long>(out_c) * k * k, P = static_cast<long>(x.h) * x.w;
    const std::vector<double> dcol = im2col(dy, k, stride, pad, x.h, x.w);
    ConstMatMap dC(dcol.data(), ck, P);
    if (accumulate) {
      MatMap(weight.grad.data(), in_c, ck).noalias() += ConstMatMap(x.v.data(), in_c, P) * dC.transpose();
      const size_t plane = static_cast<size_t>(dy.h) * dy.w;
      for (int o = 0; o < out_c; ++o) {
        double s = 0;
        for (size_t i = 0; i < plane; ++i) s += dy.v[o * plane + i];
        bias.grad[static_cast<size_t>(o)] += s;
      }
    }
    Tensor dx(in_c, x.h, x.w);
    MatMap(dx.v.data(), in_c, P).noalias() = ConstMatMap(weight.value.data(), in_c, ck) * dC;
    return dx;
  }
};

constexpr double kLeakySlope = 0.2;

inline Tensor leaky_relu(Tensor z) {
  for (double& v : z.v) v = v > 0 ? v : kLeakySlope * v;
  return z;
}

inline Tensor leaky_relu_backward(const Tensor& z, Tensor dy) {
  for (size_t i = 0; i < dy.v.size(); ++i)
    if (z.v[i] <= 0) dy.v[i] *= kLeakySlope;
  return dy;
}

inline Tensor relu(Tensor z) {
  for (double& v : z.v) v = v > 0 ? v : 0.0;
  return z;
}

inline Tensor relu_backward(const Tensor& z, Tensor dy) {
  for (size_t i = 0; i < dy.v.size(); ++i)
    if (z.v[i] <= 0) dy.v[i] = 0.0;
  return dy;
}

inline double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

inline Tensor sigmoid(Tensor z) {
  for (double& v : z.v) v = sigmoid(v);
  return z;
}

/// Backward through sigmoid given its output.
inline Tensor sigmoid_backward(const Tensor& y, Tensor dy) {
  for (size_t i = 0; i < dy.v.size(); ++i) dy.v[i] *= y.v[i] * (1.0 - y.v[i]);
  return dy;
}

inline Tensor avg_pool2(const Tensor& x) {
  Tensor y(x.c, x.h / 2, x.w / 2);
  for (int ch = 0; ch < x.c; ++ch)
    for (int r = 0; r < y.h; ++r)
      for (int col = 0; col < y.w; ++col)
        y.at(ch, r, col) = 0.25 * (x.at(ch, 2 * r, 2 * col) + x.at(ch, 2 * r, 2 * col + 1) +
                                   x.at(ch, 2 * r + 1, 2 * col) + x.at(ch, 2 * r + 1, 2 * col + 1));
  return y;
}

inline Tensor avg_pool2_backward(const Tensor& x, const Tensor& dy) {
  Tensor dx(x.c, x.h, x.w);
  for (int ch = 0; ch < dy.c; ++ch)
    for (int r = 0; r < dy.h; ++r)
      for (int col = 0; col < dy.w; ++col) {
        const double g = 0.25 * dy.at(ch, r, col);
        dx.at(ch, 2 * r, 2 * col) += g;
        dx.at(ch, 2 * r, 2 * col + 1) += g;
        dx.at(ch, 2 * r + 1, 2 * col) += g;
        dx.at(ch, 2 * r + 1, 2 * col + 1) += g;
      }
  return dx;
}

/// Adam with per-parameter moment estimates.
class Adam {
 public:
  explicit Adam(double lr = 2e-4, double beta1 = 0.5, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<Param*>& params) {
    if (m_.empty()) {
      for (const Param* p : params) {
        m_.emplace_back(p->value.size(), 0.0);
        v_.emplace_back(p->value.size(), 0.0);
      }
    }
    require(m_.size() == params.size(), ErrorCode::InvalidArgument, "Adam parameter list changed");
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, t_), c2 = 1.0 - std::pow(beta2_, t_);
    for (size_t i = 0; i < params.size(); ++i) {
      Param& p = *params[i];
      auto& m = m_[i];
      auto& v = v_[i];
      for (size_t j = 0; j < p.value.size(); ++j) {
        const double g = p.grad[j];
        m[j] = beta1_ * m[j] + (1 - beta1_) * g;
        v[j] = beta2_ * v[j] + (1 - beta2_) * g * g;
        p.value[j] -= lr_ * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
      }
    }
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

inline void zero_grads(const std::vector<Param*>& params) {
  for (Param* p : params) p->zero_grad();
}

}  // namespace dcp::nn

#endif  // DCP_NN_HPP
