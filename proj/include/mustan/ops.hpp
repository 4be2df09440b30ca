#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "mustan/autograd.hpp"

namespace mustan::ops {

namespace detail {

inline int conv_out_size(int in, int kernel, int stride, int pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

// Unfolds one sample (C x H x W) into a (C*k*k) x (Ho*Wo) patch matrix.
template <typename Scalar>
void im2col(const Scalar* src, int channels, int height, int width, int kernel,
            int stride, int pad, RowMatrix<Scalar>& cols) {
  const int out_h = conv_out_size(height, kernel, stride, pad);
  const int out_w = conv_out_size(width, kernel, stride, pad);
  cols.resize(static_cast<Eigen::Index>(channels) * kernel * kernel,
              static_cast<Eigen::Index>(out_h) * out_w);
  Scalar* dst = cols.data();
  for (int c = 0; c < channels; ++c) {
    const Scalar* plane = src + static_cast<Eigen::Index>(c) * height * width;
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= height) {
            std::fill(dst, dst + out_w, Scalar(0));
            dst += out_w;
            continue;
          }
          const Scalar* row = plane + static_cast<Eigen::Index>(iy) * width;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            *dst++ = (ix >= 0 && ix < width) ? row[ix] : Scalar(0);
          }
        }
      }
    }
  }
}

template <typename Scalar>
void col2im(const RowMatrix<Scalar>& cols, int channels, int height, int width,
            int kernel, int stride, int pad, Scalar* dst) {
  const int out_h = conv_out_size(height, kernel, stride, pad);
  const int out_w = conv_out_size(width, kernel, stride, pad);
  const Scalar* src = cols.data();
  for (int c = 0; c < channels; ++c) {
    Scalar* plane = dst + static_cast<Eigen::Index>(c) * height * width;
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= height) {
            src += out_w;
            continue;
          }
          Scalar* row = plane + static_cast<Eigen::Index>(iy) * width;
          for (int ox = 0; ox < out_w; ++ox, ++src) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < width) row[ix] += *src;
          }
        }
      }
    }
  }
}

// Separable bilinear sampling table (half-pixel centers, edge clamped).
struct LinearTaps {
  std::vector<int> lo;
  std::vector<int> hi;
  std::vector<double> frac;
};

inline LinearTaps linear_taps(int in, int out) {
  LinearTaps taps;
  taps.lo.resize(out);
  taps.hi.resize(out);
  taps.frac.resize(out);
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    if (src < 0) src = 0;
    int lo = static_cast<int>(std::floor(src));
    if (lo > in - 1) lo = in - 1;
    taps.lo[o] = lo;
    taps.hi[o] = std::min(lo + 1, in - 1);
    taps.frac[o] = src - lo;
  }
  return taps;
}

}  // namespace detail

// 2-D convolution; weight is (Cout, Cin, k, k), bias optional (Cout).
template <typename Scalar>
Var<Scalar> conv2d(const Var<Scalar>& x, const Var<Scalar>& weight,
                   const Var<Scalar>& bias, int stride, int pad) {
  const Shape in = x->value.shape();
  const Shape ws = weight->value.shape();
  if (ws.h != ws.w) throw ShapeError("conv2d: non-square kernel " + ws.str());
  if (in.c != ws.c)
    throw ShapeError("conv2d: input has " + std::to_string(in.c) +
                     " channels, weight expects " + std::to_string(ws.c));
  const int k = ws.h;
  const int out_h = detail::conv_out_size(in.h, k, stride, pad);
  const int out_w = detail::conv_out_size(in.w, k, stride, pad);
  if (out_h <= 0 || out_w <= 0) throw ShapeError("conv2d: input too small " + in.str());
  const bool pointwise = k == 1 && stride == 1 && pad == 0;

  Tensor<Scalar> out(Shape{in.n, ws.n, out_h, out_w});
  Eigen::Map<const RowMatrix<Scalar>> w_mat(weight->value.data(), ws.n,
                                            static_cast<Eigen::Index>(ws.c) * k * k);
  RowMatrix<Scalar> cols;
  for (int n = 0; n < in.n; ++n) {
    auto y = out.sample(n);
    if (pointwise) {
      y.noalias() = w_mat * x->value.sample(n);
    } else {
      detail::im2col(x->value.data() + n * in.sample(), in.c, in.h, in.w, k, stride, pad, cols);
      y.noalias() = w_mat * cols;
    }
    if (bias) {
      Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> b(bias->value.data(), ws.n);
      y.colwise() += b;
    }
  }

  return make_result<Scalar>(
      std::move(out), {x, weight, bias},
      [stride, pad, k, pointwise](Node<Scalar>& self) {
        const Var<Scalar>& x = self.inputs[0];
        const Var<Scalar>& weight = self.inputs[1];
        const Var<Scalar>& bias = self.inputs[2];
        const Shape in = x->value.shape();
        const Shape ws = weight->value.shape();
        const Eigen::Index patch = static_cast<Eigen::Index>(ws.c) * k * k;
        Eigen::Map<const RowMatrix<Scalar>> w_mat(weight->value.data(), ws.n, patch);
        RowMatrix<Scalar> cols;
        RowMatrix<Scalar> dcols;
        RowMatrix<Scalar> dw = RowMatrix<Scalar>::Zero(ws.n, patch);
        Eigen::Matrix<Scalar, Eigen::Dynamic, 1> db =
            Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(ws.n);
        Tensor<Scalar>* dx = x->requires_grad ? &x->grad_buffer() : nullptr;
        for (int n = 0; n < in.n; ++n) {
          auto dy = self.grad.sample(n);
          if (weight->requires_grad) {
            if (pointwise) {
              dw.noalias() += dy * x->value.sample(n).transpose();
            } else {
              detail::im2col(x->value.data() + n * in.sample(), in.c, in.h, in.w, k, stride,
                             pad, cols);
              dw.noalias() += dy * cols.transpose();
            }
          }
          if (bias && bias->requires_grad) db += dy.rowwise().sum();
          if (dx) {
            if (pointwise) {
              dx->sample(n).noalias() += w_mat.transpose() * dy;
            } else {
              dcols.noalias() = w_mat.transpose() * dy;
              detail::col2im(dcols, in.c, in.h, in.w, k, stride, pad,
                             dx->data() + n * in.sample());
            }
          }
        }
        if (weight->requires_grad)
          Eigen::Map<RowMatrix<Scalar>>(weight->grad_buffer().data(), ws.n, patch) += dw;
        if (bias && bias->requires_grad)
          Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(bias->grad_buffer().data(), ws.n) +=
              db;
      });
}

// Batch normalization over (N, H, W) per channel. In training mode the batch
// statistics normalize the input and the running buffers are updated with
// `momentum` (unbiased variance); in eval mode the running buffers are used.
template <typename Scalar>
Var<Scalar> batch_norm(const Var<Scalar>& x, const Var<Scalar>& gamma, const Var<Scalar>& beta,
                       Tensor<Scalar>& running_mean, Tensor<Scalar>& running_var,
                       bool training, double momentum, double eps) {
  const Shape s = x->value.shape();
  if (gamma->value.size() != s.c)
    throw ShapeError("batch_norm: " + std::to_string(gamma->value.size()) +
                     " affine channels for input " + s.str());
  const Eigen::Index m = static_cast<Eigen::Index>(s.n) * s.plane();
  Eigen::Array<Scalar, Eigen::Dynamic, 1> mean(s.c), inv_std(s.c);
  if (training) {
    if (m < 2)
      throw ShapeError("batch_norm: need more than one value per channel in training");
    for (int c = 0; c < s.c; ++c) {
      double sum = 0;
      for (int n = 0; n < s.n; ++n) {
        const Scalar* p = x->value.plane_data(n, c);
        for (Eigen::Index i = 0; i < s.plane(); ++i) sum += p[i];
      }
      const double mu = sum / m;
      double sq = 0;
      for (int n = 0; n < s.n; ++n) {
        const Scalar* p = x->value.plane_data(n, c);
        for (Eigen::Index i = 0; i < s.plane(); ++i) sq += (p[i] - mu) * (p[i] - mu);
      }
      const double var = sq / m;
      mean[c] = static_cast<Scalar>(mu);
      inv_std[c] = static_cast<Scalar>(1.0 / std::sqrt(var + eps));
      running_mean.data()[c] = static_cast<Scalar>((1 - momentum) * running_mean.data()[c] + momentum * mu);
      const double unbiased = m > 1 ? sq / (m - 1) : var;
      running_var.data()[c] =
          static_cast<Scalar>((1 - momentum) * running_var.data()[c] + momentum * unbiased);
    }
  } else {
    for (int c = 0; c < s.c; ++c) {
      mean[c] = running_mean.data()[c];
      inv_std[c] = static_cast<Scalar>(1.0 / std::sqrt(static_cast<double>(running_var.data()[c]) + eps));
    }
  }

  Tensor<Scalar> xhat(s);
  Tensor<Scalar> out(s);
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>> src(x->value.plane_data(n, c), s.plane());
      Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>> xh(xhat.plane_data(n, c), s.plane());
      Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>> dst(out.plane_data(n, c), s.plane());
      xh = (src - mean[c]) * inv_std[c];
      dst = xh * gamma->value.data()[c] + beta->value.data()[c];
    }
  }

  return make_result<Scalar>(
      std::move(out), {x, gamma, beta},
      [xhat = std::move(xhat), inv_std, training, m](Node<Scalar>& self) {
        const Var<Scalar>& x = self.inputs[0];
        const Var<Scalar>& gamma = self.inputs[1];
        const Var<Scalar>& beta = self.inputs[2];
        const Shape s = self.value.shape();
        for (int c = 0; c < s.c; ++c) {
          double sum_dy = 0;
          double sum_dy_xhat = 0;
          for (int n = 0; n < s.n; ++n) {
            const Scalar* dy = self.grad.plane_data(n, c);
            const Scalar* xh = xhat.plane_data(n, c);
            for (Eigen::Index i = 0; i < s.plane(); ++i) {
              sum_dy += dy[i];
              sum_dy_xhat += dy[i] * xh[i];
            }
          }
          if (gamma->requires_grad) gamma->grad_buffer().data()[c] += static_cast<Scalar>(sum_dy_xhat);
          if (beta->requires_grad) beta->grad_buffer().data()[c] += static_cast<Scalar>(sum_dy);
          if (!x->requires_grad) continue;
          const Scalar g = gamma->value.data()[c];
          Tensor<Scalar>& dx = x->grad_buffer();
          for (int n = 0; n < s.n; ++n) {
            const Scalar* dy = self.grad.plane_data(n, c);
            const Scalar* xh = xhat.plane_data(n, c);
            Scalar* d = dx.plane_data(n, c);
            if (training) {
              const Scalar a = static_cast<Scalar>(sum_dy / m);
              const Scalar b = static_cast<Scalar>(sum_dy_xhat / m);
              for (Eigen::Index i = 0; i < s.plane(); ++i)
                d[i] += g * inv_std[c] * (dy[i] - a - xh[i] * b);
            } else {
              for (Eigen::Index i = 0; i < s.plane(); ++i) d[i] += g * inv_std[c] * dy[i];
            }
          }
        }
      });
}

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& x) {
  Tensor<Scalar> out(x->value.shape(), x->value.array().max(Scalar(0)));
  return make_result<Scalar>(std::move(out), {x}, [](Node<Scalar>& self) {
    const Var<Scalar>& x = self.inputs[0];
    x->grad_buffer().array() += (self.value.array() > Scalar(0)).select(self.grad.array(), Scalar(0));
  });
}

template <typename Scalar>
Var<Scalar> sigmoid(const Var<Scalar>& x) {
  Tensor<Scalar> out(x->value.shape(),
                     (Scalar(1) + (-x->value.array()).exp()).inverse());
  return make_result<Scalar>(std::move(out), {x}, [](Node<Scalar>& self) {
    const auto& p = self.value.array();
    self.inputs[0]->grad_buffer().array() += self.grad.array() * p * (Scalar(1) - p);
  });
}

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
  if (a->value.shape() != b->value.shape())
    throw ShapeError("add: " + a->value.shape().str() + " vs " + b->value.shape().str());
  Tensor<Scalar> out(a->value.shape(), a->value.array() + b->value.array());
  return make_result<Scalar>(std::move(out), {a, b}, [](Node<Scalar>& self) {
    accumulate_grad(self.inputs[0], self.grad);
    accumulate_grad(self.inputs[1], self.grad);
  });
}

// out[n,c,y,x] = gate[n,0,y,x] * x[n,c,y,x]
template <typename Scalar>
Var<Scalar> gate(const Var<Scalar>& attention, const Var<Scalar>& x) {
  const Shape as = attention->value.shape();
  const Shape xs = x->value.shape();
  if (as.c != 1 || as.n != xs.n || as.h != xs.h || as.w != xs.w)
    throw ShapeError("gate: attention " + as.str() + " cannot modulate " + xs.str());
  Tensor<Scalar> out(xs);
  for (int n = 0; n < xs.n; ++n) {
    Eigen::Map<const Eigen::Array<Scalar, 1, Eigen::Dynamic>> a(attention->value.plane_data(n, 0),
                                                                 xs.plane());
    out.sample(n).array() = x->value.sample(n).array().rowwise() * a;
  }
  return make_result<Scalar>(std::move(out), {attention, x}, [](Node<Scalar>& self) {
    const Var<Scalar>& attention = self.inputs[0];
    const Var<Scalar>& x = self.inputs[1];
    const Shape xs = x->value.shape();
    for (int n = 0; n < xs.n; ++n) {
      auto dy = self.grad.sample(n).array();
      if (x->requires_grad) {
        Eigen::Map<const Eigen::Array<Scalar, 1, Eigen::Dynamic>> a(
            attention->value.plane_data(n, 0), xs.plane());
        x->grad_buffer().sample(n).array() += dy.rowwise() * a;
      }
      if (attention->requires_grad) {
        Eigen::Map<Eigen::Array<Scalar, 1, Eigen::Dynamic>> da(
            attention->grad_buffer().plane_data(n, 0), xs.plane());
        da += (dy * x->value.sample(n).array()).colwise().sum();
      }
    }
  });
}

// 3x3 / stride 2 / pad 1 style max pooling with argmax routing.
template <typename Scalar>
Var<Scalar> max_pool2d(const Var<Scalar>& x, int kernel, int stride, int pad) {
  const Shape s = x->value.shape();
  const int out_h = detail::conv_out_size(s.h, kernel, stride, pad);
  const int out_w = detail::conv_out_size(s.w, kernel, stride, pad);
  Tensor<Scalar> out(Shape{s.n, s.c, out_h, out_w});
  std::vector<std::int32_t> argmax(static_cast<std::size_t>(out.size()));
  std::size_t o = 0;
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const Scalar* plane = x->value.plane_data(n, c);
      for (int oy = 0; oy < out_h; ++oy) {
        for (int ox = 0; ox < out_w; ++ox, ++o) {
          Scalar best = -std::numeric_limits<Scalar>::infinity();
          std::int32_t best_i = -1;
          for (int ky = 0; ky < kernel; ++ky) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= s.h) continue;
            for (int kx = 0; kx < kernel; ++kx) {
              const int ix = ox * stride - pad + kx;
              if (ix < 0 || ix >= s.w) continue;
              const Scalar v = plane[iy * s.w + ix];
              if (v > best || best_i < 0) {
                best = v;
                best_i = iy * s.w + ix;
              }
            }
          }
          out.data()[o] = best;
          argmax[o] = best_i;
        }
      }
    }
  }
  return make_result<Scalar>(std::move(out), {x}, [argmax = std::move(argmax)](Node<Scalar>& self) {
    const Shape os = self.value.shape();
    Tensor<Scalar>& dx = self.inputs[0]->grad_buffer();
    std::size_t o = 0;
    for (int n = 0; n < os.n; ++n)
      for (int c = 0; c < os.c; ++c) {
        Scalar* plane = dx.plane_data(n, c);
        for (Eigen::Index i = 0; i < os.plane(); ++i, ++o) plane[argmax[o]] += self.grad.data()[o];
      }
  });
}

// Bilinear resampling to (out_h, out_w) with half-pixel centers.
template <typename Scalar>
Var<Scalar> resize_bilinear(const Var<Scalar>& x, int out_h, int out_w) {
  const Shape s = x->value.shape();
  const auto ty = detail::linear_taps(s.h, out_h);
  const auto tx = detail::linear_taps(s.w, out_w);
  Tensor<Scalar> out(Shape{s.n, s.c, out_h, out_w});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const Scalar* src = x->value.plane_data(n, c);
      Scalar* dst = out.plane_data(n, c);
      for (int oy = 0; oy < out_h; ++oy) {
        const Scalar fy = static_cast<Scalar>(ty.frac[oy]);
        const Scalar* r0 = src + ty.lo[oy] * s.w;
        const Scalar* r1 = src + ty.hi[oy] * s.w;
        for (int ox = 0; ox < out_w; ++ox) {
          const Scalar fx = static_cast<Scalar>(tx.frac[ox]);
          const Scalar top = r0[tx.lo[ox]] + (r0[tx.hi[ox]] - r0[tx.lo[ox]]) * fx;
          const Scalar bottom = r1[tx.lo[ox]] + (r1[tx.hi[ox]] - r1[tx.lo[ox]]) * fx;
          dst[oy * out_w + ox] = top + (bottom - top) * fy;
        }
      }
    }
  return make_result<Scalar>(std::move(out), {x}, [ty, tx](Node<Scalar>& self) {
    const Var<Scalar>& x = self.inputs[0];
    const Shape s = x->value.shape();
    const Shape os = self.value.shape();
    Tensor<Scalar>& dx = x->grad_buffer();
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c) {
        const Scalar* dy = self.grad.plane_data(n, c);
        Scalar* d = dx.plane_data(n, c);
        for (int oy = 0; oy < os.h; ++oy) {
          const Scalar fy = static_cast<Scalar>(ty.frac[oy]);
          Scalar* r0 = d + ty.lo[oy] * s.w;
          Scalar* r1 = d + ty.hi[oy] * s.w;
          for (int ox = 0; ox < os.w; ++ox) {
            const Scalar fx = static_cast<Scalar>(tx.frac[ox]);
            const Scalar g = dy[oy * os.w + ox];
            r0[tx.lo[ox]] += g * (1 - fy) * (1 - fx);
            r0[tx.hi[ox]] += g * (1 - fy) * fx;
            r1[tx.lo[ox]] += g * fy * (1 - fx);
            r1[tx.hi[ox]] += g * fy * fx;
          }
        }
      }
  });
}

template <typename Scalar>
Var<Scalar> upsample2x(const Var<Scalar>& x) {
  return resize_bilinear(x, 2 * x->value.h(), 2 * x->value.w());
}

template <typename Scalar>
Var<Scalar> concat_channels(const std::vector<Var<Scalar>>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  const Shape first = parts.front()->value.shape();
  int channels = 0;
  for (const auto& p : parts) {
    const Shape s = p->value.shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w)
      throw ShapeError("concat_channels: " + s.str() + " incompatible with " + first.str());
    channels += s.c;
  }
  Tensor<Scalar> out(Shape{first.n, channels, first.h, first.w});
  for (int n = 0; n < first.n; ++n) {
    Eigen::Index row = 0;
    for (const auto& p : parts) {
      out.sample(n).middleRows(row, p->value.c()) = p->value.sample(n);
      row += p->value.c();
    }
  }
  return make_result<Scalar>(std::move(out), parts, [](Node<Scalar>& self) {
    for (int n = 0; n < self.value.n(); ++n) {
      Eigen::Index row = 0;
      for (const auto& p : self.inputs) {
        if (p->requires_grad)
          p->grad_buffer().sample(n) += self.grad.sample(n).middleRows(row, p->value.c());
        row += p->value.c();
      }
    }
  });
}

template <typename Scalar>
Var<Scalar> slice_channels(const Var<Scalar>& x, int begin, int count) {
  const Shape s = x->value.shape();
  if (begin < 0 || count <= 0 || begin + count > s.c)
    throw ShapeError("slice_channels: [" + std::to_string(begin) + ", +" + std::to_string(count) +
                     ") outside " + s.str());
  Tensor<Scalar> out(Shape{s.n, count, s.h, s.w});
  for (int n = 0; n < s.n; ++n) out.sample(n) = x->value.sample(n).middleRows(begin, count);
  return make_result<Scalar>(std::move(out), {x}, [begin, count](Node<Scalar>& self) {
    Tensor<Scalar>& dx = self.inputs[0]->grad_buffer();
    for (int n = 0; n < self.value.n(); ++n) dx.sample(n).middleRows(begin, count) += self.grad.sample(n);
  });
}

template <typename Scalar>
Var<Scalar> concat_batch(const std::vector<Var<Scalar>>& parts) {
  if (parts.empty()) throw ShapeError("concat_batch: no inputs");
  const Shape first = parts.front()->value.shape();
  int total = 0;
  for (const auto& p : parts) {
    const Shape s = p->value.shape();
    if (s.c != first.c || s.h != first.h || s.w != first.w)
      throw ShapeError("concat_batch: " + s.str() + " incompatible with " + first.str());
    total += s.n;
  }
  Tensor<Scalar> out(Shape{total, first.c, first.h, first.w});
  Eigen::Index offset = 0;
  for (const auto& p : parts) {
    out.array().segment(offset, p->value.size()) = p->value.array();
    offset += p->value.size();
  }
  return make_result<Scalar>(std::move(out), parts, [](Node<Scalar>& self) {
    Eigen::Index offset = 0;
    for (const auto& p : self.inputs) {
      if (p->requires_grad) p->grad_buffer().array() += self.grad.array().segment(offset, p->value.size());
      offset += p->value.size();
    }
  });
}

template <typename Scalar>
Var<Scalar> slice_batch(const Var<Scalar>& x, int begin, int count) {
  const Shape s = x->value.shape();
  if (begin < 0 || count <= 0 || begin + count > s.n)
    throw ShapeError("slice_batch: range outside " + s.str());
  const Eigen::Index offset = begin * s.sample();
  const Eigen::Index len = count * s.sample();
  Tensor<Scalar> out(Shape{count, s.c, s.h, s.w}, x->value.array().segment(offset, len));
  return make_result<Scalar>(std::move(out), {x}, [offset, len](Node<Scalar>& self) {
    self.inputs[0]->grad_buffer().array().segment(offset, len) += self.grad.array();
  });
}

}  // namespace mustan::ops
