#include "scaseg/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "scaseg/instrument.hpp"

namespace scaseg::kernels {

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

void require_rank(const char* op, const Tensor& x, std::size_t rank) {
  if (x.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     to_string(x.shape()));
  }
}

// Batch-slice pairing for a broadcast matmul.
struct MatmulPlan {
  Shape out_shape;
  std::size_t m = 0, k = 0, n = 0;
  std::vector<std::size_t> a_batch, b_batch;  // slice index per output batch
};

MatmulPlan plan_matmul(const Tensor& a, const Tensor& b) {
  auto mismatch = [&] {
    return ShapeError("matmul: incompatible shapes " + to_string(a.shape()) + " and " +
                      to_string(b.shape()));
  };
  if (a.rank() < 2 || b.rank() < 2) throw mismatch();
  MatmulPlan p;
  p.m = a.dim(-2);
  p.k = a.dim(-1);
  p.n = b.dim(-1);
  if (b.dim(-2) != p.k) throw mismatch();

  const std::size_t ra = a.rank() - 2, rb = b.rank() - 2;
  const std::size_t rank = std::max(ra, rb);
  Shape ad(rank, 1), bd(rank, 1), od(rank, 1);
  std::copy(a.shape().begin(), a.shape().end() - 2, ad.begin() + (rank - ra));
  std::copy(b.shape().begin(), b.shape().end() - 2, bd.begin() + (rank - rb));
  for (std::size_t i = 0; i < rank; ++i) {
    if (ad[i] != bd[i] && ad[i] != 1 && bd[i] != 1) throw mismatch();
    od[i] = std::max(ad[i], bd[i]);
  }

  const std::size_t batches = numel(od);
  p.a_batch.resize(batches);
  p.b_batch.resize(batches);
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t t = 0; t < batches; ++t) {
    std::size_t ao = 0, bo = 0;
    for (std::size_t i = 0; i < rank; ++i) {
      ao = ao * ad[i] + (ad[i] == 1 ? 0 : idx[i]);
      bo = bo * bd[i] + (bd[i] == 1 ? 0 : idx[i]);
    }
    p.a_batch[t] = ao;
    p.b_batch[t] = bo;
    for (std::size_t i = rank; i-- > 0;) {
      if (++idx[i] < od[i]) break;
      idx[i] = 0;
    }
  }
  p.out_shape = od;
  p.out_shape.push_back(p.m);
  p.out_shape.push_back(p.n);
  return p;
}

// c[m, n] += a[m, k] * b[k, n]
void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
              std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c[m, n] += a[m, k] * b[n, k]^T
void gemm_nt_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                 std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[j * k + p];
      c[i * n + j] += s;
    }
  }
}

// c[k, n] += a[m, k]^T * g[m, n]
void gemm_tn_acc(const double* a, const double* g, double* c, std::size_t m, std::size_t k,
                 std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* grow = g + i * n;
      double* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * grow[j];
    }
  }
}

struct Tap {
  std::size_t i0, i1;
  double w0, w1;
};

std::vector<Tap> bilinear_taps(std::size_t in, std::size_t out) {
  std::vector<Tap> taps(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const auto i0 = static_cast<std::size_t>(std::floor(src));
    const std::size_t i1 = std::min(i0 + 1, in - 1);
    const double frac = src - static_cast<double>(i0);
    taps[o] = {i0, i1, 1.0 - frac, frac};
  }
  return taps;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  const MatmulPlan p = plan_matmul(a, b);
  Tensor out(p.out_shape, 0.0);
  const std::size_t as = p.m * p.k, bs = p.k * p.n, os = p.m * p.n;
  for (std::size_t t = 0; t < p.a_batch.size(); ++t) {
    gemm_acc(a.data().data() + p.a_batch[t] * as, b.data().data() + p.b_batch[t] * bs,
             out.data().data() + t * os, p.m, p.k, p.n);
  }
  instrument::add_matmul_macs(static_cast<std::uint64_t>(p.a_batch.size()) * p.m * p.k * p.n);
  return out;
}

std::pair<Tensor, Tensor> matmul_backward(const Tensor& a, const Tensor& b, const Tensor& g) {
  const MatmulPlan p = plan_matmul(a, b);
  if (g.shape() != p.out_shape) {
    throw ShapeError("matmul_backward: gradient shape " + to_string(g.shape()) +
                     " does not match output " + to_string(p.out_shape));
  }
  Tensor ga = Tensor::zeros_like(a), gb = Tensor::zeros_like(b);
  const std::size_t as = p.m * p.k, bs = p.k * p.n, os = p.m * p.n;
  for (std::size_t t = 0; t < p.a_batch.size(); ++t) {
    const double* gs = g.data().data() + t * os;
    gemm_nt_acc(gs, b.data().data() + p.b_batch[t] * bs, ga.data().data() + p.a_batch[t] * as,
                p.m, p.n, p.k);
    gemm_tn_acc(a.data().data() + p.a_batch[t] * as, gs, gb.data().data() + p.b_batch[t] * bs,
                p.m, p.k, p.n);
  }
  return {std::move(ga), std::move(gb)};
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor* bias) {
  if (weight.rank() != 2 || x.dim(-1) != weight.dim(1)) {
    throw ShapeError("linear: input " + to_string(x.shape()) + " incompatible with weight " +
                     to_string(weight.shape()));
  }
  const std::size_t in = weight.dim(1), out_f = weight.dim(0);
  if (bias && (bias->rank() != 1 || bias->dim(0) != out_f)) {
    throw ShapeError("linear: bias " + to_string(bias->shape()) + " incompatible with weight " +
                     to_string(weight.shape()));
  }
  const std::size_t rows = x.size() / in;
  Shape os = x.shape();
  os.back() = out_f;
  Tensor out(os, 0.0);
  const double* xd = x.data().data();
  const double* wd = weight.data().data();
  double* od = out.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xd + r * in;
    for (std::size_t o = 0; o < out_f; ++o) {
      const double* wr = wd + o * in;
      double s = 0.0;
      for (std::size_t i = 0; i < in; ++i) s += xr[i] * wr[i];
      od[r * out_f + o] = bias ? s + (*bias)[o] : s;
    }
  }
  instrument::add_linear_macs(static_cast<std::uint64_t>(rows) * in * out_f);
  return out;
}

LinearGrads linear_backward(const Tensor& x, const Tensor& weight, bool has_bias,
                            const Tensor& g) {
  const std::size_t in = weight.dim(1), out_f = weight.dim(0);
  const std::size_t rows = x.size() / in;
  LinearGrads r{Tensor::zeros_like(x), Tensor::zeros_like(weight),
                has_bias ? Tensor({out_f}, 0.0) : Tensor()};
  const double* gd = g.data().data();
  // gx = g . W
  gemm_acc(gd, weight.data().data(), r.x.data().data(), rows, out_f, in);
  // gW = g^T . x
  gemm_tn_acc(gd, x.data().data(), r.weight.data().data(), rows, out_f, in);
  if (has_bias) {
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t o = 0; o < out_f; ++o) r.bias[o] += gd[i * out_f + o];
  }
  return r;
}

Tensor softmax_lastdim(const Tensor& x) {
  const std::size_t n = x.dim(-1);
  const std::size_t rows = x.size() / n;
  Tensor y(x.shape(), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data().data() + r * n;
    double* yr = y.data().data() + r * n;
    const double mx = *std::max_element(xr, xr + n);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      s += yr[j];
    }
    for (std::size_t j = 0; j < n; ++j) yr[j] /= s;
  }
  return y;
}

Tensor softmax_lastdim_backward(const Tensor& y, const Tensor& g) {
  const std::size_t n = y.dim(-1);
  const std::size_t rows = y.size() / n;
  Tensor gx(y.shape(), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* yr = y.data().data() + r * n;
    const double* gr = g.data().data() + r * n;
    double dot = 0.0;
    for (std::size_t j = 0; j < n; ++j) dot += yr[j] * gr[j];
    for (std::size_t j = 0; j < n; ++j) gx.data()[r * n + j] = yr[j] * (gr[j] - dot);
  }
  return gx;
}

namespace {

void check_layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
  const std::size_t c = x.dim(-1);
  if (gamma.shape() != Shape{c} || beta.shape() != Shape{c}) {
    throw ShapeError("layernorm: input " + to_string(x.shape()) + " with gamma " +
                     to_string(gamma.shape()) + " and beta " + to_string(beta.shape()));
  }
}

}  // namespace

Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  check_layernorm(x, gamma, beta);
  const std::size_t c = x.dim(-1);
  const std::size_t rows = x.size() / c;
  Tensor y(x.shape(), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data().data() + r * c;
    double* yr = y.data().data() + r * c;
    double mean = 0.0;
    for (std::size_t j = 0; j < c; ++j) mean += xr[j];
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<double>(c);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) yr[j] = gamma[j] * ((xr[j] - mean) * inv) + beta[j];
  }
  return y;
}

LayerNormGrads layernorm_backward(const Tensor& x, const Tensor& gamma, double eps,
                                  const Tensor& g) {
  const std::size_t c = x.dim(-1);
  const std::size_t rows = x.size() / c;
  LayerNormGrads r{Tensor::zeros_like(x), Tensor({c}, 0.0), Tensor({c}, 0.0)};
  std::vector<double> xhat(c), gxhat(c);
  const double cn = static_cast<double>(c);
  for (std::size_t row = 0; row < rows; ++row) {
    const double* xr = x.data().data() + row * c;
    const double* gr = g.data().data() + row * c;
    double mean = 0.0;
    for (std::size_t j = 0; j < c; ++j) mean += xr[j];
    mean /= cn;
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= cn;
    const double inv = 1.0 / std::sqrt(var + eps);
    double mean_g = 0.0, mean_gx = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      xhat[j] = (xr[j] - mean) * inv;
      gxhat[j] = gr[j] * gamma[j];
      mean_g += gxhat[j];
      mean_gx += gxhat[j] * xhat[j];
      r.gamma[j] += gr[j] * xhat[j];
      r.beta[j] += gr[j];
    }
    mean_g /= cn;
    mean_gx /= cn;
    for (std::size_t j = 0; j < c; ++j) {
      r.x[row * c + j] = inv * (gxhat[j] - mean_g - xhat[j] * mean_gx);
    }
  }
  return r;
}

namespace {

void check_conv(const Tensor& x, const Tensor& kernel, bool has_bias, const Tensor* bias) {
  require_rank("depthwise_conv", x, 4);
  if (kernel.rank() != 3 || kernel.dim(0) != x.dim(1)) {
    throw ShapeError("depthwise_conv: kernel " + to_string(kernel.shape()) +
                     " incompatible with input " + to_string(x.shape()));
  }
  for (int a : {1, 2}) {
    const auto e = kernel.dim(a);
    if (e != 1 && e != 3) {
      throw ShapeError("depthwise_conv: unsupported kernel size " + to_string(kernel.shape()));
    }
  }
  if (has_bias && bias && bias->shape() != Shape{x.dim(1)}) {
    throw ShapeError("depthwise_conv: bias " + to_string(bias->shape()) + " for input " +
                     to_string(x.shape()));
  }
}

}  // namespace

Tensor depthwise_conv(const Tensor& x, const Tensor& kernel, const Tensor* bias) {
  check_conv(x, kernel, bias != nullptr, bias);
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t kh = kernel.dim(1), kw = kernel.dim(2);
  const long ph = static_cast<long>(kh / 2), pw = static_cast<long>(kw / 2);
  Tensor out(x.shape(), 0.0);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      const double* xp = x.data().data() + (b * C + c) * H * W;
      const double* kp = kernel.data().data() + c * kh * kw;
      double* op = out.data().data() + (b * C + c) * H * W;
      const double bv = bias ? (*bias)[c] : 0.0;
      for (long y = 0; y < static_cast<long>(H); ++y) {
        for (long xx = 0; xx < static_cast<long>(W); ++xx) {
          double s = 0.0;
          for (long dy = 0; dy < static_cast<long>(kh); ++dy) {
            const long sy = y + dy - ph;
            if (sy < 0 || sy >= static_cast<long>(H)) continue;
            for (long dx = 0; dx < static_cast<long>(kw); ++dx) {
              const long sx = xx + dx - pw;
              if (sx < 0 || sx >= static_cast<long>(W)) continue;
              s += kp[dy * static_cast<long>(kw) + dx] * xp[sy * static_cast<long>(W) + sx];
            }
          }
          op[y * static_cast<long>(W) + xx] = s + bv;
        }
      }
    }
  }
  instrument::add_conv_macs(static_cast<std::uint64_t>(x.size()) * kh * kw);
  return out;
}

ConvGrads depthwise_conv_backward(const Tensor& x, const Tensor& kernel, bool has_bias,
                                  const Tensor& g) {
  check_conv(x, kernel, false, nullptr);
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t kh = kernel.dim(1), kw = kernel.dim(2);
  const long ph = static_cast<long>(kh / 2), pw = static_cast<long>(kw / 2);
  ConvGrads r{Tensor::zeros_like(x), Tensor::zeros_like(kernel),
              has_bias ? Tensor({C}, 0.0) : Tensor()};
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t base = (b * C + c) * H * W;
      const double* xp = x.data().data() + base;
      const double* gp = g.data().data() + base;
      const double* kp = kernel.data().data() + c * kh * kw;
      double* gxp = r.x.data().data() + base;
      double* gkp = r.kernel.data().data() + c * kh * kw;
      for (long y = 0; y < static_cast<long>(H); ++y) {
        for (long xx = 0; xx < static_cast<long>(W); ++xx) {
          const double gv = gp[y * static_cast<long>(W) + xx];
          if (has_bias) r.bias[c] += gv;
          for (long dy = 0; dy < static_cast<long>(kh); ++dy) {
            const long sy = y + dy - ph;
            if (sy < 0 || sy >= static_cast<long>(H)) continue;
            for (long dx = 0; dx < static_cast<long>(kw); ++dx) {
              const long sx = xx + dx - pw;
              if (sx < 0 || sx >= static_cast<long>(W)) continue;
              const long ki = dy * static_cast<long>(kw) + dx;
              const long xi = sy * static_cast<long>(W) + sx;
              gkp[ki] += gv * xp[xi];
              gxp[xi] += gv * kp[ki];
            }
          }
        }
      }
    }
  }
  return r;
}

Tensor global_avg_pool(const Tensor& x) {
  require_rank("global_avg_pool", x, 4);
  const std::size_t B = x.dim(0), C = x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor out({B, C}, 0.0);
  for (std::size_t i = 0; i < B * C; ++i) {
    const double* p = x.data().data() + i * hw;
    double s = 0.0;
    for (std::size_t j = 0; j < hw; ++j) s += p[j];
    out[i] = s / static_cast<double>(hw);
  }
  return out;
}

Tensor global_avg_pool_backward(const Shape& x_shape, const Tensor& g) {
  Tensor gx(x_shape, 0.0);
  const std::size_t hw = x_shape[2] * x_shape[3];
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double v = g[i] / static_cast<double>(hw);
    for (std::size_t j = 0; j < hw; ++j) gx[i * hw + j] = v;
  }
  return gx;
}

Tensor adaptive_avg_pool(const Tensor& x, std::size_t out_h, std::size_t out_w) {
  require_rank("adaptive_avg_pool", x, 4);
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (out_h == 0 || out_w == 0 || out_h > H || out_w > W || H % out_h || W % out_w) {
    throw ShapeError("adaptive_avg_pool: cannot pool " + to_string(x.shape()) + " to " +
                     std::to_string(out_h) + "x" + std::to_string(out_w) +
                     " (target must divide the input grid)");
  }
  const std::size_t ch = H / out_h, cw = W / out_w;
  const double inv = 1.0 / static_cast<double>(ch * cw);
  Tensor out({B, C, out_h, out_w}, 0.0);
  for (std::size_t p = 0; p < B * C; ++p) {
    const double* xp = x.data().data() + p * H * W;
    double* op = out.data().data() + p * out_h * out_w;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        double s = 0.0;
        for (std::size_t y = oy * ch; y < (oy + 1) * ch; ++y)
          for (std::size_t xx = ox * cw; xx < (ox + 1) * cw; ++xx) s += xp[y * W + xx];
        op[oy * out_w + ox] = s * inv;
      }
    }
  }
  return out;
}

Tensor adaptive_avg_pool_backward(const Shape& x_shape, const Tensor& g) {
  const std::size_t H = x_shape[2], W = x_shape[3];
  const std::size_t out_h = g.dim(2), out_w = g.dim(3);
  const std::size_t ch = H / out_h, cw = W / out_w;
  const double inv = 1.0 / static_cast<double>(ch * cw);
  Tensor gx(x_shape, 0.0);
  for (std::size_t p = 0; p < x_shape[0] * x_shape[1]; ++p) {
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t xx = 0; xx < W; ++xx)
        gx[p * H * W + y * W + xx] = g[p * out_h * out_w + (y / ch) * out_w + xx / cw] * inv;
  }
  return gx;
}

Tensor bilinear_resize(const Tensor& x, std::size_t out_h, std::size_t out_w) {
  require_rank("bilinear_resize", x, 4);
  if (out_h == 0 || out_w == 0) throw ShapeError("bilinear_resize: zero output extent");
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const auto ty = bilinear_taps(H, out_h), tx = bilinear_taps(W, out_w);
  Tensor out({B, C, out_h, out_w}, 0.0);
  for (std::size_t p = 0; p < B * C; ++p) {
    const double* xp = x.data().data() + p * H * W;
    double* op = out.data().data() + p * out_h * out_w;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const Tap& a = ty[oy];
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const Tap& b = tx[ox];
        op[oy * out_w + ox] =
            a.w0 * (b.w0 * xp[a.i0 * W + b.i0] + b.w1 * xp[a.i0 * W + b.i1]) +
            a.w1 * (b.w0 * xp[a.i1 * W + b.i0] + b.w1 * xp[a.i1 * W + b.i1]);
      }
    }
  }
  return out;
}

Tensor bilinear_resize_backward(const Shape& x_shape, const Tensor& g) {
  const std::size_t H = x_shape[2], W = x_shape[3];
  const std::size_t out_h = g.dim(2), out_w = g.dim(3);
  const auto ty = bilinear_taps(H, out_h), tx = bilinear_taps(W, out_w);
  Tensor gx(x_shape, 0.0);
  for (std::size_t p = 0; p < x_shape[0] * x_shape[1]; ++p) {
    double* gp = gx.data().data() + p * H * W;
    const double* op = g.data().data() + p * out_h * out_w;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const Tap& a = ty[oy];
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const Tap& b = tx[ox];
        const double v = op[oy * out_w + ox];
        gp[a.i0 * W + b.i0] += v * a.w0 * b.w0;
        gp[a.i0 * W + b.i1] += v * a.w0 * b.w1;
        gp[a.i1 * W + b.i0] += v * a.w1 * b.w0;
        gp[a.i1 * W + b.i1] += v * a.w1 * b.w1;
      }
    }
  }
  return gx;
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& perm) {
  const std::size_t r = x.rank();
  std::vector<bool> seen(r, false);
  if (perm.size() != r) throw ShapeError("permute: rank mismatch for " + to_string(x.shape()));
  for (auto p : perm) {
    if (p >= r || seen[p]) throw ShapeError("permute: invalid permutation for " + to_string(x.shape()));
    seen[p] = true;
  }
  std::vector<std::size_t> in_strides(r, 1);
  for (std::size_t i = r - 1; i-- > 0;) in_strides[i] = in_strides[i + 1] * x.shape()[i + 1];
  Shape os(r);
  std::vector<std::size_t> strides(r);
  for (std::size_t i = 0; i < r; ++i) {
    os[i] = x.shape()[perm[i]];
    strides[i] = in_strides[perm[i]];
  }
  Tensor out(os, 0.0);
  std::vector<std::size_t> idx(r, 0);
  std::size_t src = 0;
  for (std::size_t t = 0; t < out.size(); ++t) {
    out[t] = x[src];
    for (std::size_t i = r; i-- > 0;) {
      src += strides[i];
      if (++idx[i] < os[i]) break;
      src -= strides[i] * os[i];
      idx[i] = 0;
    }
  }
  return out;
}

std::vector<std::size_t> inverse_permutation(const std::vector<std::size_t>& perm) {
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
  return inv;
}

Tensor concat(const std::vector<const Tensor*>& xs, std::size_t axis) {
  if (xs.empty()) throw ShapeError("concat: no inputs");
  const Shape& ref = xs.front()->shape();
  if (axis >= ref.size()) throw ShapeError("concat: axis out of range for " + to_string(ref));
  Shape os = ref;
  os[axis] = 0;
  for (const Tensor* t : xs) {
    Shape s = t->shape();
    if (s.size() != ref.size()) throw ShapeError("concat: rank mismatch " + to_string(ref) + " vs " + to_string(s));
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != ref[i]) {
        throw ShapeError("concat: shape mismatch " + to_string(ref) + " vs " + to_string(s));
      }
    }
    os[axis] += s[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= ref[i];
  for (std::size_t i = axis + 1; i < ref.size(); ++i) inner *= ref[i];
  Tensor out(os, 0.0);
  double* dst = out.data().data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (const Tensor* t : xs) {
      const std::size_t chunk = t->shape()[axis] * inner;
      const double* src = t->data().data() + o * chunk;
      dst = std::copy(src, src + chunk, dst);
    }
  }
  return out;
}

std::vector<Tensor> split(const Tensor& g, std::size_t axis,
                          const std::vector<std::size_t>& extents) {
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= g.shape()[i];
  for (std::size_t i = axis + 1; i < g.rank(); ++i) inner *= g.shape()[i];
  std::vector<Tensor> parts;
  parts.reserve(extents.size());
  for (auto e : extents) {
    Shape s = g.shape();
    s[axis] = e;
    parts.emplace_back(s, 0.0);
  }
  const double* src = g.data().data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t p = 0; p < extents.size(); ++p) {
      const std::size_t chunk = extents[p] * inner;
      std::copy(src, src + chunk, parts[p].data().data() + o * chunk);
      src += chunk;
    }
  }
  return parts;
}

Tensor channel_scale(const Tensor& x, const Tensor& w) {
  if (x.rank() < 2 || w.shape() != Shape{x.dim(0), x.dim(1)}) {
    throw ShapeError("channel_scale: input " + to_string(x.shape()) + " with gate " +
                     to_string(w.shape()));
  }
  const std::size_t inner = x.size() / w.size();
  Tensor out(x.shape(), 0.0);
  for (std::size_t i = 0; i < w.size(); ++i)
    for (std::size_t j = 0; j < inner; ++j) out[i * inner + j] = x[i * inner + j] * w[i];
  return out;
}

std::pair<Tensor, Tensor> channel_scale_backward(const Tensor& x, const Tensor& w,
                                                 const Tensor& g) {
  const std::size_t inner = x.size() / w.size();
  Tensor gx(x.shape(), 0.0), gw(w.shape(), 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < inner; ++j) {
      gx[i * inner + j] = g[i * inner + j] * w[i];
      s += g[i * inner + j] * x[i * inner + j];
    }
    gw[i] = s;
  }
  return {std::move(gx), std::move(gw)};
}

namespace {

template <class F>
Tensor map(const Tensor& x, F f) {
  Tensor y(x.shape(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return y;
}

template <class F>
Tensor zip(const Tensor& a, const Tensor& b, F f) {
  Tensor y(a.shape(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) y[i] = f(a[i], b[i]);
  return y;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0); }

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  return zip(a, b, [](double u, double v) { return u + v; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  return zip(a, b, [](double u, double v) { return u * v; });
}

Tensor scale(const Tensor& x, double s) {
  return map(x, [s](double v) { return v * s; });
}

Tensor relu(const Tensor& x) {
  instrument::note_branches(x.data().data(), x.size());
  return map(x, [](double v) { return v > 0.0 ? v : 0.0; });
}

Tensor relu_backward(const Tensor& x, const Tensor& g) {
  return zip(x, g, [](double v, double gv) { return v > 0.0 ? gv : 0.0; });
}

Tensor gelu(const Tensor& x) {
  return map(x, [](double v) { return v * normal_cdf(v); });
}

Tensor gelu_backward(const Tensor& x, const Tensor& g) {
  return zip(x, g, [](double v, double gv) { return gv * (normal_cdf(v) + v * normal_pdf(v)); });
}

Tensor sigmoid(const Tensor& x) {
  return map(x, [](double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
}

Tensor sigmoid_backward(const Tensor& y, const Tensor& g) {
  return zip(y, g, [](double s, double gv) { return gv * s * (1.0 - s); });
}

double sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return s;
}

}  // namespace scaseg::kernels
