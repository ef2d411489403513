#include "scaseg/oracle.hpp"

#include <cmath>
#include <vector>

namespace scaseg::oracle {

namespace {

using Matrix = std::vector<std::vector<double>>;

// y[n][o] = b[o] + sum_i x[batch][n][i] * w[o][i]
Matrix project(const Tensor& x, std::size_t batch, const LinearParams& l) {
  const std::size_t n_tok = x.dim(1), in = x.dim(2), out = l.weight.dim(0);
  Matrix y(n_tok, std::vector<double>(out, 0.0));
  for (std::size_t n = 0; n < n_tok; ++n) {
    for (std::size_t o = 0; o < out; ++o) {
      double s = 0.0;
      for (std::size_t i = 0; i < in; ++i) s += x.at({batch, n, i}) * l.weight.at({o, i});
      y[n][o] = s + (l.bias ? (*l.bias)[o] : 0.0);
    }
  }
  return y;
}

// Generic multi-head attention with per-head query/key width `qk_width`.
AttnOutput attend(const Tensor& xq, const Tensor& xkv, const LinearParams& wq,
                  const LinearParams& wk, const LinearParams& wv, const LinearParams& wo,
                  std::size_t heads, std::size_t dim_head, std::size_t qk_width, double scale) {
  const std::size_t B = xq.dim(0), nq = xq.dim(1), nkv = xkv.dim(1), cq = wo.weight.dim(0);
  AttnOutput r{Tensor({B, nq, cq}), Tensor({B, heads, nq, nkv})};
  for (std::size_t b = 0; b < B; ++b) {
    const Matrix q = project(xq, b, wq);
    const Matrix k = project(xkv, b, wk);
    const Matrix v = project(xkv, b, wv);
    Matrix merged(nq, std::vector<double>(heads * dim_head, 0.0));
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t i = 0; i < nq; ++i) {
        std::vector<double> logits(nkv);
        double mx = -INFINITY;
        for (std::size_t j = 0; j < nkv; ++j) {
          double s = 0.0;
          for (std::size_t d = 0; d < qk_width; ++d) s += q[i][h * qk_width + d] * k[j][h * qk_width + d];
          logits[j] = scale * s;
          mx = std::max(mx, logits[j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < nkv; ++j) z += std::exp(logits[j] - mx);
        for (std::size_t j = 0; j < nkv; ++j) {
          const double w = std::exp(logits[j] - mx) / z;
          r.attn.at({b, h, i, j}) = w;
          for (std::size_t d = 0; d < dim_head; ++d) merged[i][h * dim_head + d] += w * v[j][h * dim_head + d];
        }
      }
    }
    for (std::size_t i = 0; i < nq; ++i) {
      for (std::size_t o = 0; o < cq; ++o) {
        double s = 0.0;
        for (std::size_t c = 0; c < heads * dim_head; ++c) s += merged[i][c] * wo.weight.at({o, c});
        r.out.at({b, i, o}) = s + (wo.bias ? (*wo.bias)[o] : 0.0);
      }
    }
  }
  return r;
}

}  // namespace

AttnOutput oracle_attention(const Tensor& xq, const Tensor& xkv, const VanillaAttnParams& p) {
  validate(p, xq.dim(-1), xkv.dim(-1));
  return attend(xq, xkv, p.wq, p.wk, p.wv, p.wo, p.heads, p.dim_head, p.dim_head, p.scale);
}

AttnOutput oracle_strip_attention(const Tensor& xq, const Tensor& xkv, const SCAParams& p) {
  validate(p, xq.dim(-1), xkv.dim(-1));
  return attend(xq, xkv, p.wq, p.wk, p.wv, p.wo, p.heads, p.dim_head, 1, p.scale);
}

}  // namespace scaseg::oracle
