#include "scaseg/attention.hpp"

#include <cmath>

#include "scaseg/instrument.hpp"

namespace scaseg {

namespace {

LinearParams make_linear(std::size_t in, std::size_t out, synth::NormalStream& rng, double std) {
  LinearParams p{Tensor({out, in}), Tensor({out}, 0.0)};
  synth::fill_normal(p.weight, rng, std);
  return p;
}

template <class P>
void validate_common(const P& p, std::size_t c_q, std::size_t c_kv, std::size_t qk_width,
                     const char* kind) {
  const std::string name(kind);
  validate(p.wq, name + ".wq");
  validate(p.wk, name + ".wk");
  validate(p.wv, name + ".wv");
  validate(p.wo, name + ".wo");
  if (p.heads == 0 || p.dim_head == 0) throw ShapeError(name + ": heads and dim_head must be >= 1");
  const std::size_t inner = p.heads * p.dim_head;
  auto expect = [&](const LinearParams& l, std::size_t out, std::size_t in, const char* which) {
    if (l.weight.shape() != Shape{out, in}) {
      throw ShapeError(name + "." + which + ": expected weight " + to_string({out, in}) +
                       ", got " + to_string(l.weight.shape()));
    }
  };
  expect(p.wq, qk_width, c_q, "wq");
  expect(p.wk, qk_width, c_kv, "wk");
  expect(p.wv, inner, c_kv, "wv");
  expect(p.wo, c_q, inner, "wo");
}

void check_tokens(const char* op, const Tensor& xq, const Tensor& xkv) {
  if (xq.rank() != 3 || xkv.rank() != 3 || xq.dim(0) != xkv.dim(0)) {
    throw ShapeError(std::string(op) + ": expected [B, N, C] inputs with equal batch, got " +
                     to_string(xq.shape()) + " and " + to_string(xkv.shape()));
  }
}

// [B, N, heads*width] -> [B, heads, N, width]
Var split_heads(Var x, std::size_t heads) {
  const Shape& s = x.shape();
  return permute(reshape(x, {s[0], s[1], heads, s[2] / heads}), {0, 2, 1, 3});
}

// [B, heads, N, width] -> [B, N, heads*width]
Var merge_heads(Var x) {
  const Shape s = x.shape();
  return reshape(permute(x, {0, 2, 1, 3}), {s[0], s[2], s[1] * s[3]});
}

// softmax(scale * q k^T) v with stage tagging for the cost model.
AttnVars attend(Var q, Var k, Var v, double scale) {
  instrument::note_query_key(q.value().size() + k.value().size());
  Var scores;
  {
    instrument::StageScope stage(instrument::Stage::kScore);
    scores = matmul(q, transpose_last2(k));
  }
  Var attn = softmax_lastdim(scale == 1.0 ? scores : scaseg::scale(scores, scale));
  Var p;
  {
    instrument::StageScope stage(instrument::Stage::kWeightedSum);
    p = matmul(attn, v);
  }
  return {merge_heads(p), attn};
}

template <class Params, class Fn>
AttnOutput run_detached(const Params& params, const Tensor& xq, const Tensor* xkv, Fn fn) {
  Tape tape(false);
  Var q = tape.constant(xq);
  Var kv = xkv ? tape.constant(*xkv) : q;
  AttnVars r = fn(q, kv, bind(tape, params));
  return {r.out.value(), r.attn.value()};
}

}  // namespace

SCAParams make_sca_params(std::size_t c_q, std::size_t c_kv, std::size_t heads,
                          std::size_t dim_head, synth::NormalStream& rng, double std) {
  SCAParams p;
  p.wq = make_linear(c_q, heads, rng, std);
  p.wk = make_linear(c_kv, heads, rng, std);
  p.wv = make_linear(c_kv, heads * dim_head, rng, std);
  p.wo = make_linear(heads * dim_head, c_q, rng, std);
  p.heads = heads;
  p.dim_head = dim_head;
  p.scale = 1.0;
  return p;
}

VanillaAttnParams make_vanilla_params(std::size_t c_q, std::size_t c_kv, std::size_t heads,
                                      std::size_t dim_head, synth::NormalStream& rng, double std) {
  VanillaAttnParams p;
  p.wq = make_linear(c_q, heads * dim_head, rng, std);
  p.wk = make_linear(c_kv, heads * dim_head, rng, std);
  p.wv = make_linear(c_kv, heads * dim_head, rng, std);
  p.wo = make_linear(heads * dim_head, c_q, rng, std);
  p.heads = heads;
  p.dim_head = dim_head;
  p.scale = 1.0 / std::sqrt(static_cast<double>(dim_head));
  return p;
}

void validate(const SCAParams& p, std::size_t c_q, std::size_t c_kv) {
  validate_common(p, c_q, c_kv, p.heads, "sca");
}

void validate(const VanillaAttnParams& p, std::size_t c_q, std::size_t c_kv) {
  validate_common(p, c_q, c_kv, p.heads * p.dim_head, "attn");
}

AttnVars cross_attention(Var xq, Var xkv, const VanillaAttnVars& p) {
  check_tokens("cross_attention", xq.value(), xkv.value());
  Var q = split_heads(linear(xq, p.wq), p.heads);
  Var k = split_heads(linear(xkv, p.wk), p.heads);
  Var v = split_heads(linear(xkv, p.wv), p.heads);
  AttnVars a = attend(q, k, v, p.scale);
  return {linear(a.out, p.wo), a.attn};
}

AttnVars self_attention(Var x, const VanillaAttnVars& p) { return cross_attention(x, x, p); }

AttnVars strip_cross_attention(Var xq, Var xkv, const SCAVars& p) {
  check_tokens("strip_cross_attention", xq.value(), xkv.value());
  // [B, N, heads] -> [B, heads, N, 1]
  Var q = split_heads(linear(xq, p.wq), p.heads);
  Var k = split_heads(linear(xkv, p.wk), p.heads);
  Var v = split_heads(linear(xkv, p.wv), p.heads);
  AttnVars a = attend(q, k, v, p.scale);
  return {linear(a.out, p.wo), a.attn};
}

AttnOutput self_attention(const Tensor& x, const VanillaAttnParams& p) {
  validate(p, x.dim(-1), x.dim(-1));
  return run_detached(
      p, x, nullptr, [](Var a, Var, const VanillaAttnVars& v) { return self_attention(a, v); });
}

AttnOutput cross_attention(const Tensor& xq, const Tensor& xkv, const VanillaAttnParams& p) {
  validate(p, xq.dim(-1), xkv.dim(-1));
  return run_detached(p, xq, &xkv, [](Var a, Var b, const VanillaAttnVars& v) {
    return cross_attention(a, b, v);
  });
}

AttnOutput strip_cross_attention(const Tensor& xq, const Tensor& xkv, const SCAParams& p) {
  validate(p, xq.dim(-1), xkv.dim(-1));
  return run_detached(p, xq, &xkv, [](Var a, Var b, const SCAVars& v) {
    return strip_cross_attention(a, b, v);
  });
}

}  // namespace scaseg
