#include "selfdesc/model.hpp"

#include <cmath>
#include <limits>

namespace selfdesc::model {

void ModelShape::validate() const {
  if (vocab < static_cast<int>(Vocab::kSpecialCount)) {
    throw PreconditionError("vocabulary smaller than the special tokens");
  }
  if (d < 1 || layers < 1 || heads < 1 || ffn < 1 || max_src < 1 || max_tgt < 1) {
    throw PreconditionError("model dimensions must be positive");
  }
  if (d % heads != 0) throw PreconditionError("d must be divisible by heads");
}

namespace {

template <class S>
using Col = Eigen::Matrix<S, Eigen::Dynamic, 1>;

constexpr double kNormEps = 1e-5;

// ---- layer norm ----------------------------------------------------------

template <class S>
struct NormCache {
  Mat<S> xhat;
  Col<S> rstd;
};

template <class S>
Mat<S> norm_fwd(const Mat<S>& x, const NormParams<S>& p, NormCache<S>* c) {
  const Col<S> mean = x.rowwise().mean();
  Mat<S> xc = x.colwise() - mean;
  const Col<S> var = xc.array().square().rowwise().sum() / static_cast<S>(x.cols());
  const Col<S> rstd = (var.array() + static_cast<S>(kNormEps)).rsqrt();
  Mat<S> xhat = xc.array().colwise() * rstd.array();
  Mat<S> y = (xhat.array().rowwise() * p.gain.row(0).array()).rowwise() +
             p.bias.row(0).array();
  if (c) {
    c->xhat = std::move(xhat);
    c->rstd = rstd;
  }
  return y;
}

template <class S>
Mat<S> norm_bwd(const Mat<S>& dy, const NormParams<S>& p, const NormCache<S>& c,
                NormParams<S>& g) {
  g.gain += (dy.array() * c.xhat.array()).colwise().sum().matrix();
  g.bias += dy.colwise().sum();
  const Mat<S> dxhat = dy.array().rowwise() * p.gain.row(0).array();
  const Col<S> m1 = dxhat.rowwise().mean();
  const Col<S> m2 = (dxhat.array() * c.xhat.array()).rowwise().mean();
  Mat<S> dx = (dxhat.colwise() - m1).array() - c.xhat.array().colwise() * m2.array();
  return dx.array().colwise() * c.rstd.array();
}

// ---- attention -----------------------------------------------------------

template <class S>
struct AttnCache {
  Mat<S> xq, xkv, q, k, v, concat;
  std::vector<Mat<S>> probs;
};

// Row-wise softmax in place; with `causal`, row i only sees columns <= i.
template <class S>
void softmax_rows(Mat<S>& s, bool causal) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const Eigen::Index lim = causal ? std::min<Eigen::Index>(i + 1, s.cols()) : s.cols();
    const S mx = s.row(i).head(lim).maxCoeff();
    S total = 0;
    for (Eigen::Index j = 0; j < lim; ++j) {
      s(i, j) = std::exp(s(i, j) - mx);
      total += s(i, j);
    }
    for (Eigen::Index j = 0; j < lim; ++j) s(i, j) /= total;
    for (Eigen::Index j = lim; j < s.cols(); ++j) s(i, j) = 0;
  }
}

template <class S>
Mat<S> attn_fwd(const Mat<S>& xq, const Mat<S>& xkv, const AttentionParams<S>& p,
                int heads, bool causal, AttnCache<S>* c) {
  const auto d = p.wq.rows();
  const auto dh = d / heads;
  const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));
  Mat<S> q = xq * p.wq;
  Mat<S> k = xkv * p.wk;
  Mat<S> v = xkv * p.wv;
  Mat<S> concat(xq.rows(), d);
  std::vector<Mat<S>> probs;
  for (int h = 0; h < heads; ++h) {
    Mat<S> s = q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose();
    s *= scale;
    softmax_rows(s, causal);
    concat.middleCols(h * dh, dh).noalias() = s * v.middleCols(h * dh, dh);
    if (c) probs.push_back(std::move(s));
  }
  Mat<S> out = concat * p.wo;
  if (c) {
    c->xq = xq;
    c->xkv = xkv;
    c->q = std::move(q);
    c->k = std::move(k);
    c->v = std::move(v);
    c->concat = std::move(concat);
    c->probs = std::move(probs);
  }
  return out;
}

template <class S>
void attn_bwd(const Mat<S>& dout, const AttentionParams<S>& p, int heads,
              const AttnCache<S>& c, AttentionParams<S>& g, Mat<S>& dxq,
              Mat<S>& dxkv) {
  const auto d = p.wq.rows();
  const auto dh = d / heads;
  const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));
  g.wo.noalias() += c.concat.transpose() * dout;
  const Mat<S> dconcat = dout * p.wo.transpose();
  Mat<S> dq(c.q.rows(), d), dk(c.k.rows(), d), dv(c.v.rows(), d);
  for (int h = 0; h < heads; ++h) {
    const auto& prob = c.probs[static_cast<std::size_t>(h)];
    const auto dO = dconcat.middleCols(h * dh, dh);
    dv.middleCols(h * dh, dh).noalias() = prob.transpose() * dO;
    Mat<S> dp = dO * c.v.middleCols(h * dh, dh).transpose();
    const Col<S> dot = (dp.array() * prob.array()).rowwise().sum();
    Mat<S> ds = prob.array() * (dp.colwise() - dot).array();
    ds *= scale;
    dq.middleCols(h * dh, dh).noalias() = ds * c.k.middleCols(h * dh, dh);
    dk.middleCols(h * dh, dh).noalias() = ds.transpose() * c.q.middleCols(h * dh, dh);
  }
  g.wq.noalias() += c.xq.transpose() * dq;
  g.wk.noalias() += c.xkv.transpose() * dk;
  g.wv.noalias() += c.xkv.transpose() * dv;
  dxq = dq * p.wq.transpose();
  dxkv = dk * p.wk.transpose();
  dxkv.noalias() += dv * p.wv.transpose();
}

// ---- feed-forward (tanh-approximated GELU) -------------------------------

template <class S>
struct FfnCache {
  Mat<S> x, pre, act;
};

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

template <class S>
S gelu(S x) {
  const S t = std::tanh(static_cast<S>(kGeluC) * (x + static_cast<S>(kGeluA) * x * x * x));
  return static_cast<S>(0.5) * x * (1 + t);
}

template <class S>
S gelu_grad(S x) {
  const S c = static_cast<S>(kGeluC);
  const S a = static_cast<S>(kGeluA);
  const S t = std::tanh(c * (x + a * x * x * x));
  return static_cast<S>(0.5) * (1 + t) +
         static_cast<S>(0.5) * x * (1 - t * t) * c * (1 + 3 * a * x * x);
}

template <class S>
Mat<S> ffn_fwd(const Mat<S>& x, const FfnParams<S>& p, FfnCache<S>* c) {
  Mat<S> pre = (x * p.w1).rowwise() + p.b1.row(0);
  Mat<S> act = pre.unaryExpr([](S v) { return gelu(v); });
  Mat<S> out = (act * p.w2).rowwise() + p.b2.row(0);
  if (c) {
    c->x = x;
    c->pre = std::move(pre);
    c->act = std::move(act);
  }
  return out;
}

template <class S>
Mat<S> ffn_bwd(const Mat<S>& dout, const FfnParams<S>& p, const FfnCache<S>& c,
               FfnParams<S>& g) {
  g.w2.noalias() += c.act.transpose() * dout;
  g.b2 += dout.colwise().sum();
  const Mat<S> dact = dout * p.w2.transpose();
  const Mat<S> dpre =
      dact.array() * c.pre.unaryExpr([](S v) { return gelu_grad(v); }).array();
  g.w1.noalias() += c.x.transpose() * dpre;
  g.b1 += dpre.colwise().sum();
  return dpre * p.w1.transpose();
}

// ---- encoder / decoder stacks --------------------------------------------

template <class S>
struct EncoderCache {
  std::vector<NormCache<S>> ln1, ln2;
  std::vector<AttnCache<S>> attn;
  std::vector<FfnCache<S>> ffn;
  NormCache<S> final_norm;
};

template <class S>
struct DecoderCache {
  std::vector<NormCache<S>> ln1, ln2, ln3;
  std::vector<AttnCache<S>> self_attn, cross_attn;
  std::vector<FfnCache<S>> ffn;
  NormCache<S> final_norm;
};

template <class S>
Mat<S> embed(const Params<S>& p, const Mat<S>& pos, const std::vector<TokenId>& ids) {
  Mat<S> x(static_cast<Eigen::Index>(ids.size()), p.shape.d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    x.row(r) = p.embedding.row(ids[i]) + pos.row(r);
  }
  return x;
}

template <class S>
void embed_bwd(const Mat<S>& dx, const std::vector<TokenId>& ids, Mat<S>& g_embedding,
               Mat<S>& g_pos) {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    g_embedding.row(ids[i]) += dx.row(r);
  }
  g_pos.topRows(dx.rows()) += dx;
}

template <class S>
void check_ids(const Params<S>& p, const std::vector<TokenId>& ids, int max_len,
               const char* what) {
  if (ids.empty()) throw PreconditionError(std::string(what) + " sequence is empty");
  if (static_cast<int>(ids.size()) > max_len) {
    throw PreconditionError(std::string(what) + " sequence of " +
                            std::to_string(ids.size()) + " tokens exceeds " +
                            std::to_string(max_len));
  }
  for (auto id : ids) {
    if (id < 0 || id >= p.shape.vocab) throw PreconditionError("token id out of range");
  }
}

template <class S>
Mat<S> encode(const Params<S>& p, const std::vector<TokenId>& src, EncoderCache<S>* c) {
  check_ids(p, src, p.shape.max_src, "source");
  Mat<S> x = embed(p, p.enc_pos, src);
  const auto L = p.encoder.size();
  if (c) {
    c->ln1.resize(L);
    c->ln2.resize(L);
    c->attn.resize(L);
    c->ffn.resize(L);
  }
  for (std::size_t l = 0; l < L; ++l) {
    const auto& layer = p.encoder[l];
    const Mat<S> a = norm_fwd(x, layer.ln1, c ? &c->ln1[l] : nullptr);
    x += attn_fwd(a, a, layer.attn, p.shape.heads, false, c ? &c->attn[l] : nullptr);
    const Mat<S> b = norm_fwd(x, layer.ln2, c ? &c->ln2[l] : nullptr);
    x += ffn_fwd(b, layer.ffn, c ? &c->ffn[l] : nullptr);
  }
  return norm_fwd(x, p.enc_norm, c ? &c->final_norm : nullptr);
}

template <class S>
void encode_bwd(const Params<S>& p, const std::vector<TokenId>& src, const Mat<S>& dh,
                const EncoderCache<S>& c, Params<S>& g) {
  Mat<S> dx = norm_bwd(dh, p.enc_norm, c.final_norm, g.enc_norm);
  Mat<S> dq, dkv;
  for (std::size_t l = p.encoder.size(); l-- > 0;) {
    const auto& layer = p.encoder[l];
    auto& gl = g.encoder[l];
    const Mat<S> db = ffn_bwd(dx, layer.ffn, c.ffn[l], gl.ffn);
    dx += norm_bwd(db, layer.ln2, c.ln2[l], gl.ln2);
    attn_bwd(dx, layer.attn, p.shape.heads, c.attn[l], gl.attn, dq, dkv);
    dq += dkv;
    dx += norm_bwd(dq, layer.ln1, c.ln1[l], gl.ln1);
  }
  embed_bwd(dx, src, g.embedding, g.enc_pos);
}

template <class S>
Mat<S> decode(const Params<S>& p, const std::vector<TokenId>& dec_in, const Mat<S>& h,
              DecoderCache<S>* c) {
  check_ids(p, dec_in, p.shape.max_tgt + 1, "target");
  Mat<S> y = embed(p, p.dec_pos, dec_in);
  const auto L = p.decoder.size();
  if (c) {
    c->ln1.resize(L);
    c->ln2.resize(L);
    c->ln3.resize(L);
    c->self_attn.resize(L);
    c->cross_attn.resize(L);
    c->ffn.resize(L);
  }
  for (std::size_t l = 0; l < L; ++l) {
    const auto& layer = p.decoder[l];
    const Mat<S> a = norm_fwd(y, layer.ln1, c ? &c->ln1[l] : nullptr);
    y += attn_fwd(a, a, layer.self_attn, p.shape.heads, true,
                  c ? &c->self_attn[l] : nullptr);
    const Mat<S> b = norm_fwd(y, layer.ln2, c ? &c->ln2[l] : nullptr);
    y += attn_fwd(b, h, layer.cross_attn, p.shape.heads, false,
                  c ? &c->cross_attn[l] : nullptr);
    const Mat<S> e = norm_fwd(y, layer.ln3, c ? &c->ln3[l] : nullptr);
    y += ffn_fwd(e, layer.ffn, c ? &c->ffn[l] : nullptr);
  }
  return norm_fwd(y, p.dec_norm, c ? &c->final_norm : nullptr);
}

// Returns d(loss)/d(encoder output).
template <class S>
Mat<S> decode_bwd(const Params<S>& p, const std::vector<TokenId>& dec_in,
                  const Mat<S>& dyf, Eigen::Index src_len, const DecoderCache<S>& c,
                  Params<S>& g) {
  Mat<S> dy = norm_bwd(dyf, p.dec_norm, c.final_norm, g.dec_norm);
  Mat<S> dh = Mat<S>::Zero(src_len, p.shape.d);
  Mat<S> dq, dkv;
  for (std::size_t l = p.decoder.size(); l-- > 0;) {
    const auto& layer = p.decoder[l];
    auto& gl = g.decoder[l];
    const Mat<S> de = ffn_bwd(dy, layer.ffn, c.ffn[l], gl.ffn);
    dy += norm_bwd(de, layer.ln3, c.ln3[l], gl.ln3);
    attn_bwd(dy, layer.cross_attn, p.shape.heads, c.cross_attn[l], gl.cross_attn, dq, dkv);
    dh += dkv;
    dy += norm_bwd(dq, layer.ln2, c.ln2[l], gl.ln2);
    attn_bwd(dy, layer.self_attn, p.shape.heads, c.self_attn[l], gl.self_attn, dq, dkv);
    dq += dkv;
    dy += norm_bwd(dq, layer.ln1, c.ln1[l], gl.ln1);
  }
  embed_bwd(dy, dec_in, g.embedding, g.dec_pos);
  return dh;
}

template <class S>
Mat<S> logits_of(const Params<S>& p, const Mat<S>& yf) {
  Mat<S> logits = yf * p.embedding.transpose();
  logits.rowwise() += p.out_bias.row(0);
  return logits;
}

std::vector<TokenId> decoder_input(const std::vector<TokenId>& tgt) {
  std::vector<TokenId> in{Vocab::kPad};
  in.insert(in.end(), tgt.begin(), tgt.end());
  return in;
}

}  // namespace

template <class S>
SequenceLoss sequence_loss(const Params<S>& params, const Example& ex,
                           std::type_identity_t<S> weight,
                           std::type_identity_t<Params<S>>* grads) {
  const auto dec_in = decoder_input(ex.tgt);
  std::vector<TokenId> labels = ex.tgt;
  labels.push_back(Vocab::kEos);

  EncoderCache<S> ec;
  DecoderCache<S> dc;
  const bool train = grads != nullptr;
  const Mat<S> h = encode(params, ex.src, train ? &ec : nullptr);
  const Mat<S> yf = decode(params, dec_in, h, train ? &dc : nullptr);
  Mat<S> probs = logits_of(params, yf);

  SequenceLoss out;
  out.tokens = labels.size();
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const S mx = probs.row(i).maxCoeff();
    probs.row(i) = (probs.row(i).array() - mx).exp();
    const S total = probs.row(i).sum();
    probs.row(i) /= total;
    const auto label = labels[static_cast<std::size_t>(i)];
    const double p = static_cast<double>(probs(i, label));
    out.sum += -std::log(std::max(p, std::numeric_limits<double>::min()));
  }
  if (!std::isfinite(out.sum)) {
    throw std::runtime_error("non-finite loss on example '" + ex.id + "'");
  }
  if (!train) return out;

  // d(sum CE)/d(logits) = probs - onehot.
  Mat<S>& dlogits = probs;
  for (Eigen::Index i = 0; i < dlogits.rows(); ++i) {
    dlogits(i, labels[static_cast<std::size_t>(i)]) -= 1;
  }
  dlogits *= weight;
  grads->out_bias += dlogits.colwise().sum();
  grads->embedding.noalias() += dlogits.transpose() * yf;
  const Mat<S> dyf = dlogits * params.embedding;
  const Mat<S> dh = decode_bwd(params, dec_in, dyf, h.rows(), dc, *grads);
  encode_bwd(params, ex.src, dh, ec, *grads);
  return out;
}

template <class S>
std::vector<TokenId> greedy_decode(const Params<S>& params,
                                   const std::vector<TokenId>& src,
                                   std::size_t max_len) {
  const Mat<S> h = encode<S>(params, src, nullptr);
  std::vector<TokenId> out;
  const auto cap = std::min<std::size_t>(max_len, static_cast<std::size_t>(params.shape.max_tgt));
  while (out.size() < cap) {
    const Mat<S> yf = decode<S>(params, decoder_input(out), h, nullptr);
    const Mat<S> last = logits_of<S>(params, yf.bottomRows(1));
    TokenId best = 0;
    for (Eigen::Index j = 1; j < last.cols(); ++j) {
      if (last(0, j) > last(0, best)) best = static_cast<TokenId>(j);
    }
    if (best == Vocab::kEos) break;
    out.push_back(best);
  }
  return out;
}

template <class S>
Mat<S> target_probabilities(const Params<S>& params, const Example& ex) {
  const Mat<S> h = encode<S>(params, ex.src, nullptr);
  Mat<S> probs = logits_of<S>(params, decode<S>(params, decoder_input(ex.tgt), h, nullptr));
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const S mx = probs.row(i).maxCoeff();
    probs.row(i) = (probs.row(i).array() - mx).exp();
    probs.row(i) /= probs.row(i).sum();
  }
  return probs;
}

template SequenceLoss sequence_loss<float>(const Params<float>&, const Example&, float,
                                           Params<float>*);
template SequenceLoss sequence_loss<double>(const Params<double>&, const Example&,
                                            double, Params<double>*);
template std::vector<TokenId> greedy_decode<float>(const Params<float>&,
                                                   const std::vector<TokenId>&,
                                                   std::size_t);
template std::vector<TokenId> greedy_decode<double>(const Params<double>&,
                                                    const std::vector<TokenId>&,
                                                    std::size_t);
template Mat<float> target_probabilities<float>(const Params<float>&, const Example&);
template Mat<double> target_probabilities<double>(const Params<double>&, const Example&);

}  // namespace selfdesc::model
