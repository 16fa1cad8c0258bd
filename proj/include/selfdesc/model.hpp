#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <type_traits>
#include <vector>

#include "selfdesc/tokenizer.hpp"

namespace selfdesc::model {

struct ModelShape {
  int vocab = 0;
  int d = 64;
  int layers = 2;
  int heads = 4;
  int ffn = 256;
  int max_src = static_cast<int>(kDefaultMaxInput);
  int max_tgt = 128;

  void validate() const;
  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

// Biases and norm parameters are stored as 1 x n matrices so every tensor
// has the same type.
template <class S>
struct NormParams {
  Mat<S> gain, bias;
};

template <class S>
struct AttentionParams {
  Mat<S> wq, wk, wv, wo;
};

template <class S>
struct FfnParams {
  Mat<S> w1, b1, w2, b2;
};

template <class S>
struct EncoderLayer {
  NormParams<S> ln1;
  AttentionParams<S> attn;
  NormParams<S> ln2;
  FfnParams<S> ffn;
};

template <class S>
struct DecoderLayer {
  NormParams<S> ln1;
  AttentionParams<S> self_attn;
  NormParams<S> ln2;
  AttentionParams<S> cross_attn;
  NormParams<S> ln3;
  FfnParams<S> ffn;
};

// Pre-norm encoder-decoder; input and output embeddings are tied.
template <class S>
struct Params {
  ModelShape shape;
  Mat<S> embedding;  // vocab x d
  Mat<S> enc_pos;    // max_src x d
  Mat<S> dec_pos;    // (max_tgt + 1) x d
  std::vector<EncoderLayer<S>> encoder;
  NormParams<S> enc_norm;
  std::vector<DecoderLayer<S>> decoder;
  NormParams<S> dec_norm;
  Mat<S> out_bias;  // 1 x vocab

  static Params zeros(const ModelShape& shape);
  // Normal(0, init_std) matrices, unit norm gains, zero biases.
  static Params init(const ModelShape& shape, std::uint64_t seed,
                     double init_std = 0.02);

  // f(name, tensor) over every tensor in a fixed order.
  template <class F>
  void visit(F&& f) {
    visit_impl(*this, f);
  }
  template <class F>
  void visit(F&& f) const {
    visit_impl(*this, f);
  }

  std::size_t parameter_count() const;
  void set_zero();
  Params& operator+=(const Params& o);
  bool all_finite() const;

  template <class T>
  Params<T> cast() const;

 private:
  template <class Self, class F>
  static void visit_impl(Self& self, F& f);
};

// One training sequence: encoder ids, target ids (without EOS), task tag.
struct Example {
  std::vector<TokenId> src;
  std::vector<TokenId> tgt;
  bool is_md = false;
  std::string id;
};

struct SequenceLoss {
  double sum = 0.0;  // summed token cross-entropy
  std::size_t tokens = 0;
};

// Teacher-forced forward pass over one example (decoder input is PAD
// followed by the target, labels are the target followed by EOS). When
// `grads` is non-null, adds weight * d(sum CE)/d(params) into it.
template <class S>
SequenceLoss sequence_loss(const Params<S>& params, const Example& ex,
                           std::type_identity_t<S> weight,
                           std::type_identity_t<Params<S>>* grads);

// Greedy decoding; ties go to the lowest id. Returns generated ids without
// the final EOS.
template <class S>
std::vector<TokenId> greedy_decode(const Params<S>& params,
                                   const std::vector<TokenId>& src,
                                   std::size_t max_len);

// Decoder output distribution at every target position, for diagnostics.
template <class S>
Mat<S> target_probabilities(const Params<S>& params, const Example& ex);

}  // namespace selfdesc::model

#include "selfdesc/model_params.inl"
