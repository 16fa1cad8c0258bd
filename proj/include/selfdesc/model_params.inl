#pragma once

// Template definitions for model::Params. Included from model.hpp.

#include "selfdesc/errors.hpp"
#include "selfdesc/rng.hpp"

namespace selfdesc::model {

template <class S>
template <class Self, class F>
void Params<S>::visit_impl(Self& self, F& f) {
  auto norm = [&](const std::string& p, auto& n) {
    f(p + ".gain", n.gain);
    f(p + ".bias", n.bias);
  };
  auto attn = [&](const std::string& p, auto& a) {
    f(p + ".wq", a.wq);
    f(p + ".wk", a.wk);
    f(p + ".wv", a.wv);
    f(p + ".wo", a.wo);
  };
  auto ffn = [&](const std::string& p, auto& x) {
    f(p + ".w1", x.w1);
    f(p + ".b1", x.b1);
    f(p + ".w2", x.w2);
    f(p + ".b2", x.b2);
  };
  f(std::string("embedding"), self.embedding);
  f(std::string("enc_pos"), self.enc_pos);
  f(std::string("dec_pos"), self.dec_pos);
  for (std::size_t i = 0; i < self.encoder.size(); ++i) {
    const auto p = "encoder." + std::to_string(i);
    auto& l = self.encoder[i];
    norm(p + ".ln1", l.ln1);
    attn(p + ".attn", l.attn);
    norm(p + ".ln2", l.ln2);
    ffn(p + ".ffn", l.ffn);
  }
  norm("enc_norm", self.enc_norm);
  for (std::size_t i = 0; i < self.decoder.size(); ++i) {
    const auto p = "decoder." + std::to_string(i);
    auto& l = self.decoder[i];
    norm(p + ".ln1", l.ln1);
    attn(p + ".self_attn", l.self_attn);
    norm(p + ".ln2", l.ln2);
    attn(p + ".cross_attn", l.cross_attn);
    norm(p + ".ln3", l.ln3);
    ffn(p + ".ffn", l.ffn);
  }
  norm("dec_norm", self.dec_norm);
  f(std::string("out_bias"), self.out_bias);
}

template <class S>
Params<S> Params<S>::zeros(const ModelShape& shape) {
  shape.validate();
  const int d = shape.d;
  Params p;
  p.shape = shape;
  auto z = [](int r, int c) { return Mat<S>::Zero(r, c); };
  auto norm = [&] { return NormParams<S>{z(1, d), z(1, d)}; };
  auto attn = [&] { return AttentionParams<S>{z(d, d), z(d, d), z(d, d), z(d, d)}; };
  auto ffn = [&] {
    return FfnParams<S>{z(d, shape.ffn), z(1, shape.ffn), z(shape.ffn, d), z(1, d)};
  };
  p.embedding = z(shape.vocab, d);
  p.enc_pos = z(shape.max_src, d);
  p.dec_pos = z(shape.max_tgt + 1, d);
  for (int i = 0; i < shape.layers; ++i) {
    p.encoder.push_back({norm(), attn(), norm(), ffn()});
    p.decoder.push_back({norm(), attn(), norm(), attn(), norm(), ffn()});
  }
  p.enc_norm = norm();
  p.dec_norm = norm();
  p.out_bias = z(1, shape.vocab);
  return p;
}

template <class S>
Params<S> Params<S>::init(const ModelShape& shape, std::uint64_t seed,
                          double init_std) {
  auto p = zeros(shape);
  Rng rng(derive_seed(seed, "model-init"));
  p.visit([&](const std::string& name, Mat<S>& m) {
    if (name.ends_with(".gain")) {
      m.setOnes();
    } else if (m.rows() > 1) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
          m(i, j) = static_cast<S>(init_std * rng.normal());
        }
      }
    }
  });
  return p;
}

template <class S>
std::size_t Params<S>::parameter_count() const {
  std::size_t n = 0;
  visit([&](const std::string&, const Mat<S>& m) {
    n += static_cast<std::size_t>(m.size());
  });
  return n;
}

template <class S>
void Params<S>::set_zero() {
  visit([](const std::string&, Mat<S>& m) { m.setZero(); });
}

template <class S>
Params<S>& Params<S>::operator+=(const Params& o) {
  std::vector<const Mat<S>*> theirs;
  o.visit([&](const std::string&, const Mat<S>& m) { theirs.push_back(&m); });
  std::size_t i = 0;
  visit([&](const std::string&, Mat<S>& m) { m += *theirs[i++]; });
  return *this;
}

template <class S>
bool Params<S>::all_finite() const {
  bool ok = true;
  visit([&](const std::string&, const Mat<S>& m) { ok = ok && m.allFinite(); });
  return ok;
}

template <class S>
template <class T>
Params<T> Params<S>::cast() const {
  auto out = Params<T>::zeros(shape);
  std::vector<const Mat<S>*> mine;
  visit([&](const std::string&, const Mat<S>& m) { mine.push_back(&m); });
  std::size_t i = 0;
  out.visit([&](const std::string&, Mat<T>& m) { m = mine[i++]->template cast<T>(); });
  return out;
}

}  // namespace selfdesc::model
