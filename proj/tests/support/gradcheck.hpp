#pragma once

// Central finite-difference check of model::batch_loss gradients.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "selfdesc/rng.hpp"
#include "selfdesc/train.hpp"

namespace selfdesc::testing {

struct TensorCheck {
  std::string name;
  double rel_error = 0.0;
};

// Tiny double model with non-trivial norm parameters and biases.
inline model::Params<double> gradcheck_params(const model::ModelShape& shape,
                                              std::uint64_t seed) {
  auto p = model::Params<double>::init(shape, seed, 0.3);
  Rng rng(derive_seed(seed, "gradcheck"));
  p.visit([&](const std::string& name, model::Mat<double>& m) {
    if (m.rows() == 1) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        m(0, j) += (name.ends_with(".gain") ? 0.2 : 0.1) * rng.normal();
      }
    }
  });
  return p;
}

inline std::vector<model::Example> random_batch(Rng& rng, int vocab, int max_src,
                                                int max_tgt, std::size_t size) {
  std::vector<model::Example> batch;
  for (std::size_t b = 0; b < size; ++b) {
    model::Example ex;
    ex.is_md = rng.below(2) == 0;
    ex.src.push_back(ex.is_md ? model::Vocab::kMd : model::Vocab::kEg);
    const auto ns = 1 + rng.below(static_cast<std::size_t>(max_src - 1));
    for (std::size_t i = 0; i < ns; ++i) {
      ex.src.push_back(static_cast<model::TokenId>(rng.below(static_cast<std::size_t>(vocab))));
    }
    const auto nt = rng.below(static_cast<std::size_t>(max_tgt));
    for (std::size_t i = 0; i < nt; ++i) {
      ex.tgt.push_back(static_cast<model::TokenId>(
          model::Vocab::kSpecialCount +
          rng.below(static_cast<std::size_t>(vocab) - model::Vocab::kSpecialCount)));
    }
    ex.id = "b" + std::to_string(b);
    batch.push_back(std::move(ex));
  }
  return batch;
}

// Per-tensor relative error ||analytic - numeric|| / max(||analytic||, ||numeric||).
inline std::vector<TensorCheck> check_gradients(const model::Params<double>& params,
                                                const std::vector<model::Example>& batch,
                                                double h = 1e-5) {
  auto analytic = model::Params<double>::zeros(params.shape);
  model::batch_loss(params, batch, &analytic);
  std::vector<const model::Mat<double>*> grads;
  analytic.visit([&](const std::string&, const model::Mat<double>& m) { grads.push_back(&m); });

  auto probe = params;
  std::vector<TensorCheck> out;
  std::size_t t = 0;
  probe.visit([&](const std::string& name, model::Mat<double>& m) {
    const auto& g = *grads[t++];
    double diff = 0.0;
    double na = 0.0;
    double nn = 0.0;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double keep = m.data()[i];
      m.data()[i] = keep + h;
      const double up = model::batch_loss(probe, batch, nullptr).total;
      m.data()[i] = keep - h;
      const double down = model::batch_loss(probe, batch, nullptr).total;
      m.data()[i] = keep;
      const double numeric = (up - down) / (2 * h);
      const double a = g.data()[i];
      diff += (a - numeric) * (a - numeric);
      na += a * a;
      nn += numeric * numeric;
    }
    const double scale = std::max(std::sqrt(na), std::sqrt(nn));
    out.push_back({name, scale > 0 ? std::sqrt(diff) / scale : 0.0});
  });
  return out;
}

}  // namespace selfdesc::testing
