#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <unistd.h>
#include <string>
#include <vector>

#include "mdvc/attention.hpp"
#include "mdvc/model.hpp"
#include "mdvc/rng.hpp"
#include "mdvc/tensor.hpp"
#include "mdvc/transformer.hpp"

namespace mdvc::testing {

inline Tensor random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, bool trainable = false,
                            double scale = 1.0) {
  Rng rng(seed);
  std::vector<double> v(rows * cols);
  for (double& x : v) x = scale * rng.normal();
  return trainable ? Tensor::parameter({rows, cols}, std::move(v)) : Tensor::matrix(rows, cols, std::move(v));
}

inline void randomize(Tensor t, std::uint64_t seed, double scale = 0.5) {
  Rng rng(seed);
  for (double& x : t.mutable_data()) x = scale * rng.normal();
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst;
};

// Central differences against reverse-mode gradients. Relative error uses
// max(|analytic|, |numeric|, floor) as denominator.
inline GradCheckResult grad_check(const std::vector<Tensor>& params, const std::function<Tensor()>& loss_fn,
                                  double h = 1e-6, double floor = 1e-3) {
  for (auto p : params) p.zero_grad();
  Tape tape;
  Tensor loss;
  {
    GradScope scope(tape);
    loss = loss_fn();
  }
  backward(loss, tape);
  std::vector<std::vector<double>> analytic;
  for (const auto& p : params) analytic.emplace_back(p.grad().begin(), p.grad().end());

  GradCheckResult result;
  NoGradScope no_grad;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i];
    auto data = p.mutable_data();
    for (std::size_t k = 0; k < data.size(); ++k) {
      const double saved = data[k];
      data[k] = saved + h;
      const double up = loss_fn().item();
      data[k] = saved - h;
      const double down = loss_fn().item();
      data[k] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[i][k];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      ++result.checked;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst = "param " + std::to_string(i) + "[" + std::to_string(k) + "] analytic " + std::to_string(a) +
                       " numeric " + std::to_string(numeric);
      }
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Plain row-major reference math, independent of the Tensor ops.

struct Mat {
  std::size_t r = 0, c = 0;
  std::vector<double> v;
  double& at(std::size_t i, std::size_t j) { return v[i * c + j]; }
  double at(std::size_t i, std::size_t j) const { return v[i * c + j]; }
};

inline Mat mat_of(const Tensor& t) {
  const std::size_t rows = t.rank() == 1 ? 1 : t.rows();
  return {rows, t.cols(), std::vector<double>(t.data().begin(), t.data().end())};
}

inline Mat mm(const Mat& a, const Mat& b) {
  Mat out{a.r, b.c, std::vector<double>(a.r * b.c, 0.0)};
  for (std::size_t i = 0; i < a.r; ++i)
    for (std::size_t j = 0; j < b.c; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.c; ++k) s += a.at(i, k) * b.at(k, j);
      out.at(i, j) = s;
    }
  return out;
}

inline Mat plus(const Mat& a, const Mat& b) {
  Mat out = a;
  for (std::size_t i = 0; i < a.v.size(); ++i) out.v[i] += b.v[i];
  return out;
}

inline Mat plus_row(const Mat& a, const Mat& row) {
  Mat out = a;
  for (std::size_t i = 0; i < a.r; ++i)
    for (std::size_t j = 0; j < a.c; ++j) out.at(i, j) += row.v[j];
  return out;
}

inline Mat ref_layer_norm(const Mat& x, const Mat& gain, const Mat& bias, double eps = 1e-5) {
  Mat out = x;
  for (std::size_t i = 0; i < x.r; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < x.c; ++j) mean += x.at(i, j);
    mean /= static_cast<double>(x.c);
    double var = 0.0;
    for (std::size_t j = 0; j < x.c; ++j) var += (x.at(i, j) - mean) * (x.at(i, j) - mean);
    var /= static_cast<double>(x.c);
    for (std::size_t j = 0; j < x.c; ++j) {
      out.at(i, j) = gain.v[j] * (x.at(i, j) - mean) / std::sqrt(var + eps) + bias.v[j];
    }
  }
  return out;
}

// allowed(i, j) == false excludes key j for query i.
inline Mat ref_attention(const Mat& q, const Mat& k, const Mat& v,
                         const std::function<bool(std::size_t, std::size_t)>& allowed) {
  Mat out{q.r, v.c, std::vector<double>(q.r * v.c, 0.0)};
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.c));
  for (std::size_t i = 0; i < q.r; ++i) {
    std::vector<double> w(k.r, 0.0);
    double mx = -INFINITY;
    for (std::size_t j = 0; j < k.r; ++j) {
      if (!allowed(i, j)) continue;
      double s = 0.0;
      for (std::size_t d = 0; d < q.c; ++d) s += q.at(i, d) * k.at(j, d);
      w[j] = s * scale;
      mx = std::max(mx, w[j]);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < k.r; ++j) {
      w[j] = allowed(i, j) ? std::exp(w[j] - mx) : 0.0;
      total += w[j];
    }
    for (std::size_t j = 0; j < k.r; ++j)
      for (std::size_t d = 0; d < v.c; ++d) out.at(i, d) += w[j] / total * v.at(j, d);
  }
  return out;
}

inline Mat ref_mha(const Mat& q, const Mat& k, const Mat& v, const AttentionWeights& w,
                   const std::function<bool(std::size_t, std::size_t)>& allowed) {
  Mat cat{q.r, 0, {}};
  std::vector<Mat> heads;
  for (std::size_t h = 0; h < w.heads; ++h) {
    heads.push_back(ref_attention(mm(q, mat_of(w.w_q[h])), mm(k, mat_of(w.w_k[h])), mm(v, mat_of(w.w_v[h])), allowed));
  }
  const std::size_t dk = heads.front().c;
  cat.c = dk * w.heads;
  cat.v.assign(cat.r * cat.c, 0.0);
  for (std::size_t h = 0; h < w.heads; ++h)
    for (std::size_t i = 0; i < q.r; ++i)
      for (std::size_t d = 0; d < dk; ++d) cat.at(i, h * dk + d) = heads[h].at(i, d);
  return mm(cat, mat_of(w.w_o));
}

inline Mat ref_fcn(const Mat& x, const FeedForwardWeights& w) {
  Mat hidden = plus_row(mm(x, mat_of(w.w1)), mat_of(w.b1));
  for (double& e : hidden.v) e = std::max(0.0, e);
  return plus_row(mm(hidden, mat_of(w.w2)), mat_of(w.b2));
}

inline const auto kAllowAll = [](std::size_t, std::size_t) { return true; };

inline Mat ref_encoder_layer(const Mat& z, const EncoderLayerWeights& w) {
  const Mat zn = ref_layer_norm(z, mat_of(w.attention_norm.gain), mat_of(w.attention_norm.bias));
  const Mat r = plus(z, ref_mha(zn, zn, zn, w.self_attention, kAllowAll));
  const Mat rn = ref_layer_norm(r, mat_of(w.feed_forward_norm.gain), mat_of(w.feed_forward_norm.bias));
  return plus(r, ref_fcn(rn, w.feed_forward));
}

inline Mat ref_decoder_layer(const Mat& g, const Mat& z, const DecoderLayerWeights& w, bool verbatim) {
  const Mat gn = ref_layer_norm(g, mat_of(w.self_attention_norm.gain), mat_of(w.self_attention_norm.bias));
  const Mat b = plus(g, ref_mha(gn, gn, gn, w.self_attention, [](std::size_t i, std::size_t j) { return j <= i; }));
  const Mat bn = ref_layer_norm(b, mat_of(w.cross_attention_norm.gain), mat_of(w.cross_attention_norm.bias));
  const Mat u = plus(verbatim ? g : b, ref_mha(bn, z, z, w.cross_attention, kAllowAll));
  const Mat un = ref_layer_norm(u, mat_of(w.feed_forward_norm.gain), mat_of(w.feed_forward_norm.bias));
  return plus(u, ref_fcn(un, w.feed_forward));
}

inline double max_abs_diff(const Mat& a, const Tensor& b) {
  double m = 0.0;
  const auto d = b.data();
  for (std::size_t i = 0; i < a.v.size(); ++i) m = std::max(m, std::abs(a.v[i] - d[i]));
  return m;
}

// Every LayerNorm and FCN bias gets random values so the oracles exercise them.
inline void randomize_layer(EncoderLayerWeights& w, std::uint64_t seed) {
  randomize(w.attention_norm.gain, seed + 1);
  randomize(w.attention_norm.bias, seed + 2);
  randomize(w.feed_forward_norm.gain, seed + 3);
  randomize(w.feed_forward_norm.bias, seed + 4);
  randomize(w.feed_forward.b1, seed + 5);
  randomize(w.feed_forward.b2, seed + 6);
}

inline void randomize_layer(DecoderLayerWeights& w, std::uint64_t seed) {
  randomize(w.self_attention_norm.gain, seed + 1);
  randomize(w.self_attention_norm.bias, seed + 2);
  randomize(w.cross_attention_norm.gain, seed + 3);
  randomize(w.cross_attention_norm.bias, seed + 4);
  randomize(w.feed_forward_norm.gain, seed + 5);
  randomize(w.feed_forward_norm.bias, seed + 6);
  randomize(w.feed_forward.b1, seed + 7);
  randomize(w.feed_forward.b2, seed + 8);
}

// Tri-modal model small enough for finite differences: speech 8, audio 4,
// visual 8, two heads, one layer, vocabulary 20.
inline ModelConfig toy_config(FusionMode fusion = FusionMode::kConcat,
                              ResidualMode residual = ResidualMode::kVerbatim) {
  ModelConfig c;
  c.modalities = {{"speech", 8, 1}, {"audio", 4, 1}, {"visual", 8, 1}};
  c.heads = 2;
  c.d_ff = 16;
  c.vocab_size = 20;
  c.dropout = 0.0;
  c.fusion = fusion;
  c.residual_mode = residual;
  c.max_caption_len = 10;
  return c;
}

// Speech tokens plus dense rows for every other modality.
inline std::vector<ModalityInput> toy_inputs(const ModelConfig& config, std::uint64_t seed,
                                             std::size_t length = 3) {
  Rng rng(seed);
  std::vector<ModalityInput> out;
  for (const auto& spec : config.modalities) {
    ModalityInput in;
    if (spec.takes_tokens()) {
      for (std::size_t i = 0; i < length; ++i) in.tokens.push_back(4 + rng.below(config.vocab_size - 4));
    } else {
      in.features = random_matrix(length + 1, spec.d_model, rng.next_u64());
    }
    out.push_back(std::move(in));
  }
  return out;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("mdvc_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace mdvc::testing
