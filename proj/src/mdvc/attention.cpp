#include "mdvc/attention.hpp"

#include <cmath>
#include <string>

#include "mdvc/error.hpp"

namespace mdvc {

namespace {

void check_matrix(const Tensor& t, std::size_t rows, std::size_t cols, const std::string& what) {
  if (!t.defined() || t.shape() != Shape{rows, cols}) {
    fail(ErrorCode::kConfig, "attention weights: " + what + " must be " + shape_str({rows, cols}) +
                                 ", got " + (t.defined() ? shape_str(t.shape()) : "undefined"));
  }
}

}  // namespace

AttentionWeights AttentionWeights::xavier(std::size_t d_model, std::size_t heads, Rng& rng) {
  if (heads == 0 || d_model % heads != 0) {
    fail(ErrorCode::kConfig, "attention: d_model " + std::to_string(d_model) +
                                 " is not a multiple of heads " + std::to_string(heads));
  }
  AttentionWeights w;
  w.d_model = d_model;
  w.heads = heads;
  const std::size_t dk = d_model / heads;
  for (std::size_t h = 0; h < heads; ++h) {
    w.w_q.push_back(xavier_uniform(d_model, dk, rng));
    w.w_k.push_back(xavier_uniform(d_model, dk, rng));
    w.w_v.push_back(xavier_uniform(d_model, dk, rng));
  }
  w.w_o = xavier_uniform(dk * heads, d_model, rng);
  return w;
}

void AttentionWeights::validate() const {
  if (heads == 0 || d_model % heads != 0) {
    fail(ErrorCode::kConfig, "attention: d_model " + std::to_string(d_model) +
                                 " is not a multiple of heads " + std::to_string(heads));
  }
  if (w_q.size() != heads || w_k.size() != heads || w_v.size() != heads) {
    fail(ErrorCode::kConfig, "attention: expected " + std::to_string(heads) + " projections per role");
  }
  const std::size_t dk = d_k();
  for (std::size_t h = 0; h < heads; ++h) {
    check_matrix(w_q[h], d_model, dk, "w_q[" + std::to_string(h) + "]");
    check_matrix(w_k[h], d_model, dk, "w_k[" + std::to_string(h) + "]");
    check_matrix(w_v[h], d_model, dk, "w_v[" + std::to_string(h) + "]");
  }
  check_matrix(w_o, dk * heads, d_model, "w_o");
}

AttentionMask build_masks(std::size_t query_len, std::size_t key_len, bool causal,
                          const std::vector<bool>& key_padding) {
  if (!key_padding.empty() && key_padding.size() != key_len) {
    fail(ErrorCode::kDimension, "build_masks: key_padding length " + std::to_string(key_padding.size()) +
                                    " != key length " + std::to_string(key_len));
  }
  AttentionMask m;
  m.rows = query_len;
  m.cols = key_len;
  m.mask.shape = {query_len, key_len};
  m.mask.keep.assign(query_len * key_len, 1);
  for (std::size_t i = 0; i < query_len; ++i) {
    for (std::size_t j = 0; j < key_len; ++j) {
      const bool pad = !key_padding.empty() && key_padding[j];
      const bool future = causal && j > i;
      if (pad || future) m.mask.keep[i * key_len + j] = 0;
    }
  }
  return m;
}

Tensor scaled_dot_product_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                    const AttentionMask* mask) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2) {
    fail(ErrorCode::kDimension, "attention: Q, K, V must be matrices, got " + shape_str(q.shape()) + ", " +
                                    shape_str(k.shape()) + ", " + shape_str(v.shape()));
  }
  if (k.rows() != v.rows()) {
    fail(ErrorCode::kDimension, "attention: K rows != V rows, " + shape_str(k.shape()) + " vs " +
                                    shape_str(v.shape()));
  }
  if (q.cols() != k.cols()) {
    fail(ErrorCode::kDimension, "attention: Q and K widths differ, " + shape_str(q.shape()) + " vs " +
                                    shape_str(k.shape()));
  }
  if (mask != nullptr && (mask->rows != q.rows() || mask->cols != k.rows())) {
    fail(ErrorCode::kDimension, "attention: mask " + shape_str(mask->mask.shape) + " does not fit " +
                                    std::to_string(q.rows()) + " queries x " + std::to_string(k.rows()) +
                                    " keys");
  }
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Tensor logits = scale(matmul(q, transpose(k)), inv_sqrt_dk);
  Tensor weights = softmax(logits, -1, mask != nullptr ? &mask->mask : nullptr);
  return matmul(weights, v);
}

Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const AttentionWeights& weights, const AttentionMask* mask) {
  for (const Tensor* t : {&q, &k, &v}) {
    if (t->rank() != 2 || t->cols() != weights.d_model) {
      fail(ErrorCode::kDimension, "multi_head_attention: input " + shape_str(t->shape()) + " needs " +
                                      std::to_string(weights.d_model) + " columns");
    }
  }
  std::vector<Tensor> heads;
  heads.reserve(weights.heads);
  for (std::size_t h = 0; h < weights.heads; ++h) {
    heads.push_back(scaled_dot_product_attention(matmul(q, weights.w_q[h]), matmul(k, weights.w_k[h]),
                                                 matmul(v, weights.w_v[h]), mask));
  }
  return matmul(heads.size() == 1 ? heads.front() : concat_last(heads), weights.w_o);
}

}  // namespace mdvc
