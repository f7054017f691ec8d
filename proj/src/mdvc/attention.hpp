#pragma once

#include <cstddef>
#include <vector>

#include "mdvc/rng.hpp"
#include "mdvc/tensor.hpp"

namespace mdvc {

// Per-head query/key/value projections (d_model x d_k each) and the output
// projection (d_k * heads x d_model). No projection biases.
struct AttentionWeights {
  std::size_t d_model = 0;
  std::size_t heads = 0;
  std::vector<Tensor> w_q;
  std::vector<Tensor> w_k;
  std::vector<Tensor> w_v;
  Tensor w_o;

  std::size_t d_k() const { return d_model / heads; }

  static AttentionWeights xavier(std::size_t d_model, std::size_t heads, Rng& rng);
  // Checks every dimension invariant; throws a config error on violation.
  void validate() const;
};

// Rows are query positions, columns key positions; true = may attend.
struct AttentionMask {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Mask mask;

  bool allowed(std::size_t query, std::size_t key) const {
    return mask.keep[query * cols + key] != 0;
  }
};

// key_padding[j] == true marks key j as padding. An empty key_padding means
// no padding.
AttentionMask build_masks(std::size_t query_len, std::size_t key_len, bool causal,
                          const std::vector<bool>& key_padding = {});

// softmax(Q K^T / sqrt(d_k), mask) V.
Tensor scaled_dot_product_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                    const AttentionMask* mask = nullptr);

Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const AttentionWeights& weights, const AttentionMask* mask = nullptr);

}  // namespace mdvc
