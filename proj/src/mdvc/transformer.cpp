#include "mdvc/transformer.hpp"

#include <cmath>
#include <string>

#include "mdvc/error.hpp"

namespace mdvc {

LayerNormWeights LayerNormWeights::identity(std::size_t width) {
  return {Tensor::parameter({width}, std::vector<double>(width, 1.0)),
          Tensor::parameter({width}, std::vector<double>(width, 0.0))};
}

FeedForwardWeights FeedForwardWeights::xavier(std::size_t d_model, std::size_t d_ff, Rng& rng) {
  if (d_ff <= d_model) {
    fail(ErrorCode::kConfig, "feed-forward: inner width " + std::to_string(d_ff) +
                                 " must exceed model width " + std::to_string(d_model));
  }
  FeedForwardWeights w;
  w.w1 = xavier_uniform(d_model, d_ff, rng);
  w.b1 = Tensor::parameter({d_ff}, std::vector<double>(d_ff, 0.0));
  w.w2 = xavier_uniform(d_ff, d_model, rng);
  w.b2 = Tensor::parameter({d_model}, std::vector<double>(d_model, 0.0));
  return w;
}

EncoderLayerWeights EncoderLayerWeights::xavier(std::size_t d_model, std::size_t heads, std::size_t d_ff,
                                                Rng& rng) {
  EncoderLayerWeights w;
  w.self_attention = AttentionWeights::xavier(d_model, heads, rng);
  w.attention_norm = LayerNormWeights::identity(d_model);
  w.feed_forward_norm = LayerNormWeights::identity(d_model);
  w.feed_forward = FeedForwardWeights::xavier(d_model, d_ff, rng);
  return w;
}

DecoderLayerWeights DecoderLayerWeights::xavier(std::size_t d_model, std::size_t heads, std::size_t d_ff,
                                                Rng& rng) {
  DecoderLayerWeights w;
  w.self_attention = AttentionWeights::xavier(d_model, heads, rng);
  w.cross_attention = AttentionWeights::xavier(d_model, heads, rng);
  w.self_attention_norm = LayerNormWeights::identity(d_model);
  w.cross_attention_norm = LayerNormWeights::identity(d_model);
  w.feed_forward_norm = LayerNormWeights::identity(d_model);
  w.feed_forward = FeedForwardWeights::xavier(d_model, d_ff, rng);
  return w;
}

Tensor ForwardContext::apply_dropout(const Tensor& x) const {
  if (mode == Mode::kEval || dropout == 0.0) return x;
  if (rng == nullptr) fail(ErrorCode::kContract, "dropout in train mode needs a random generator");
  return mdvc::dropout(x, dropout, mode, *rng);
}

Tensor positional_encoding(std::size_t num_positions, std::size_t d_model) {
  if (d_model == 0 || d_model % 2 != 0) {
    fail(ErrorCode::kParameter, "positional encoding: width must be even, got " + std::to_string(d_model));
  }
  std::vector<double> table(num_positions * d_model);
  for (std::size_t pos = 0; pos < num_positions; ++pos) {
    for (std::size_t i = 0; i < d_model; i += 2) {
      const double angle =
          static_cast<double>(pos) / std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d_model));
      table[pos * d_model + i] = std::sin(angle);
      table[pos * d_model + i + 1] = std::cos(angle);
    }
  }
  return Tensor::matrix(num_positions, d_model, std::move(table));
}

Tensor add_positional_encoding(const Tensor& x) {
  if (x.rank() != 2) fail(ErrorCode::kDimension, "positional encoding: expected a matrix, got " + shape_str(x.shape()));
  return add(x, positional_encoding(x.rows(), x.cols()));
}

Tensor embed_scaled(std::span<const std::size_t> ids, const Tensor& table) {
  const Tensor rows = embedding(table, ids);
  return scale(rows, std::sqrt(static_cast<double>(table.cols())));
}

Tensor fcn(const Tensor& x, const FeedForwardWeights& w) {
  return add(matmul(relu(add(matmul(x, w.w1), w.b1)), w.w2), w.b2);
}

Tensor encoder_layer(const Tensor& z, const EncoderLayerWeights& w, const AttentionMask* pad_mask,
                     const ForwardContext& ctx) {
  if (z.rank() != 2 || z.cols() != w.self_attention.d_model) {
    fail(ErrorCode::kDimension, "encoder layer: input " + shape_str(z.shape()) + " needs " +
                                    std::to_string(w.self_attention.d_model) + " columns");
  }
  const Tensor z_norm = layer_norm(z, w.attention_norm.gain, w.attention_norm.bias);
  const Tensor r = add(z, ctx.apply_dropout(multi_head_attention(z_norm, z_norm, z_norm, w.self_attention, pad_mask)));
  const Tensor r_norm = layer_norm(r, w.feed_forward_norm.gain, w.feed_forward_norm.bias);
  return add(r, ctx.apply_dropout(fcn(r_norm, w.feed_forward)));
}

Tensor decoder_layer(const Tensor& g, const Tensor& z_enc, const DecoderLayerWeights& w,
                     const AttentionMask* causal_mask, const AttentionMask* enc_pad_mask,
                     ResidualMode residual_mode, const ForwardContext& ctx) {
  const std::size_t d = w.self_attention.d_model;
  if (g.rank() != 2 || g.cols() != d || z_enc.rank() != 2 || z_enc.cols() != d) {
    fail(ErrorCode::kDimension, "decoder layer: inputs " + shape_str(g.shape()) + ", " + shape_str(z_enc.shape()) +
                                    " need " + std::to_string(d) + " columns");
  }
  const Tensor g_norm = layer_norm(g, w.self_attention_norm.gain, w.self_attention_norm.bias);
  const Tensor b =
      add(g, ctx.apply_dropout(multi_head_attention(g_norm, g_norm, g_norm, w.self_attention, causal_mask)));
  const Tensor b_norm = layer_norm(b, w.cross_attention_norm.gain, w.cross_attention_norm.bias);
  const Tensor& cross_residual = residual_mode == ResidualMode::kVerbatim ? g : b;
  const Tensor u = add(cross_residual,
                       ctx.apply_dropout(multi_head_attention(b_norm, z_enc, z_enc, w.cross_attention, enc_pad_mask)));
  const Tensor u_norm = layer_norm(u, w.feed_forward_norm.gain, w.feed_forward_norm.bias);
  return add(u, ctx.apply_dropout(fcn(u_norm, w.feed_forward)));
}

Tensor encoder_stack(const Tensor& x, const std::vector<EncoderLayerWeights>& layers,
                     const AttentionMask* pad_mask, const ForwardContext& ctx) {
  if (layers.empty()) fail(ErrorCode::kConfig, "encoder stack: needs at least one layer");
  Tensor z = x;
  for (const auto& layer : layers) z = encoder_layer(z, layer, pad_mask, ctx);
  return z;
}

Tensor decoder_stack(const Tensor& g, const Tensor& z_enc, const std::vector<DecoderLayerWeights>& layers,
                     const AttentionMask* causal_mask, const AttentionMask* enc_pad_mask,
                     ResidualMode residual_mode, const ForwardContext& ctx) {
  if (layers.empty()) fail(ErrorCode::kConfig, "decoder stack: needs at least one layer");
  Tensor out = g;
  for (const auto& layer : layers) {
    out = decoder_layer(out, z_enc, layer, causal_mask, enc_pad_mask, residual_mode, ctx);
  }
  return out;
}

}  // namespace mdvc
