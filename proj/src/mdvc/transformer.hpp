#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mdvc/attention.hpp"
#include "mdvc/rng.hpp"
#include "mdvc/tensor.hpp"

namespace mdvc {

struct LayerNormWeights {
  Tensor gain;
  Tensor bias;

  static LayerNormWeights identity(std::size_t width);
};

// Position-wise network: ReLU(x W1 + b1) W2 + b2.
struct FeedForwardWeights {
  Tensor w1;  // d_model x d_ff
  Tensor b1;  // d_ff
  Tensor w2;  // d_ff x d_model
  Tensor b2;  // d_model

  // Requires d_ff > d_model.
  static FeedForwardWeights xavier(std::size_t d_model, std::size_t d_ff, Rng& rng);
};

struct EncoderLayerWeights {
  AttentionWeights self_attention;
  LayerNormWeights attention_norm;
  LayerNormWeights feed_forward_norm;
  FeedForwardWeights feed_forward;

  static EncoderLayerWeights xavier(std::size_t d_model, std::size_t heads, std::size_t d_ff, Rng& rng);
};

struct DecoderLayerWeights {
  AttentionWeights self_attention;
  AttentionWeights cross_attention;
  LayerNormWeights self_attention_norm;
  LayerNormWeights cross_attention_norm;
  LayerNormWeights feed_forward_norm;
  FeedForwardWeights feed_forward;

  static DecoderLayerWeights xavier(std::size_t d_model, std::size_t heads, std::size_t d_ff, Rng& rng);
};

// kVerbatim takes the encoder-decoder residual from the layer input g;
// kStandard takes it from the self-attention output b.
enum class ResidualMode { kVerbatim, kStandard };

// Dropout state threaded through a forward pass. rng may be null in eval
// mode or when dropout is zero.
struct ForwardContext {
  Mode mode = Mode::kEval;
  double dropout = 0.0;
  Rng* rng = nullptr;

  Tensor apply_dropout(const Tensor& x) const;
};

// Sinusoidal table, num_positions x d_model. d_model must be even.
Tensor positional_encoding(std::size_t num_positions, std::size_t d_model);

// Adds the positional table to a sequence (rows are positions).
Tensor add_positional_encoding(const Tensor& x);

// Row lookup scaled by sqrt(d_model).
Tensor embed_scaled(std::span<const std::size_t> ids, const Tensor& table);

Tensor fcn(const Tensor& x, const FeedForwardWeights& w);

Tensor encoder_layer(const Tensor& z, const EncoderLayerWeights& w, const AttentionMask* pad_mask,
                     const ForwardContext& ctx = {});

Tensor decoder_layer(const Tensor& g, const Tensor& z_enc, const DecoderLayerWeights& w,
                     const AttentionMask* causal_mask, const AttentionMask* enc_pad_mask,
                     ResidualMode residual_mode = ResidualMode::kVerbatim,
                     const ForwardContext& ctx = {});

Tensor encoder_stack(const Tensor& x, const std::vector<EncoderLayerWeights>& layers,
                     const AttentionMask* pad_mask, const ForwardContext& ctx = {});

Tensor decoder_stack(const Tensor& g, const Tensor& z_enc, const std::vector<DecoderLayerWeights>& layers,
                     const AttentionMask* causal_mask, const AttentionMask* enc_pad_mask,
                     ResidualMode residual_mode = ResidualMode::kVerbatim,
                     const ForwardContext& ctx = {});

}  // namespace mdvc
