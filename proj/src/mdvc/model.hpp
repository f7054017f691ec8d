#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mdvc/attention.hpp"
#include "mdvc/tensor.hpp"
#include "mdvc/transformer.hpp"

namespace mdvc {

enum class FusionMode { kConcat, kAverage };

// "speech" consumes token ids through its own text embedding; every other
// modality consumes dense feature rows of width d_model.
struct ModalitySpec {
  std::string name;
  std::size_t d_model = 0;
  std::size_t layers = 1;

  bool takes_tokens() const { return name == "speech"; }
};

struct ModelConfig {
  std::vector<ModalitySpec> modalities;
  std::size_t heads = 4;
  std::size_t d_ff = 2048;
  std::size_t vocab_size = 0;
  double smoothing = 0.7;
  double dropout = 0.1;
  ResidualMode residual_mode = ResidualMode::kVerbatim;
  FusionMode fusion = FusionMode::kConcat;
  std::size_t max_caption_len = 30;

  // speech 512, audio 128, visual 1024; four heads; inner width 2048; one layer.
  static ModelConfig full_scale(std::size_t vocab_size);

  void validate() const;
  std::size_t fused_width() const;
  std::size_t modality_index(const std::string& name) const;

  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
  std::uint64_t hash() const;
};

std::string fusion_name(FusionMode mode);
FusionMode parse_fusion(const std::string& name);
std::string residual_mode_name(ResidualMode mode);
ResidualMode parse_residual_mode(const std::string& name);

// One modality's input for one sample. Token modalities fill `tokens`;
// feature modalities (and substituted token modalities) fill `features`.
// padding[i] == true marks row i as padding; empty means no padding.
struct ModalityInput {
  std::vector<std::size_t> tokens;
  Tensor features;
  std::vector<bool> padding;
  bool substituted = false;

  std::size_t length() const { return features.defined() ? features.rows() : tokens.size(); }
};

struct ModalityWeights {
  std::string name;
  Tensor speech_embedding;   // vocab x d_model, token modalities only
  Tensor caption_embedding;  // vocab x d_model
  std::vector<EncoderLayerWeights> encoder;
  std::vector<DecoderLayerWeights> decoder;
  Tensor generator;  // d_model x vocab, average fusion only
};

// Two fully connected layers over the concatenated decoder states.
struct GeneratorWeights {
  Tensor w_f1;  // fused_width x vocab
  Tensor w_f2;  // vocab x vocab
};

// softmax(dropout(ReLU(concat(states) W_F1)) W_F2), one row per position.
Tensor generator_fuse_concat(const std::vector<Tensor>& decoder_states, const GeneratorWeights& weights,
                             const ForwardContext& ctx = {});

// Arithmetic mean of per-modality distributions.
Tensor generator_fuse_average(const std::vector<Tensor>& distributions);

class MdvcModel {
 public:
  static MdvcModel create(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const std::vector<ModalityWeights>& modalities() const { return modalities_; }
  const GeneratorWeights& generator() const { return generator_; }

  // Stable order; names are part of the checkpoint format.
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
  std::vector<Tensor> parameters() const;
  void zero_grad() const;
  std::size_t parameter_count() const;

  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& values);
  std::uint64_t weights_hash() const;

  Tensor encode_modality(std::size_t m, const ModalityInput& input, const ForwardContext& ctx = {}) const;
  // Decoder states g (prefix_len x d_model) for one modality.
  Tensor decode_modality(std::size_t m, std::span<const std::size_t> caption_prefix, const Tensor& memory,
                         const std::vector<bool>& memory_padding, const ForwardContext& ctx = {}) const;
  Tensor encode_decode_modality(std::size_t m, const ModalityInput& input,
                                std::span<const std::size_t> caption_prefix, const ForwardContext& ctx = {}) const;

  // Per-position next-word distributions (prefix_len x vocab) from the
  // decoder states of every modality, in config order.
  Tensor generate(const std::vector<Tensor>& decoder_states, const ForwardContext& ctx = {}) const;

  // Full teacher-forced pass: one input per configured modality.
  Tensor forward(const std::vector<ModalityInput>& inputs, std::span<const std::size_t> caption_prefix,
                 const ForwardContext& ctx = {}) const;

  // Starts from the start token and appends the most probable word (lowest id
  // on ties) until the end token or max_len generated tokens. Includes the
  // start token; includes the end token when reached.
  std::vector<std::size_t> greedy_decode(const std::vector<ModalityInput>& inputs, std::size_t max_len) const;
  std::vector<std::size_t> greedy_decode(const std::vector<ModalityInput>& inputs) const {
    return greedy_decode(inputs, config_.max_caption_len);
  }

 private:
  void check_inputs(const std::vector<ModalityInput>& inputs) const;

  ModelConfig config_;
  std::vector<ModalityWeights> modalities_;
  GeneratorWeights generator_;
};

// Index of the largest entry of row `row`; ties go to the lowest index.
std::size_t argmax_row(const Tensor& distributions, std::size_t row);

}  // namespace mdvc
