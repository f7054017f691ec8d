#include "mdvc/model.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <json.hpp>
#include <set>

#include "mdvc/error.hpp"
#include "mdvc/rng.hpp"
#include "mdvc/vocabulary.hpp"

namespace mdvc {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

ModelConfig ModelConfig::full_scale(std::size_t vocab_size) {
  ModelConfig c;
  c.modalities = {{"speech", 512, 1}, {"audio", 128, 1}, {"visual", 1024, 1}};
  c.heads = 4;
  c.d_ff = 2048;
  c.vocab_size = vocab_size;
  return c;
}

void ModelConfig::validate() const {
  if (modalities.empty()) fail(ErrorCode::kConfig, "model: at least one modality is required");
  if (heads == 0) fail(ErrorCode::kConfig, "model: heads must be positive");
  std::set<std::string> names;
  std::size_t widest = 0;
  for (const auto& m : modalities) {
    if (m.name.empty()) fail(ErrorCode::kConfig, "model: modality name is empty");
    if (!names.insert(m.name).second) fail(ErrorCode::kConfig, "model: duplicate modality '" + m.name + "'");
    if (m.d_model == 0 || m.d_model % 2 != 0) {
      fail(ErrorCode::kConfig, "model: " + m.name + " width " + std::to_string(m.d_model) + " must be even and positive");
    }
    if (m.d_model % heads != 0) {
      fail(ErrorCode::kConfig, "model: " + m.name + " width " + std::to_string(m.d_model) +
                                   " is not a multiple of heads " + std::to_string(heads));
    }
    if (m.layers == 0) fail(ErrorCode::kConfig, "model: " + m.name + " needs at least one layer");
    widest = std::max(widest, m.d_model);
  }
  if (d_ff <= widest) {
    fail(ErrorCode::kConfig, "model: inner width " + std::to_string(d_ff) + " must exceed every modality width (" +
                                 std::to_string(widest) + ")");
  }
  if (vocab_size <= Vocabulary::kReserved) {
    fail(ErrorCode::kConfig, "model: vocabulary of " + std::to_string(vocab_size) + " holds no words");
  }
  if (!(smoothing >= 0.0 && smoothing < 1.0)) fail(ErrorCode::kConfig, "model: smoothing must lie in [0, 1)");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail(ErrorCode::kConfig, "model: dropout must lie in [0, 1)");
  if (max_caption_len == 0) fail(ErrorCode::kConfig, "model: max_caption_len must be positive");
}

std::size_t ModelConfig::fused_width() const {
  std::size_t total = 0;
  for (const auto& m : modalities) total += m.d_model;
  return total;
}

std::size_t ModelConfig::modality_index(const std::string& name) const {
  for (std::size_t i = 0; i < modalities.size(); ++i) {
    if (modalities[i].name == name) return i;
  }
  fail(ErrorCode::kConfig, "model: no modality named '" + name + "'");
}

std::string fusion_name(FusionMode mode) { return mode == FusionMode::kConcat ? "concat" : "average"; }

FusionMode parse_fusion(const std::string& name) {
  if (name == "concat") return FusionMode::kConcat;
  if (name == "average") return FusionMode::kAverage;
  fail(ErrorCode::kConfig, "unknown fusion mode '" + name + "' (expected concat or average)");
}

std::string residual_mode_name(ResidualMode mode) {
  return mode == ResidualMode::kVerbatim ? "verbatim" : "standard";
}

ResidualMode parse_residual_mode(const std::string& name) {
  if (name == "verbatim") return ResidualMode::kVerbatim;
  if (name == "standard") return ResidualMode::kStandard;
  fail(ErrorCode::kConfig, "unknown residual mode '" + name + "' (expected verbatim or standard)");
}

std::string ModelConfig::to_json() const {
  json mods = json::array();
  for (const auto& m : modalities) mods.push_back({{"name", m.name}, {"d_model", m.d_model}, {"layers", m.layers}});
  return json{{"modalities", mods},
              {"heads", heads},
              {"d_ff", d_ff},
              {"vocab_size", vocab_size},
              {"smoothing", smoothing},
              {"dropout", dropout},
              {"residual_mode", residual_mode_name(residual_mode)},
              {"fusion", fusion_name(fusion)},
              {"max_caption_len", max_caption_len}}
      .dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  ModelConfig c;
  try {
    const json j = json::parse(text);
    for (const auto& m : j.at("modalities")) {
      c.modalities.push_back(
          {m.at("name").get<std::string>(), m.at("d_model").get<std::size_t>(), m.value("layers", std::size_t{1})});
    }
    c.heads = j.at("heads").get<std::size_t>();
    c.d_ff = j.at("d_ff").get<std::size_t>();
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.smoothing = j.value("smoothing", 0.7);
    c.dropout = j.value("dropout", 0.1);
    c.residual_mode = parse_residual_mode(j.value("residual_mode", std::string("verbatim")));
    c.fusion = parse_fusion(j.value("fusion", std::string("concat")));
    c.max_caption_len = j.value("max_caption_len", std::size_t{30});
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

std::uint64_t ModelConfig::hash() const { return fnv1a(to_json()); }

// ---------------------------------------------------------------------------
// Generator fusion

Tensor generator_fuse_concat(const std::vector<Tensor>& decoder_states, const GeneratorWeights& weights,
                             const ForwardContext& ctx) {
  if (decoder_states.empty()) fail(ErrorCode::kFusion, "concat fusion: no decoder states");
  const Tensor fused = decoder_states.size() == 1 ? decoder_states.front() : concat_last(decoder_states);
  if (fused.cols() != weights.w_f1.rows()) {
    fail(ErrorCode::kFusion, "concat fusion: fused width " + std::to_string(fused.cols()) + " != generator input " +
                                 std::to_string(weights.w_f1.rows()));
  }
  const Tensor hidden = ctx.apply_dropout(relu(matmul(fused, weights.w_f1)));
  return softmax(matmul(hidden, weights.w_f2));
}

Tensor generator_fuse_average(const std::vector<Tensor>& distributions) {
  if (distributions.empty()) fail(ErrorCode::kFusion, "average fusion: no distributions");
  Tensor total = distributions.front();
  for (std::size_t i = 1; i < distributions.size(); ++i) {
    if (distributions[i].shape() != total.shape()) {
      fail(ErrorCode::kFusion, "average fusion: distribution " + shape_str(distributions[i].shape()) + " vs " +
                                   shape_str(distributions.front().shape()));
    }
    total = add(total, distributions[i]);
  }
  return distributions.size() == 1 ? total : scale(total, 1.0 / static_cast<double>(distributions.size()));
}

std::size_t argmax_row(const Tensor& distributions, std::size_t row) {
  const std::size_t width = distributions.cols();
  if (row >= distributions.rows()) fail(ErrorCode::kIndex, "argmax: row out of range");
  const auto data = distributions.data().subspan(row * width, width);
  std::size_t best = 0;
  for (std::size_t i = 1; i < width; ++i) {
    if (data[i] > data[best]) best = i;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Model

MdvcModel MdvcModel::create(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  MdvcModel model;
  model.config_ = config;
  Rng rng(seed);
  const std::size_t vocab = config.vocab_size;
  for (const auto& spec : config.modalities) {
    ModalityWeights w;
    w.name = spec.name;
    if (spec.takes_tokens()) w.speech_embedding = xavier_uniform(vocab, spec.d_model, rng);
    w.caption_embedding = xavier_uniform(vocab, spec.d_model, rng);
    for (std::size_t l = 0; l < spec.layers; ++l) {
      w.encoder.push_back(EncoderLayerWeights::xavier(spec.d_model, config.heads, config.d_ff, rng));
    }
    for (std::size_t l = 0; l < spec.layers; ++l) {
      w.decoder.push_back(DecoderLayerWeights::xavier(spec.d_model, config.heads, config.d_ff, rng));
    }
    if (config.fusion == FusionMode::kAverage) w.generator = xavier_uniform(spec.d_model, vocab, rng);
    model.modalities_.push_back(std::move(w));
  }
  if (config.fusion == FusionMode::kConcat) {
    model.generator_.w_f1 = xavier_uniform(config.fused_width(), vocab, rng);
    model.generator_.w_f2 = xavier_uniform(vocab, vocab, rng);
  }
  return model;
}

namespace {

void push_attention(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix,
                    const AttentionWeights& w) {
  for (std::size_t h = 0; h < w.heads; ++h) {
    const std::string head = std::to_string(h);
    out.emplace_back(prefix + ".q." + head, w.w_q[h]);
    out.emplace_back(prefix + ".k." + head, w.w_k[h]);
    out.emplace_back(prefix + ".v." + head, w.w_v[h]);
  }
  out.emplace_back(prefix + ".o", w.w_o);
}

void push_norm(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix,
               const LayerNormWeights& w) {
  out.emplace_back(prefix + ".gain", w.gain);
  out.emplace_back(prefix + ".bias", w.bias);
}

void push_ff(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix,
             const FeedForwardWeights& w) {
  out.emplace_back(prefix + ".w1", w.w1);
  out.emplace_back(prefix + ".b1", w.b1);
  out.emplace_back(prefix + ".w2", w.w2);
  out.emplace_back(prefix + ".b2", w.b2);
}

}  // namespace

std::vector<std::pair<std::string, Tensor>> MdvcModel::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (const auto& m : modalities_) {
    if (m.speech_embedding.defined()) out.emplace_back(m.name + ".speech_embedding", m.speech_embedding);
    out.emplace_back(m.name + ".caption_embedding", m.caption_embedding);
    for (std::size_t l = 0; l < m.encoder.size(); ++l) {
      const std::string p = m.name + ".encoder." + std::to_string(l);
      push_attention(out, p + ".self_attention", m.encoder[l].self_attention);
      push_norm(out, p + ".attention_norm", m.encoder[l].attention_norm);
      push_norm(out, p + ".feed_forward_norm", m.encoder[l].feed_forward_norm);
      push_ff(out, p + ".feed_forward", m.encoder[l].feed_forward);
    }
    for (std::size_t l = 0; l < m.decoder.size(); ++l) {
      const std::string p = m.name + ".decoder." + std::to_string(l);
      push_attention(out, p + ".self_attention", m.decoder[l].self_attention);
      push_attention(out, p + ".cross_attention", m.decoder[l].cross_attention);
      push_norm(out, p + ".self_attention_norm", m.decoder[l].self_attention_norm);
      push_norm(out, p + ".cross_attention_norm", m.decoder[l].cross_attention_norm);
      push_norm(out, p + ".feed_forward_norm", m.decoder[l].feed_forward_norm);
      push_ff(out, p + ".feed_forward", m.decoder[l].feed_forward);
    }
    if (m.generator.defined()) out.emplace_back(m.name + ".generator", m.generator);
  }
  if (generator_.w_f1.defined()) {
    out.emplace_back("generator.w_f1", generator_.w_f1);
    out.emplace_back("generator.w_f2", generator_.w_f2);
  }
  return out;
}

std::vector<Tensor> MdvcModel::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

void MdvcModel::zero_grad() const {
  for (auto& [name, t] : named_parameters()) {
    Tensor handle = t;
    handle.zero_grad();
  }
}

std::size_t MdvcModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : named_parameters()) n += t.numel();
  return n;
}

std::vector<std::vector<double>> MdvcModel::snapshot() const {
  std::vector<std::vector<double>> out;
  for (const auto& [name, t] : named_parameters()) out.emplace_back(t.data().begin(), t.data().end());
  return out;
}

void MdvcModel::restore(const std::vector<std::vector<double>>& values) {
  auto params = named_parameters();
  if (values.size() != params.size()) fail(ErrorCode::kCheckpoint, "restore: parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = params[i].second.mutable_data();
    if (dst.size() != values[i].size()) fail(ErrorCode::kCheckpoint, "restore: size mismatch for " + params[i].first);
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

std::uint64_t MdvcModel::weights_hash() const {
  std::uint64_t h = fnv1a(config_.to_json());
  for (const auto& [name, t] : named_parameters()) {
    h = fnv1a(name, h);
    const auto data = t.data();
    h = fnv1a(std::string_view(reinterpret_cast<const char*>(data.data()), data.size() * sizeof(double)), h);
  }
  return h;
}

Tensor MdvcModel::encode_modality(std::size_t m, const ModalityInput& input, const ForwardContext& ctx) const {
  const ModalitySpec& spec = config_.modalities.at(m);
  const ModalityWeights& w = modalities_.at(m);
  Tensor x;
  if (input.features.defined()) {
    if (input.features.rank() != 2 || input.features.cols() != spec.d_model) {
      fail(ErrorCode::kDimension, "modality " + spec.name + ": features " + shape_str(input.features.shape()) +
                                      " need " + std::to_string(spec.d_model) + " columns");
    }
    x = input.features;
  } else if (spec.takes_tokens()) {
    x = embed_scaled(input.tokens, w.speech_embedding);
  } else {
    fail(ErrorCode::kDimension, "modality " + spec.name + ": feature input required");
  }
  if (x.rows() == 0) fail(ErrorCode::kRange, "modality " + spec.name + ": empty input sequence");
  if (!input.padding.empty() && input.padding.size() != x.rows()) {
    fail(ErrorCode::kDimension, "modality " + spec.name + ": padding flags do not match sequence length");
  }
  x = ctx.apply_dropout(add_positional_encoding(x));
  if (input.padding.empty()) return encoder_stack(x, w.encoder, nullptr, ctx);
  const AttentionMask mask = build_masks(x.rows(), x.rows(), false, input.padding);
  return encoder_stack(x, w.encoder, &mask, ctx);
}

Tensor MdvcModel::decode_modality(std::size_t m, std::span<const std::size_t> caption_prefix, const Tensor& memory,
                                  const std::vector<bool>& memory_padding, const ForwardContext& ctx) const {
  const ModalityWeights& w = modalities_.at(m);
  if (caption_prefix.empty() || caption_prefix.front() != Vocabulary::kStart) {
    fail(ErrorCode::kContract, "decoder: caption prefix must begin with the start token");
  }
  const std::size_t t = caption_prefix.size();
  const Tensor g = ctx.apply_dropout(add_positional_encoding(embed_scaled(caption_prefix, w.caption_embedding)));
  const AttentionMask causal = build_masks(t, t, true);
  if (memory_padding.empty()) {
    return decoder_stack(g, memory, w.decoder, &causal, nullptr, config_.residual_mode, ctx);
  }
  const AttentionMask enc_mask = build_masks(t, memory.rows(), false, memory_padding);
  return decoder_stack(g, memory, w.decoder, &causal, &enc_mask, config_.residual_mode, ctx);
}

Tensor MdvcModel::encode_decode_modality(std::size_t m, const ModalityInput& input,
                                         std::span<const std::size_t> caption_prefix,
                                         const ForwardContext& ctx) const {
  return decode_modality(m, caption_prefix, encode_modality(m, input, ctx), input.padding, ctx);
}

Tensor MdvcModel::generate(const std::vector<Tensor>& decoder_states, const ForwardContext& ctx) const {
  if (decoder_states.size() != modalities_.size()) {
    fail(ErrorCode::kFusion, "generator: expected " + std::to_string(modalities_.size()) + " decoder outputs, got " +
                                 std::to_string(decoder_states.size()));
  }
  if (config_.fusion == FusionMode::kConcat) return generator_fuse_concat(decoder_states, generator_, ctx);
  std::vector<Tensor> distributions;
  for (std::size_t m = 0; m < modalities_.size(); ++m) {
    distributions.push_back(softmax(matmul(decoder_states[m], modalities_[m].generator)));
  }
  return generator_fuse_average(distributions);
}

void MdvcModel::check_inputs(const std::vector<ModalityInput>& inputs) const {
  if (inputs.size() != modalities_.size()) {
    fail(ErrorCode::kFusion, "model: expected " + std::to_string(modalities_.size()) + " modality inputs, got " +
                                 std::to_string(inputs.size()));
  }
}

Tensor MdvcModel::forward(const std::vector<ModalityInput>& inputs, std::span<const std::size_t> caption_prefix,
                          const ForwardContext& ctx) const {
  check_inputs(inputs);
  std::vector<Tensor> states;
  states.reserve(inputs.size());
  for (std::size_t m = 0; m < inputs.size(); ++m) {
    states.push_back(encode_decode_modality(m, inputs[m], caption_prefix, ctx));
  }
  return generate(states, ctx);
}

std::vector<std::size_t> MdvcModel::greedy_decode(const std::vector<ModalityInput>& inputs,
                                                  std::size_t max_len) const {
  check_inputs(inputs);
  NoGradScope no_grad;
  const ForwardContext eval{};
  std::vector<Tensor> memories;
  for (std::size_t m = 0; m < inputs.size(); ++m) memories.push_back(encode_modality(m, inputs[m], eval));
  std::vector<std::size_t> sequence{Vocabulary::kStart};
  for (std::size_t step = 0; step < max_len; ++step) {
    const std::size_t t = sequence.size();
    std::vector<Tensor> last;
    for (std::size_t m = 0; m < inputs.size(); ++m) {
      last.push_back(slice_rows(decode_modality(m, sequence, memories[m], inputs[m].padding, eval), t - 1, t));
    }
    const std::size_t next = argmax_row(generate(last, eval), 0);
    sequence.push_back(next);
    if (next == Vocabulary::kEnd) break;
  }
  return sequence;
}

}  // namespace mdvc
