#include "mdvc/training.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numeric>

#include "mdvc/error.hpp"
#include "mdvc/evaluation.hpp"
#include "mdvc/rng.hpp"

namespace mdvc {

using nlohmann::json;

TrainConfig TrainConfig::audio_only_preset() {
  TrainConfig c;
  c.learning_rate = 1e-4;
  c.smoothing = 0.2;
  return c;
}

void TrainConfig::validate() const {
  if (batch_size == 0) fail(ErrorCode::kConfig, "train: batch_size must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    fail(ErrorCode::kConfig, "train: learning_rate must be positive");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    fail(ErrorCode::kConfig, "train: Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) fail(ErrorCode::kConfig, "train: Adam epsilon must be positive");
  if (smoothing && !(*smoothing >= 0.0 && *smoothing < 1.0)) {
    fail(ErrorCode::kConfig, "train: smoothing must lie in [0, 1)");
  }
  if (max_epochs == 0) fail(ErrorCode::kConfig, "train: max_epochs must be positive");
  if (patience > max_epochs) fail(ErrorCode::kConfig, "train: patience exceeds max_epochs");
}

std::string TrainConfig::to_json() const {
  json j{{"batch_size", batch_size}, {"learning_rate", learning_rate}, {"beta1", beta1},
         {"beta2", beta2},           {"epsilon", epsilon},             {"max_epochs", max_epochs},
         {"patience", patience},     {"seed", seed}};
  j["smoothing"] = smoothing ? json(*smoothing) : json(nullptr);
  return j.dump();
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  TrainConfig c;
  try {
    const json j = json::parse(text);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    c.seed = j.value("seed", c.seed);
    if (j.contains("smoothing") && !j["smoothing"].is_null()) c.smoothing = j["smoothing"].get<double>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

Tensor smooth_labels(std::span<const std::size_t> target_ids, std::size_t vocab_size, double gamma) {
  if (vocab_size < 2) fail(ErrorCode::kConfig, "smooth_labels: vocabulary needs at least 2 entries");
  if (!(gamma >= 0.0 && gamma < 1.0)) fail(ErrorCode::kConfig, "smooth_labels: gamma must lie in [0, 1)");
  const double off = gamma / static_cast<double>(vocab_size - 1);
  std::vector<double> data(target_ids.size() * vocab_size, off);
  for (std::size_t i = 0; i < target_ids.size(); ++i) {
    if (target_ids[i] >= vocab_size) {
      fail(ErrorCode::kIndex, "smooth_labels: target id " + std::to_string(target_ids[i]) + " out of range");
    }
    data[i * vocab_size + target_ids[i]] = 1.0 - gamma;
  }
  return Tensor::matrix(target_ids.size(), vocab_size, std::move(data));
}

LossSum masked_kl_sum(const Tensor& predicted, const Tensor& targets, const std::vector<bool>& keep) {
  if (predicted.shape() != targets.shape() || predicted.rank() != 2) {
    fail(ErrorCode::kDimension, "masked_kl: predicted " + shape_str(predicted.shape()) + " vs targets " +
                                    shape_str(targets.shape()));
  }
  if (keep.size() != predicted.rows()) fail(ErrorCode::kDimension, "masked_kl: mask length mismatch");
  const std::size_t cols = predicted.cols();
  std::vector<double> kept(targets.numel(), 0.0);
  double entropy_term = 0.0;  // sum of t log t over kept rows
  std::size_t count = 0;
  const auto t = targets.data();
  for (std::size_t r = 0; r < keep.size(); ++r) {
    if (!keep[r]) continue;
    ++count;
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = t[r * cols + c];
      kept[r * cols + c] = v;
      if (v > 0.0) entropy_term += v * std::log(v);
    }
  }
  const Tensor weights = Tensor::matrix(predicted.rows(), cols, std::move(kept));
  const Tensor cross = sum(mul(weights, log_clamped(predicted)));
  return {add(Tensor::scalar(entropy_term), scale(cross, -1.0)), count};
}

Tensor masked_kl_loss(const Tensor& predicted, const Tensor& targets, const std::vector<bool>& keep) {
  LossSum s = masked_kl_sum(predicted, targets, keep);
  if (s.count == 0) fail(ErrorCode::kDegenerateMask, "masked_kl: every token is masked");
  return scale(s.total, 1.0 / static_cast<double>(s.count));
}

void adam_step(const std::vector<Tensor>& params, OptimizerState& state, const AdamConfig& config) {
  if (state.m.empty() && state.v.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.numel(), 0.0);
      state.v.emplace_back(p.numel(), 0.0);
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    fail(ErrorCode::kDimension, "adam: optimizer state does not match parameter list");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.m[i].size() != params[i].numel() || state.v[i].size() != params[i].numel()) {
      fail(ErrorCode::kDimension, "adam: moment buffer " + std::to_string(i) + " has the wrong size");
    }
    if (!params[i].has_grad()) continue;
    for (double g : params[i].grad()) {
      if (!std::isfinite(g)) fail(ErrorCode::kNumericFault, "adam: non-finite gradient; step aborted");
    }
  }
  ++state.step;
  const double b1t = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double b2t = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i];
    auto data = p.mutable_data();
    const bool has = p.has_grad();
    const auto grad = has ? p.grad() : std::span<const double>{};
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t k = 0; k < data.size(); ++k) {
      const double g = has ? grad[k] : 0.0;
      m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g;
      v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g * g;
      const double m_hat = m[k] / b1t;
      const double v_hat = v[k] / b2t;
      data[k] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

std::vector<std::size_t> Batch::decoder_input(std::size_t b) const {
  const auto& c = captions.at(b);
  return {c.begin(), c.end() - 1};
}

std::vector<std::size_t> Batch::targets(std::size_t b) const {
  const auto& c = captions.at(b);
  return {c.begin() + 1, c.end()};
}

std::vector<bool> Batch::target_mask(std::size_t b) const {
  const auto& m = caption_mask.at(b);
  return {m.begin() + 1, m.end()};
}

Batch pad_batch(std::span<const Sample> samples) {
  if (samples.empty()) fail(ErrorCode::kInvalidArgument, "pad_batch: empty batch");
  const std::size_t modalities = samples.front().inputs.size();
  std::size_t max_caption = 0;
  std::vector<std::size_t> max_len(modalities, 0);
  for (const auto& s : samples) {
    if (s.inputs.size() != modalities) fail(ErrorCode::kFusion, "pad_batch: samples disagree on modality count");
    if (s.caption.size() < 2) fail(ErrorCode::kContract, "pad_batch: sample " + s.video_id + " has no caption");
    max_caption = std::max(max_caption, s.caption.size());
    for (std::size_t m = 0; m < modalities; ++m) max_len[m] = std::max(max_len[m], s.inputs[m].length());
  }
  Batch batch;
  for (const auto& s : samples) {
    std::vector<ModalityInput> padded;
    std::vector<std::size_t> lengths;
    for (std::size_t m = 0; m < modalities; ++m) {
      ModalityInput in = s.inputs[m];
      const std::size_t len = in.length();
      lengths.push_back(len);
      const std::size_t extra = max_len[m] - len;
      if (in.padding.empty()) in.padding.assign(len, false);
      if (extra > 0) {
        if (in.features.defined()) {
          std::vector<double> data(in.features.data().begin(), in.features.data().end());
          data.resize(data.size() + extra * in.features.cols(), 0.0);
          in.features = Tensor::matrix(max_len[m], in.features.cols(), std::move(data));
        } else {
          in.tokens.resize(max_len[m], Vocabulary::kPad);
        }
        in.padding.resize(max_len[m], true);
      }
      if (std::none_of(in.padding.begin(), in.padding.end(), [](bool b) { return b; })) in.padding.clear();
      padded.push_back(std::move(in));
    }
    batch.inputs.push_back(std::move(padded));
    batch.input_lengths.push_back(std::move(lengths));
    std::vector<std::size_t> caption = s.caption;
    std::vector<bool> mask(caption.size(), true);
    caption.resize(max_caption, Vocabulary::kPad);
    mask.resize(max_caption, false);
    batch.caption_lengths.push_back(s.caption.size());
    batch.captions.push_back(std::move(caption));
    batch.caption_mask.push_back(std::move(mask));
  }
  return batch;
}

Tensor batch_loss(const MdvcModel& model, const Batch& batch, double gamma, const ForwardContext& ctx) {
  const std::size_t vocab = model.config().vocab_size;
  Tensor total;
  std::size_t count = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto prefix = batch.decoder_input(b);
    const auto targets = batch.targets(b);
    const Tensor predicted = model.forward(batch.inputs[b], prefix, ctx);
    LossSum s = masked_kl_sum(predicted, smooth_labels(targets, vocab, gamma), batch.target_mask(b));
    count += s.count;
    total = total.defined() ? add(total, s.total) : s.total;
  }
  if (count == 0) fail(ErrorCode::kDegenerateMask, "batch_loss: every target token is masked");
  return scale(total, 1.0 / static_cast<double>(count));
}

std::string EpochRecord::to_json() const {
  return json{{"epoch", epoch}, {"train_loss", train_loss}, {"val_score", val_score}}.dump();
}

std::vector<std::vector<std::string>> decode_samples(const MdvcModel& model, const Vocabulary& vocabulary,
                                                     const std::vector<Sample>& samples) {
  std::vector<std::vector<std::string>> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(vocabulary.decode_tokens(model.greedy_decode(s.inputs)));
  return out;
}

double corpus_bleu(const MdvcModel& model, const Vocabulary& vocabulary, const std::vector<Sample>& samples,
                   int max_n) {
  if (samples.empty()) fail(ErrorCode::kInvalidArgument, "corpus_bleu: no samples");
  std::vector<TokenList> refs;
  for (const auto& s : samples) refs.push_back(s.reference);
  return bleu(decode_samples(model, vocabulary, samples), refs, max_n);
}

double exact_match_rate(const MdvcModel& model, const std::vector<Sample>& samples) {
  if (samples.empty()) fail(ErrorCode::kInvalidArgument, "exact_match_rate: no samples");
  std::size_t hits = 0;
  for (const auto& s : samples) {
    if (model.greedy_decode(s.inputs) == s.caption) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

TrainResult train_loop(MdvcModel& model, const Vocabulary& vocabulary, const std::vector<Sample>& train,
                       const std::vector<Sample>& validation, const TrainConfig& config,
                       const TrainCallbacks& callbacks) {
  config.validate();
  if (train.empty()) fail(ErrorCode::kInvalidArgument, "train: empty training set");
  if (vocabulary.size() != model.config().vocab_size) {
    fail(ErrorCode::kConfig, "train: vocabulary size does not match the model");
  }
  const double gamma = config.smoothing.value_or(model.config().smoothing);
  const AdamConfig adam{config.learning_rate, config.beta1, config.beta2, config.epsilon};
  const std::vector<Tensor> params = model.parameters();
  OptimizerState state;
  Rng dropout_rng(mix_seed(config.seed, 0x64726f70ULL));

  TrainResult result;
  result.stop_reason = "max_epochs";
  auto best = model.snapshot();
  bool have_best = false;
  std::size_t since_best = 0;
  std::vector<std::size_t> order(train.size());

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle(mix_seed(config.seed, epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    try {
      for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
        const std::size_t end = std::min(order.size(), begin + config.batch_size);
        std::vector<Sample> chunk;
        for (std::size_t i = begin; i < end; ++i) chunk.push_back(train[order[i]]);
        const Batch batch = pad_batch(chunk);
        model.zero_grad();
        Tape tape;
        Tensor loss;
        {
          GradScope scope(tape);
          const ForwardContext ctx{Mode::kTrain, model.config().dropout, &dropout_rng};
          loss = batch_loss(model, batch, gamma, ctx);
        }
        backward(loss, tape);
        adam_step(params, state, adam);
        loss_sum += loss.item();
        ++batches;
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNumericFault) throw;
      if (have_best) model.restore(best);
      result.stop_reason = "diverged";
      return result;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(batches);
    record.val_score = validation.empty() ? -record.train_loss : corpus_bleu(model, vocabulary, validation, 4);
    result.history.push_back(record);
    if (callbacks.on_epoch) callbacks.on_epoch(record);

    if (!have_best || record.val_score > result.best_score) {
      have_best = true;
      result.best_score = record.val_score;
      result.best_epoch = epoch;
      best = model.snapshot();
      since_best = 0;
    } else {
      ++since_best;
    }
    if (since_best >= config.patience) {
      result.stop_reason = "patience";
      break;
    }
  }
  model.restore(best);
  return result;
}

}  // namespace mdvc
