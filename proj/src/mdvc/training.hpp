#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mdvc/model.hpp"
#include "mdvc/samples.hpp"
#include "mdvc/tensor.hpp"
#include "mdvc/vocabulary.hpp"

namespace mdvc {

struct TrainConfig {
  std::size_t batch_size = 28;
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-8;
  // Falls back to the model config's smoothing when unset.
  std::optional<double> smoothing;
  std::size_t max_epochs = 200;
  std::size_t patience = 50;
  std::uint64_t seed = 0;

  // lr 1e-4, smoothing 0.2; pair with two-layer modality stacks.
  static TrainConfig audio_only_preset();

  void validate() const;
  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
};

// One row per target: 1 - gamma at the target id, gamma / (vocab - 1) elsewhere.
Tensor smooth_labels(std::span<const std::size_t> target_ids, std::size_t vocab_size, double gamma);

// Sum over kept rows of KL(target || predicted), with the count of kept rows.
struct LossSum {
  Tensor total;
  std::size_t count = 0;
};
LossSum masked_kl_sum(const Tensor& predicted, const Tensor& targets, const std::vector<bool>& keep);

// Mean KL over rows where keep[i] is true. Raises kDegenerateMask if none are.
Tensor masked_kl_loss(const Tensor& predicted, const Tensor& targets, const std::vector<bool>& keep);

struct OptimizerState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t step = 0;
};

struct AdamConfig {
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-8;
};

// Reads gradients from params (missing gradients count as zero). Any
// non-finite gradient aborts the step with kNumericFault before anything
// is modified.
void adam_step(const std::vector<Tensor>& params, OptimizerState& state, const AdamConfig& config);

struct Batch {
  std::vector<std::vector<ModalityInput>> inputs;   // [sample][modality]
  std::vector<std::vector<std::size_t>> captions;   // padded <s> ... </s> <pad>...
  std::vector<std::vector<bool>> caption_mask;      // true = real token
  std::vector<std::size_t> caption_lengths;
  std::vector<std::vector<std::size_t>> input_lengths;  // [sample][modality]

  std::size_t size() const { return captions.size(); }
  // captions[b] without its last position, fed to the decoder.
  std::vector<std::size_t> decoder_input(std::size_t b) const;
  // captions[b] shifted left by one, and the matching keep mask.
  std::vector<std::size_t> targets(std::size_t b) const;
  std::vector<bool> target_mask(std::size_t b) const;
};

// Zero feature rows and pad tokens up to the batch maximum per modality and
// for captions; padding flags are set on every padded input.
Batch pad_batch(std::span<const Sample> samples);

// Mean masked KL over every real target token of the batch.
Tensor batch_loss(const MdvcModel& model, const Batch& batch, double gamma, const ForwardContext& ctx = {});

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_score = 0.0;

  std::string to_json() const;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_score = 0.0;
  std::string stop_reason;  // "patience", "max_epochs" or "diverged"
};

struct TrainCallbacks {
  std::function<void(const EpochRecord&)> on_epoch;
};

// Teacher-forced training with seeded shuffling and dropout. The validation
// score is corpus BLEU@4 of greedy captions on `validation`, or the negated
// training loss when `validation` is empty. Stops once `patience` epochs pass
// without improvement or at max_epochs. The model is left holding the
// best-scoring weights. A numeric fault ends training with stop_reason
// "diverged" and the best weights seen so far.
TrainResult train_loop(MdvcModel& model, const Vocabulary& vocabulary, const std::vector<Sample>& train,
                       const std::vector<Sample>& validation, const TrainConfig& config,
                       const TrainCallbacks& callbacks = {});

// Greedy captions for each sample as word tokens.
std::vector<std::vector<std::string>> decode_samples(const MdvcModel& model, const Vocabulary& vocabulary,
                                                     const std::vector<Sample>& samples);

// Corpus BLEU@max_n of greedy captions against the sample references.
double corpus_bleu(const MdvcModel& model, const Vocabulary& vocabulary, const std::vector<Sample>& samples,
                   int max_n = 4);

// Fraction of samples whose greedy caption equals the reference exactly.
double exact_match_rate(const MdvcModel& model, const std::vector<Sample>& samples);

}  // namespace mdvc
