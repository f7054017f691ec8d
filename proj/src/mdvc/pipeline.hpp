#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mdvc/dataset.hpp"
#include "mdvc/model.hpp"
#include "mdvc/training.hpp"
#include "mdvc/vocabulary.hpp"

namespace mdvc {

// Everything a training run needs besides the data. A preset supplies the
// defaults and any key present in the JSON overrides it:
//   "paper"       speech width 512, 4 heads, inner width 2048, lr 1e-5
//   "paper-audio" as "paper" with lr 1e-4, smoothing 0.2, two layers
//   "desk"        speech width 16, 2 heads, inner width 32, lr 3e-3
// Feature modality widths default to the column count of the data.
struct RunSettings {
  std::string preset = "paper";
  std::uint64_t seed = 0;
  std::size_t min_freq = 1;
  std::vector<std::string> modalities = {"speech", "audio", "visual"};
  std::map<std::string, std::size_t> widths;
  std::size_t layers = 1;
  std::size_t heads = 4;
  std::size_t d_ff = 2048;
  double dropout = 0.1;
  double smoothing = 0.7;
  ResidualMode residual_mode = ResidualMode::kVerbatim;
  FusionMode fusion = FusionMode::kConcat;
  std::size_t max_caption_len = 30;
  TrainConfig train;

  static RunSettings preset_defaults(const std::string& name);
  static RunSettings from_json(const std::string& text);
  std::string to_json() const;
};

ModelConfig resolve_model_config(const RunSettings& settings, const DatasetManifest& manifest,
                                 std::size_t vocab_size);

struct TrainingRun {
  Vocabulary vocabulary;
  MdvcModel model;
  TrainResult result;
  double val_bleu4 = 0.0;
  double val_exact_match = 0.0;
  std::size_t train_samples = 0;
  std::size_t val_samples = 0;

  std::string summary_json() const;
};

// Vocabulary from the "train" split, samples from "train" and "val", then
// train_loop. Validation metrics are computed on the returned best weights.
TrainingRun run_training(const RunSettings& settings, const DatasetManifest& manifest,
                         const TrainCallbacks& callbacks = {});

// checkpoint.mdvc, history.jsonl and summary.json under `dir`.
void write_training_outputs(const TrainingRun& run, const std::filesystem::path& dir);

}  // namespace mdvc
