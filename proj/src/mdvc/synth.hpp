#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mdvc/dataset.hpp"
#include "mdvc/features.hpp"

namespace mdvc {

// Synthetic three-slot captions "<subject> <action> <object>". The subject is
// spoken in the speech track, the action is an audio feature direction and
// the object is a visual feature direction, so each modality carries exactly
// one slot.
struct SynthConfig {
  std::uint64_t seed = 0;
  std::size_t train_videos = 1000;
  std::size_t val_videos = 250;
  std::size_t events_per_video = 2;
  std::size_t min_event_rows = 2;
  std::size_t max_event_rows = 4;
  std::size_t audio_dim = 8;
  std::size_t visual_dim = 16;
  double noise = 0.3;
  // Added along the slot's feature direction on every event row.
  double signal = 3.0;
  // Probability that a video's audio or visual file is left out.
  double missing_rate = 0.0;

  std::vector<std::string> subjects = {"a young man", "an old woman", "a small child", "the tall chef"};
  std::vector<std::string> actions = {"is slicing", "is washing", "is painting", "is throwing"};
  std::vector<std::string> objects = {"a red apple", "the wooden fence", "a blue bowl", "some fresh bread"};
  // Relative slot frequencies; empty means uniform.
  std::vector<double> subject_weights;
  std::vector<double> action_weights = {0.55, 0.15, 0.15, 0.15};
  std::vector<double> object_weights;

  void validate() const;
  std::string to_json() const;
  static SynthConfig from_json(const std::string& text);
};

struct SynthDataset {
  DatasetManifest manifest;
  std::map<std::string, FeatureRecord> features;  // relative path -> record
};

SynthDataset synth_build(const SynthConfig& config);

// Writes manifest.json and the feature files under `dir`; returns the
// manifest with its root set to `dir`.
DatasetManifest synth_generate(const SynthConfig& config, const std::filesystem::path& dir);

// Best achievable exact-match rate for a predictor that observes only the
// slots flagged in `visible` (subject, action, object), by enumerating the
// joint slot distribution.
double exact_match_ceiling(const SynthConfig& config, bool subject_visible, bool action_visible,
                           bool object_visible);

}  // namespace mdvc
