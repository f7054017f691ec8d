#include "mdvc/samples.hpp"

#include <cmath>

#include "mdvc/error.hpp"
#include "mdvc/rng.hpp"

namespace mdvc {

std::shared_ptr<const FeatureRecord> FeatureCache::get(const std::filesystem::path& path) {
  const std::string key = path.string();
  {
    std::lock_guard lock(mutex_);
    auto it = records_.find(key);
    if (it != records_.end()) return it->second;
  }
  auto record = std::make_shared<const FeatureRecord>(read_feature_record(path));
  std::lock_guard lock(mutex_);
  return records_.emplace(key, std::move(record)).first->second;
}

std::uint64_t substitution_seed(std::uint64_t seed, const std::string& video_id, const std::string& modality,
                                const Proposal& p) {
  const std::string key = video_id + "/" + modality + "/" + std::to_string(p.start) + "/" + std::to_string(p.end);
  return mix_seed(seed, fnv1a(key));
}

std::vector<ModalityInput> prepare_inputs(const ModelConfig& config, const Vocabulary& vocabulary,
                                          const DatasetManifest& manifest, const VideoRecord& video,
                                          const Proposal& proposal, FeatureCache& cache, std::uint64_t seed,
                                          std::vector<std::string>* substituted) {
  const auto stand_in_rows = static_cast<std::size_t>(
      std::max(1.0, std::ceil(proposal.duration() / kDefaultFeatureStep - 1e-9)));
  std::vector<ModalityInput> inputs;
  for (const auto& spec : config.modalities) {
    ModalityInput in;
    if (spec.takes_tokens()) {
      const auto words = select_speech(video.speech, proposal);
      if (!words.empty()) in.tokens = vocabulary.encode_tokens(words);
    } else {
      auto it = video.feature_paths.find(spec.name);
      if (it != video.feature_paths.end() && it->second) {
        const auto record = cache.get(manifest.resolve(*it->second));
        if (record->cols != spec.d_model) {
          fail(ErrorCode::kDimension, "video " + video.id + ": " + spec.name + " features have " +
                                          std::to_string(record->cols) + " columns, model expects " +
                                          std::to_string(spec.d_model));
        }
        in.features = slice_features(*record, proposal);
      }
    }
    if (in.length() == 0) {
      in.tokens.clear();
      in.features = random_features(stand_in_rows, spec.d_model, substitution_seed(seed, video.id, spec.name, proposal));
      in.substituted = true;
      if (substituted != nullptr) substituted->push_back(spec.name);
    }
    inputs.push_back(std::move(in));
  }
  return inputs;
}

std::vector<Sample> build_samples(const ModelConfig& config, const Vocabulary& vocabulary,
                                  const DatasetManifest& manifest, const std::string& split, FeatureCache& cache,
                                  std::uint64_t seed) {
  std::vector<Sample> samples;
  for (const auto& video : manifest.videos) {
    if (!split.empty() && video.split != split) continue;
    for (const auto& ann : video.annotations) {
      Sample s;
      s.video_id = video.id;
      s.proposal = ann.proposal();
      s.inputs = prepare_inputs(config, vocabulary, manifest, video, s.proposal, cache, seed, &s.substituted);
      s.reference = tokenize(ann.caption);
      s.caption.push_back(Vocabulary::kStart);
      for (std::size_t id : vocabulary.encode_tokens(s.reference)) s.caption.push_back(id);
      s.caption.push_back(Vocabulary::kEnd);
      samples.push_back(std::move(s));
    }
  }
  return samples;
}

std::vector<std::string> text_corpus(const DatasetManifest& manifest, const std::string& split) {
  std::vector<std::string> corpus;
  for (const auto& video : manifest.videos) {
    if (!split.empty() && video.split != split) continue;
    for (const auto& a : video.annotations) corpus.push_back(a.caption);
    for (const auto& s : video.speech) corpus.push_back(strip_sound_tags(s.text));
  }
  return corpus;
}

}  // namespace mdvc
