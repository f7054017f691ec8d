#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "mdvc/dataset.hpp"
#include "mdvc/features.hpp"
#include "mdvc/model.hpp"
#include "mdvc/vocabulary.hpp"

namespace mdvc {

// Loads each feature file once; safe for concurrent readers.
class FeatureCache {
 public:
  std::shared_ptr<const FeatureRecord> get(const std::filesystem::path& path);

 private:
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const FeatureRecord>> records_;
};

// One captioning example: model inputs for a proposal plus, for annotated
// events, the reference caption.
struct Sample {
  std::string video_id;
  Proposal proposal;
  std::vector<ModalityInput> inputs;        // config modality order
  std::vector<std::size_t> caption;         // <s> words </s>; empty when unannotated
  std::vector<std::string> reference;       // normalized caption tokens
  std::vector<std::string> substituted;     // modalities replaced by random features
};

// Seed for the random stand-in of `modality` on one proposal.
std::uint64_t substitution_seed(std::uint64_t seed, const std::string& video_id, const std::string& modality,
                                const Proposal& p);

// Missing feature files and empty speech selections are replaced by seeded
// standard-normal features of the modality's width.
std::vector<ModalityInput> prepare_inputs(const ModelConfig& config, const Vocabulary& vocabulary,
                                          const DatasetManifest& manifest, const VideoRecord& video,
                                          const Proposal& proposal, FeatureCache& cache, std::uint64_t seed,
                                          std::vector<std::string>* substituted = nullptr);

// Every annotation of every video whose split matches (empty split = all).
std::vector<Sample> build_samples(const ModelConfig& config, const Vocabulary& vocabulary,
                                  const DatasetManifest& manifest, const std::string& split, FeatureCache& cache,
                                  std::uint64_t seed);

// Captions and speech text of the given split, for vocabulary building.
std::vector<std::string> text_corpus(const DatasetManifest& manifest, const std::string& split);

}  // namespace mdvc
