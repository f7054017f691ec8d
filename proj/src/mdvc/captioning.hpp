#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mdvc/dataset.hpp"
#include "mdvc/error.hpp"
#include "mdvc/model.hpp"
#include "mdvc/proposal.hpp"
#include "mdvc/samples.hpp"
#include "mdvc/vocabulary.hpp"

namespace mdvc {

struct CaptionFailure {
  ErrorCode code = ErrorCode::kInternal;
  std::string message;  // prefixed with the proposal index
};

struct CaptionResult {
  Proposal proposal;
  std::string caption;                    // empty on failure
  std::vector<std::string> substituted;   // modalities given random stand-ins
  std::optional<CaptionFailure> failure;
};

// One result per proposal, in order. A failing proposal records its error
// and the rest still run.
std::vector<CaptionResult> caption_proposals(const MdvcModel& model, const Vocabulary& vocabulary,
                                             const DatasetManifest& manifest, const VideoRecord& video,
                                             const std::vector<Proposal>& proposals, FeatureCache& cache,
                                             std::uint64_t seed = 0);

// {video_id: [{start, end, sentence, substituted[, error]}]} for every video
// named in `proposals`. Unknown videos raise kInvalidArgument.
std::string caption_submission(const MdvcModel& model, const Vocabulary& vocabulary,
                               const DatasetManifest& manifest,
                               const std::map<std::string, std::vector<Proposal>>& proposals,
                               std::uint64_t seed = 0, std::size_t* failures = nullptr);

}  // namespace mdvc
