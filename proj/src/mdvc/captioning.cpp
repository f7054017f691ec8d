#include "mdvc/captioning.hpp"

#include <json.hpp>

namespace mdvc {

using nlohmann::json;

std::vector<CaptionResult> caption_proposals(const MdvcModel& model, const Vocabulary& vocabulary,
                                             const DatasetManifest& manifest, const VideoRecord& video,
                                             const std::vector<Proposal>& proposals, FeatureCache& cache,
                                             std::uint64_t seed) {
  std::vector<CaptionResult> results;
  results.reserve(proposals.size());
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    CaptionResult r;
    r.proposal = proposals[i];
    const std::string prefix = "proposal " + std::to_string(i) + ": ";
    try {
      if (!r.proposal.valid()) fail(ErrorCode::kRange, "invalid interval");
      const auto inputs =
          prepare_inputs(model.config(), vocabulary, manifest, video, r.proposal, cache, seed, &r.substituted);
      r.caption = vocabulary.decode(model.greedy_decode(inputs));
    } catch (const Error& e) {
      r.failure = CaptionFailure{e.code(), prefix + e.what()};
    } catch (const std::exception& e) {
      r.failure = CaptionFailure{ErrorCode::kInternal, prefix + e.what()};
    }
    results.push_back(std::move(r));
  }
  return results;
}

std::string caption_submission(const MdvcModel& model, const Vocabulary& vocabulary,
                               const DatasetManifest& manifest,
                               const std::map<std::string, std::vector<Proposal>>& proposals, std::uint64_t seed,
                               std::size_t* failures) {
  FeatureCache cache;
  json doc = json::object();
  std::size_t failed = 0;
  for (const auto& [video_id, list] : proposals) {
    const VideoRecord* video = manifest.find(video_id);
    if (video == nullptr) fail(ErrorCode::kInvalidArgument, "caption: video " + video_id + " not in manifest");
    json events = json::array();
    for (const auto& r : caption_proposals(model, vocabulary, manifest, *video, list, cache, seed)) {
      json e{{"start", r.proposal.start},
             {"end", r.proposal.end},
             {"sentence", r.caption},
             {"substituted", r.substituted}};
      if (r.failure) {
        e["error"] = {{"code", std::string(error_code_name(r.failure->code))}, {"message", r.failure->message}};
        ++failed;
      }
      events.push_back(std::move(e));
    }
    doc[video_id] = std::move(events);
  }
  if (failures != nullptr) *failures = failed;
  return doc.dump(2);
}

}  // namespace mdvc
