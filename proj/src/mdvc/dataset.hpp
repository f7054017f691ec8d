#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mdvc/proposal.hpp"

namespace mdvc {

struct SpeechSegment {
  double start = 0.0;
  double end = 0.0;
  std::string text;
};

struct Annotation {
  double start = 0.0;
  double end = 0.0;
  std::string caption;

  Proposal proposal() const { return {start, end, 1.0}; }
};

struct VideoRecord {
  std::string id;
  double duration = 0.0;
  // Modality name -> feature file path relative to the manifest directory;
  // nullopt marks a missing modality.
  std::map<std::string, std::optional<std::string>> feature_paths;
  std::vector<SpeechSegment> speech;
  std::vector<Annotation> annotations;
  std::string split;
};

// JSON layout:
// {"videos": [{"id", "duration", "split",
//              "features": {"audio": "path" | null, "visual": ...},
//              "speech": [{"start", "end", "text"}],
//              "annotations": [{"start", "end", "caption"}]}]}
struct DatasetManifest {
  std::vector<VideoRecord> videos;
  std::filesystem::path root;  // directory feature paths are resolved against

  std::filesystem::path resolve(const std::string& relative) const { return root / relative; }
  const VideoRecord* find(const std::string& id) const;
  // Throws a range error if any interval leaves [0, duration].
  void validate() const;
};

DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
std::string manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const std::string& json_text, const std::filesystem::path& root);

// Removes bracketed sound tags such as "[Applause]".
std::string strip_sound_tags(const std::string& text);

// Tokens of every segment that ends after the proposal start and starts
// before the proposal end, in time order.
std::vector<std::string> select_speech(const std::vector<SpeechSegment>& segments, const Proposal& p);

}  // namespace mdvc
