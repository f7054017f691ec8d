#include "mdvc/dataset.hpp"

#include <algorithm>
#include <json.hpp>

#include "mdvc/binary_io.hpp"
#include "mdvc/error.hpp"
#include "mdvc/vocabulary.hpp"

namespace mdvc {

using nlohmann::json;

namespace {

constexpr double kTolerance = 1e-9;

void check_interval(const VideoRecord& v, double start, double end, const std::string& what) {
  if (start < -kTolerance || end > v.duration + kTolerance || end < start) {
    fail(ErrorCode::kRange, "video " + v.id + ": " + what + " [" + std::to_string(start) + ", " +
                                std::to_string(end) + "] outside [0, " + std::to_string(v.duration) + "]");
  }
}

}  // namespace

const VideoRecord* DatasetManifest::find(const std::string& id) const {
  auto it = std::find_if(videos.begin(), videos.end(), [&](const VideoRecord& v) { return v.id == id; });
  return it == videos.end() ? nullptr : &*it;
}

void DatasetManifest::validate() const {
  for (const auto& v : videos) {
    if (!(v.duration >= 0.0)) fail(ErrorCode::kRange, "video " + v.id + ": negative duration");
    for (const auto& s : v.speech) check_interval(v, s.start, s.end, "speech segment");
    for (const auto& a : v.annotations) check_interval(v, a.start, a.end, "annotation");
  }
}

std::string manifest_to_json(const DatasetManifest& manifest) {
  json videos = json::array();
  for (const auto& v : manifest.videos) {
    json features = json::object();
    for (const auto& [name, path] : v.feature_paths) {
      features[name] = path ? json(*path) : json(nullptr);
    }
    json speech = json::array();
    for (const auto& s : v.speech) speech.push_back({{"start", s.start}, {"end", s.end}, {"text", s.text}});
    json annotations = json::array();
    for (const auto& a : v.annotations) {
      annotations.push_back({{"start", a.start}, {"end", a.end}, {"caption", a.caption}});
    }
    videos.push_back({{"id", v.id},
                      {"duration", v.duration},
                      {"split", v.split},
                      {"features", features},
                      {"speech", speech},
                      {"annotations", annotations}});
  }
  return json{{"videos", videos}}.dump(1);
}

DatasetManifest manifest_from_json(const std::string& json_text, const std::filesystem::path& root) {
  DatasetManifest m;
  m.root = root;
  try {
    const json doc = json::parse(json_text);
    for (const auto& jv : doc.at("videos")) {
      VideoRecord v;
      v.id = jv.at("id").get<std::string>();
      v.duration = jv.at("duration").get<double>();
      v.split = jv.value("split", std::string("train"));
      if (jv.contains("features")) {
        for (const auto& [name, path] : jv.at("features").items()) {
          v.feature_paths[name] = path.is_null() ? std::nullopt : std::optional<std::string>(path.get<std::string>());
        }
      }
      for (const auto& js : jv.value("speech", json::array())) {
        v.speech.push_back({js.at("start").get<double>(), js.at("end").get<double>(), js.at("text").get<std::string>()});
      }
      for (const auto& ja : jv.value("annotations", json::array())) {
        v.annotations.push_back(
            {ja.at("start").get<double>(), ja.at("end").get<double>(), ja.at("caption").get<std::string>()});
      }
      m.videos.push_back(std::move(v));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("manifest: ") + e.what());
  }
  m.validate();
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  return manifest_from_json(read_file(path), path.parent_path());
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  write_file_atomic(path, manifest_to_json(manifest));
}

std::string strip_sound_tags(const std::string& text) {
  std::string out;
  int depth = 0;
  for (char c : text) {
    if (c == '[') {
      ++depth;
    } else if (c == ']' && depth > 0) {
      --depth;
      out.push_back(' ');
    } else if (depth == 0) {
      out.push_back(c);
    }
  }
  return out;
}

std::vector<std::string> select_speech(const std::vector<SpeechSegment>& segments, const Proposal& p) {
  std::vector<const SpeechSegment*> picked;
  for (const auto& s : segments) {
    if (s.end > p.start && s.start < p.end) picked.push_back(&s);
  }
  std::stable_sort(picked.begin(), picked.end(),
                   [](const SpeechSegment* a, const SpeechSegment* b) { return a->start < b->start; });
  std::vector<std::string> tokens;
  for (const auto* s : picked) {
    for (auto& tok : tokenize(strip_sound_tags(s->text))) tokens.push_back(std::move(tok));
  }
  return tokens;
}

}  // namespace mdvc
