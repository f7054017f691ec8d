#include "mdvc/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <json.hpp>
#include <numeric>
#include <set>

#include "mdvc/binary_io.hpp"
#include "mdvc/error.hpp"
#include "mdvc/rng.hpp"
#include "mdvc/vocabulary.hpp"

namespace mdvc {

using nlohmann::json;

namespace {

std::vector<double> normalized(const std::vector<double>& weights, std::size_t n) {
  if (weights.empty()) return std::vector<double>(n, 1.0 / static_cast<double>(n));
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<double> out;
  for (double w : weights) out.push_back(w / total);
  return out;
}

void check_slot(const std::string& name, const std::vector<std::string>& alphabet, const std::vector<double>& weights) {
  if (alphabet.empty()) fail(ErrorCode::kConfig, "synth: " + name + " alphabet is empty");
  if (std::set<std::string>(alphabet.begin(), alphabet.end()).size() != alphabet.size()) {
    fail(ErrorCode::kConfig, "synth: " + name + " alphabet has duplicates");
  }
  if (!weights.empty()) {
    if (weights.size() != alphabet.size()) fail(ErrorCode::kConfig, "synth: " + name + " weights do not match alphabet");
    for (double w : weights) {
      if (!(w > 0.0)) fail(ErrorCode::kConfig, "synth: " + name + " weights must be positive");
    }
  }
}

std::size_t draw(Rng& rng, const std::vector<double>& probs) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return probs.size() - 1;
}

}  // namespace

void SynthConfig::validate() const {
  check_slot("subject", subjects, subject_weights);
  check_slot("action", actions, action_weights);
  check_slot("object", objects, object_weights);
  std::set<std::string> seen;
  for (const auto* alphabet : {&subjects, &actions, &objects}) {
    for (const auto& entry : *alphabet) {
      if (!seen.insert(normalize(entry)).second) {
        fail(ErrorCode::kConfig, "synth: \"" + entry + "\" appears in more than one slot alphabet");
      }
    }
  }
  if (train_videos + val_videos == 0) fail(ErrorCode::kConfig, "synth: no videos requested");
  if (events_per_video == 0) fail(ErrorCode::kConfig, "synth: events_per_video must be positive");
  if (min_event_rows == 0 || min_event_rows > max_event_rows) fail(ErrorCode::kConfig, "synth: bad event row range");
  if (audio_dim < actions.size()) fail(ErrorCode::kConfig, "synth: audio_dim is smaller than the action alphabet");
  if (visual_dim < objects.size()) fail(ErrorCode::kConfig, "synth: visual_dim is smaller than the object alphabet");
  if (!(noise >= 0.0)) fail(ErrorCode::kConfig, "synth: noise must be non-negative");
  if (!(signal > 0.0)) fail(ErrorCode::kConfig, "synth: signal must be positive");
  if (!(missing_rate >= 0.0 && missing_rate <= 1.0)) fail(ErrorCode::kConfig, "synth: missing_rate outside [0, 1]");
}

std::string SynthConfig::to_json() const {
  return json{{"seed", seed},
              {"train_videos", train_videos},
              {"val_videos", val_videos},
              {"events_per_video", events_per_video},
              {"min_event_rows", min_event_rows},
              {"max_event_rows", max_event_rows},
              {"audio_dim", audio_dim},
              {"visual_dim", visual_dim},
              {"noise", noise},
              {"signal", signal},
              {"missing_rate", missing_rate},
              {"subjects", subjects},
              {"actions", actions},
              {"objects", objects},
              {"subject_weights", subject_weights},
              {"action_weights", action_weights},
              {"object_weights", object_weights}}
      .dump();
}

SynthConfig SynthConfig::from_json(const std::string& text) {
  SynthConfig c;
  try {
    const json j = json::parse(text);
    c.seed = j.value("seed", c.seed);
    c.train_videos = j.value("train_videos", c.train_videos);
    c.val_videos = j.value("val_videos", c.val_videos);
    c.events_per_video = j.value("events_per_video", c.events_per_video);
    c.min_event_rows = j.value("min_event_rows", c.min_event_rows);
    c.max_event_rows = j.value("max_event_rows", c.max_event_rows);
    c.audio_dim = j.value("audio_dim", c.audio_dim);
    c.visual_dim = j.value("visual_dim", c.visual_dim);
    c.noise = j.value("noise", c.noise);
    c.signal = j.value("signal", c.signal);
    c.missing_rate = j.value("missing_rate", c.missing_rate);
    c.subjects = j.value("subjects", c.subjects);
    c.actions = j.value("actions", c.actions);
    c.objects = j.value("objects", c.objects);
    c.subject_weights = j.value("subject_weights", c.subject_weights);
    c.action_weights = j.value("action_weights", c.action_weights);
    c.object_weights = j.value("object_weights", c.object_weights);
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, std::string("synth config: ") + e.what());
  }
  c.validate();
  return c;
}

SynthDataset synth_build(const SynthConfig& config) {
  config.validate();
  const auto ps = normalized(config.subject_weights, config.subjects.size());
  const auto pa = normalized(config.action_weights, config.actions.size());
  const auto po = normalized(config.object_weights, config.objects.size());
  Rng rng(mix_seed(config.seed, 0x73796e7468ULL));

  SynthDataset out;
  const std::size_t total = config.train_videos + config.val_videos;
  for (std::size_t v = 0; v < total; ++v) {
    char id[32];
    std::snprintf(id, sizeof id, "syn%05zu", v);
    VideoRecord video;
    video.id = id;
    video.split = v < config.train_videos ? "train" : "val";

    struct Event {
      std::size_t first_row, rows, subject, action, object;
    };
    std::vector<Event> events;
    std::size_t row = 1;  // one lead-in row of noise
    for (std::size_t e = 0; e < config.events_per_video; ++e) {
      const std::size_t span = config.max_event_rows - config.min_event_rows + 1;
      Event ev{row, config.min_event_rows + rng.below(span), draw(rng, ps), draw(rng, pa), draw(rng, po)};
      events.push_back(ev);
      row += ev.rows + 1;  // one separating row
    }
    const std::size_t rows = row;
    const double step = kDefaultFeatureStep;
    video.duration = static_cast<double>(rows) * step;

    FeatureRecord audio{"audio", rows, config.audio_dim, step, std::vector<float>(rows * config.audio_dim)};
    FeatureRecord visual{"visual", rows, config.visual_dim, step, std::vector<float>(rows * config.visual_dim)};
    for (auto& x : audio.values) x = static_cast<float>(config.noise * rng.normal());
    for (auto& x : visual.values) x = static_cast<float>(config.noise * rng.normal());

    for (const auto& ev : events) {
      const double start = static_cast<double>(ev.first_row) * step;
      const double end = static_cast<double>(ev.first_row + ev.rows) * step;
      for (std::size_t r = ev.first_row; r < ev.first_row + ev.rows; ++r) {
        audio.values[r * config.audio_dim + ev.action] += static_cast<float>(config.signal);
        visual.values[r * config.visual_dim + ev.object] += static_cast<float>(config.signal);
      }
      video.annotations.push_back({start, end,
                                   config.subjects[ev.subject] + " " + config.actions[ev.action] + " " +
                                       config.objects[ev.object]});
      std::string said = config.subjects[ev.subject];
      if (rng.below(4) == 0) said = "[Music] " + said;
      video.speech.push_back({start + 0.25 * step, end - 0.25 * step, said});
    }

    for (auto* rec : {&audio, &visual}) {
      const std::string path = "features/" + video.id + "_" + rec->modality + ".mdvf";
      if (rng.uniform() < config.missing_rate) {
        video.feature_paths[rec->modality] = std::nullopt;
      } else {
        video.feature_paths[rec->modality] = path;
        out.features.emplace(path, std::move(*rec));
      }
    }
    out.manifest.videos.push_back(std::move(video));
  }
  return out;
}

DatasetManifest synth_generate(const SynthConfig& config, const std::filesystem::path& dir) {
  SynthDataset data = synth_build(config);
  std::error_code ec;
  std::filesystem::create_directories(dir / "features", ec);
  if (ec) fail(ErrorCode::kIo, "synth: cannot create " + (dir / "features").string() + ": " + ec.message());
  for (const auto& [path, record] : data.features) write_feature_record(dir / path, record);
  data.manifest.root = dir;
  save_manifest(data.manifest, dir / "manifest.json");
  write_file_atomic(dir / "synth_config.json", config.to_json());
  return data.manifest;
}

double exact_match_ceiling(const SynthConfig& config, bool subject_visible, bool action_visible,
                           bool object_visible) {
  config.validate();
  const auto ps = normalized(config.subject_weights, config.subjects.size());
  const auto pa = normalized(config.action_weights, config.actions.size());
  const auto po = normalized(config.object_weights, config.objects.size());
  // For each observable assignment, the best guess is the most probable
  // full caption consistent with it.
  std::map<std::vector<std::size_t>, double> best;
  for (std::size_t s = 0; s < ps.size(); ++s) {
    for (std::size_t a = 0; a < pa.size(); ++a) {
      for (std::size_t o = 0; o < po.size(); ++o) {
        const std::vector<std::size_t> seen{subject_visible ? s : 0, action_visible ? a : 0, object_visible ? o : 0};
        double& b = best[seen];
        b = std::max(b, ps[s] * pa[a] * po[o]);
      }
    }
  }
  double total = 0.0;
  for (const auto& [key, p] : best) total += p;
  return total;
}

}  // namespace mdvc
