#include "mdvc/pipeline.hpp"

#include <json.hpp>

#include "mdvc/binary_io.hpp"
#include "mdvc/checkpoint.hpp"
#include "mdvc/error.hpp"
#include "mdvc/samples.hpp"

namespace mdvc {

using nlohmann::json;

RunSettings RunSettings::preset_defaults(const std::string& name) {
  RunSettings s;
  s.preset = name;
  if (name == "paper") {
    s.widths["speech"] = 512;
  } else if (name == "paper-audio") {
    s.widths["speech"] = 512;
    s.layers = 2;
    s.smoothing = 0.2;
    s.train = TrainConfig::audio_only_preset();
  } else if (name == "desk") {
    s.widths["speech"] = 16;
    s.heads = 2;
    s.d_ff = 32;
    s.train.learning_rate = 3e-3;
  } else {
    fail(ErrorCode::kConfig, "unknown preset '" + name + "' (expected paper, paper-audio or desk)");
  }
  return s;
}

RunSettings RunSettings::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kParse, std::string("run settings: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorCode::kConfig, "run settings must be a JSON object");
  RunSettings s = preset_defaults(j.value("preset", std::string("paper")));
  try {
    s.seed = j.value("seed", s.seed);
    s.min_freq = j.value("min_freq", s.min_freq);
    s.modalities = j.value("modalities", s.modalities);
    if (j.contains("widths")) {
      for (const auto& [name, w] : j["widths"].items()) s.widths[name] = w.get<std::size_t>();
    }
    s.layers = j.value("layers", s.layers);
    s.heads = j.value("heads", s.heads);
    s.d_ff = j.value("d_ff", s.d_ff);
    s.dropout = j.value("dropout", s.dropout);
    s.smoothing = j.value("smoothing", s.smoothing);
    if (j.contains("residual_mode")) s.residual_mode = parse_residual_mode(j["residual_mode"].get<std::string>());
    if (j.contains("fusion")) s.fusion = parse_fusion(j["fusion"].get<std::string>());
    s.max_caption_len = j.value("max_caption_len", s.max_caption_len);
    if (j.contains("train")) {
      json merged = json::parse(s.train.to_json());
      merged.update(j["train"]);
      s.train = TrainConfig::from_json(merged.dump());
    }
    if (!j.contains("train") || !j["train"].contains("seed")) s.train.seed = s.seed;
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, std::string("run settings: ") + e.what());
  }
  if (s.modalities.empty()) fail(ErrorCode::kConfig, "run settings: no modalities selected");
  s.train.validate();
  return s;
}

std::string RunSettings::to_json() const {
  json widths_json = json::object();
  for (const auto& [k, v] : widths) widths_json[k] = v;
  return json{{"preset", preset},
              {"seed", seed},
              {"min_freq", min_freq},
              {"modalities", modalities},
              {"widths", widths_json},
              {"layers", layers},
              {"heads", heads},
              {"d_ff", d_ff},
              {"dropout", dropout},
              {"smoothing", smoothing},
              {"residual_mode", residual_mode_name(residual_mode)},
              {"fusion", fusion_name(fusion)},
              {"max_caption_len", max_caption_len},
              {"train", json::parse(train.to_json())}}
      .dump(2);
}

namespace {

std::size_t infer_width(const DatasetManifest& manifest, const std::string& modality) {
  for (const auto& v : manifest.videos) {
    auto it = v.feature_paths.find(modality);
    if (it != v.feature_paths.end() && it->second) return read_feature_record(manifest.resolve(*it->second)).cols;
  }
  fail(ErrorCode::kConfig, "no width given for modality '" + modality + "' and no feature file to infer it from");
}

}  // namespace

ModelConfig resolve_model_config(const RunSettings& settings, const DatasetManifest& manifest,
                                 std::size_t vocab_size) {
  ModelConfig c;
  for (const auto& name : settings.modalities) {
    auto it = settings.widths.find(name);
    const std::size_t width = it != settings.widths.end() ? it->second : infer_width(manifest, name);
    c.modalities.push_back({name, width, settings.layers});
  }
  c.heads = settings.heads;
  c.d_ff = settings.d_ff;
  c.vocab_size = vocab_size;
  c.smoothing = settings.smoothing;
  c.dropout = settings.dropout;
  c.residual_mode = settings.residual_mode;
  c.fusion = settings.fusion;
  c.max_caption_len = settings.max_caption_len;
  c.validate();
  return c;
}

std::string TrainingRun::summary_json() const {
  return json{{"best_epoch", result.best_epoch},
              {"best_score", result.best_score},
              {"epochs", result.history.size()},
              {"stop_reason", result.stop_reason},
              {"val_bleu4", val_bleu4},
              {"val_exact_match", val_exact_match},
              {"train_samples", train_samples},
              {"val_samples", val_samples},
              {"vocab_size", vocabulary.size()},
              {"parameters", model.parameter_count()},
              {"weights_hash", model.weights_hash()}}
      .dump(2);
}

TrainingRun run_training(const RunSettings& settings, const DatasetManifest& manifest,
                         const TrainCallbacks& callbacks) {
  Vocabulary vocabulary = Vocabulary::build(text_corpus(manifest, "train"), settings.min_freq);
  const ModelConfig config = resolve_model_config(settings, manifest, vocabulary.size());
  FeatureCache cache;
  const auto train = build_samples(config, vocabulary, manifest, "train", cache, settings.seed);
  const auto val = build_samples(config, vocabulary, manifest, "val", cache, settings.seed);
  if (train.empty()) fail(ErrorCode::kInvalidArgument, "manifest has no annotated training videos");

  TrainConfig tc = settings.train;
  tc.smoothing = settings.smoothing;
  TrainingRun run{std::move(vocabulary), MdvcModel::create(config, settings.seed), {}, 0.0, 0.0, train.size(),
                  val.size()};
  run.result = train_loop(run.model, run.vocabulary, train, val, tc, callbacks);
  if (!val.empty()) {
    run.val_bleu4 = corpus_bleu(run.model, run.vocabulary, val, 4);
    run.val_exact_match = exact_match_rate(run.model, val);
  }
  return run;
}

void write_training_outputs(const TrainingRun& run, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
  save_checkpoint(run.model, run.vocabulary, dir / "checkpoint.mdvc");
  std::string history;
  for (const auto& r : run.result.history) history += r.to_json() + "\n";
  write_file_atomic(dir / "history.jsonl", history);
  write_file_atomic(dir / "summary.json", run.summary_json() + "\n");
}

}  // namespace mdvc
