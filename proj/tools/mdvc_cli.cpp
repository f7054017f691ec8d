// Command-line front end. Links only the C interface in mdvc.h.
#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mdvc.h"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

enum class LogLevel { kQuiet, kInfo, kDebug };

LogLevel log_level() {
  const char* env = std::getenv("MDVC_LOG_LEVEL");
  const std::string v = env != nullptr ? env : "info";
  if (v == "quiet" || v == "error") return LogLevel::kQuiet;
  if (v == "debug") return LogLevel::kDebug;
  return LogLevel::kInfo;
}

void log_info(const std::string& line) {
  if (log_level() != LogLevel::kQuiet) std::cerr << line << "\n";
}

struct Failure {
  int status;
  std::string message;
};

[[noreturn]] void raise(int status, const std::string& message) { throw Failure{status, message}; }

void check(mdvc_status s) {
  if (s != MDVC_OK) raise(s, mdvc_last_error());
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(MDVC_ERR_IO, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) raise(MDVC_ERR_IO, "cannot write " + path);
  out << text;
  if (!text.empty() && text.back() != '\n') out << "\n";
  if (!out) raise(MDVC_ERR_IO, "write failed for " + path);
}

// Output goes to `out` when set, stdout otherwise.
void emit(const std::optional<std::string>& out, const std::string& text) {
  if (out) {
    write_text(*out, text);
  } else {
    std::cout << text << "\n";
  }
}

std::string take(char* s) {
  std::string copy = s != nullptr ? s : "";
  mdvc_string_free(s);
  return copy;
}

json load_config(const std::optional<std::string>& path) {
  if (!path) return json::object();
  try {
    json j = json::parse(read_text(*path));
    if (!j.is_object()) raise(MDVC_ERR_CONFIG, *path + ": config must be a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    raise(MDVC_ERR_PARSE, *path + ": " + e.what());
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> parse_thresholds(const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      raise(MDVC_ERR_INVALID_ARGUMENT, "bad tIoU threshold '" + item + "'");
    }
  }
  if (out.empty()) raise(MDVC_ERR_INVALID_ARGUMENT, "no tIoU thresholds given");
  return out;
}

void write_run_config(const fs::path& path, const std::string& command, json settings) {
  json doc{{"command", command}, {"settings", std::move(settings)}, {"library_version", mdvc_version()}};
  write_text(path.string(), doc.dump(2));
}

std::string sidecar(const std::string& out) { return out + ".run_config.json"; }

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string out;
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> train_videos, val_videos;
  std::optional<double> missing_rate, noise;
};

void cmd_synth(const SynthArgs& a) {
  json cfg = load_config(a.config);
  if (a.seed) cfg["seed"] = *a.seed;
  if (a.train_videos) cfg["train_videos"] = *a.train_videos;
  if (a.val_videos) cfg["val_videos"] = *a.val_videos;
  if (a.missing_rate) cfg["missing_rate"] = *a.missing_rate;
  if (a.noise) cfg["noise"] = *a.noise;
  char* summary = nullptr;
  check(mdvc_synth(cfg.dump().c_str(), a.out.c_str(), &summary));
  const std::string text = take(summary);
  write_run_config(fs::path(a.out) / "run_config.json", "synth", json::parse(read_text((fs::path(a.out) / "synth_config.json").string())));
  std::cout << text << "\n";
}

struct TrainArgs {
  std::string manifest, out;
  std::optional<std::string> config, preset, modalities, fusion, residual_mode;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr, smoothing, dropout;
  std::optional<std::size_t> batch_size, max_epochs, patience, layers, heads, d_ff, max_caption_len, min_freq;
};

void epoch_logger(const char* record, void*) { log_info(record); }

void cmd_train(const TrainArgs& a) {
  json s = load_config(a.config);
  if (a.preset) s["preset"] = *a.preset;
  if (a.seed) s["seed"] = *a.seed;
  if (a.modalities) s["modalities"] = split_list(*a.modalities);
  if (a.fusion) s["fusion"] = *a.fusion;
  if (a.residual_mode) s["residual_mode"] = *a.residual_mode;
  if (a.smoothing) s["smoothing"] = *a.smoothing;
  if (a.dropout) s["dropout"] = *a.dropout;
  if (a.layers) s["layers"] = *a.layers;
  if (a.heads) s["heads"] = *a.heads;
  if (a.d_ff) s["d_ff"] = *a.d_ff;
  if (a.max_caption_len) s["max_caption_len"] = *a.max_caption_len;
  if (a.min_freq) s["min_freq"] = *a.min_freq;
  if (!s.contains("train")) s["train"] = json::object();
  if (a.lr) s["train"]["learning_rate"] = *a.lr;
  if (a.batch_size) s["train"]["batch_size"] = *a.batch_size;
  if (a.max_epochs) s["train"]["max_epochs"] = *a.max_epochs;
  if (a.patience) s["train"]["patience"] = *a.patience;
  if (a.seed) s["train"]["seed"] = *a.seed;

  char* resolved = nullptr;
  check(mdvc_resolve_settings(s.dump().c_str(), &resolved));
  json settings = json::parse(take(resolved));
  settings["manifest"] = fs::absolute(a.manifest).string();
  fs::create_directories(a.out);
  write_run_config(fs::path(a.out) / "run_config.json", "train", settings);

  char* summary = nullptr;
  check(mdvc_train(s.dump().c_str(), a.manifest.c_str(), a.out.c_str(), epoch_logger, nullptr, &summary));
  std::cout << take(summary) << "\n";
}

struct CaptionArgs {
  std::string checkpoint, manifest, proposals;
  std::optional<std::string> out;
  std::uint64_t seed = 0;
};

void cmd_caption(const CaptionArgs& a) {
  mdvc_model* model = nullptr;
  check(mdvc_model_load(a.checkpoint.c_str(), &model));
  char* submission = nullptr;
  std::size_t failures = 0;
  const mdvc_status s =
      mdvc_model_caption(model, a.manifest.c_str(), read_text(a.proposals).c_str(), a.seed, &submission, &failures);
  mdvc_model_free(model);
  check(s);
  emit(a.out, take(submission));
  if (a.out) {
    write_run_config(sidecar(*a.out), "caption",
                     {{"checkpoint", a.checkpoint}, {"manifest", a.manifest}, {"proposals", a.proposals}, {"seed", a.seed}});
  }
  if (failures > 0) log_info(json{{"warning", "proposals failed"}, {"count", failures}}.dump());
}

struct ProposeArgs {
  std::string forward, backward, video_id;
  std::optional<std::string> out;
  double threshold = 0.5;
  std::size_t max_count = 100;
};

void cmd_propose(const ProposeArgs& a) {
  char* proposals = nullptr;
  check(mdvc_propose(read_text(a.forward).c_str(), read_text(a.backward).c_str(), a.threshold, a.max_count,
                     &proposals));
  json doc{{a.video_id, json::parse(take(proposals))}};
  emit(a.out, doc.dump(2));
  if (a.out) {
    write_run_config(sidecar(*a.out), "propose",
                     {{"forward", a.forward},
                      {"backward", a.backward},
                      {"video_id", a.video_id},
                      {"threshold", a.threshold},
                      {"max_count", a.max_count}});
  }
}

struct EvaluateArgs {
  std::string pred;
  std::vector<std::string> refs;
  std::string thresholds = "0.3,0.5,0.7,0.9";
  int max_n = 4;
  std::size_t max_proposals = 100;
  std::optional<std::string> out;
};

void cmd_evaluate(const EvaluateArgs& a) {
  const auto thresholds = parse_thresholds(a.thresholds);
  const std::string pred = read_text(a.pred);
  std::vector<std::string> refs;
  for (const auto& r : a.refs) refs.push_back(read_text(r));
  std::vector<const char*> ref_ptrs;
  for (const auto& r : refs) ref_ptrs.push_back(r.c_str());
  char* report = nullptr;
  check(mdvc_evaluate(pred.c_str(), ref_ptrs.data(), ref_ptrs.size(), thresholds.data(), thresholds.size(), a.max_n,
                      a.max_proposals, &report));
  emit(a.out, take(report));
  if (a.out) {
    write_run_config(sidecar(*a.out), "evaluate",
                     {{"pred", a.pred},
                      {"ref", a.refs},
                      {"tiou_thresholds", thresholds},
                      {"max_n", a.max_n},
                      {"max_proposals", a.max_proposals}});
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-modal dense video captioning"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(mdvc_version()));

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic tri-modal dataset");
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--config", synth.config, "Synthetic data config (JSON)");
  s->add_option("--seed", synth.seed);
  s->add_option("--train-videos", synth.train_videos);
  s->add_option("--val-videos", synth.val_videos);
  s->add_option("--missing-rate", synth.missing_rate);
  s->add_option("--noise", synth.noise);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a captioning model");
  t->add_option("--manifest", train.manifest, "Dataset manifest")->required();
  t->add_option("--out", train.out, "Run directory")->required();
  t->add_option("--config", train.config, "Run settings (JSON); flags override it");
  t->add_option("--preset", train.preset, "paper, paper-audio or desk");
  t->add_option("--modalities", train.modalities, "Comma-separated, e.g. speech,audio,visual");
  t->add_option("--fusion", train.fusion, "concat or average");
  t->add_option("--residual-mode", train.residual_mode, "verbatim or standard");
  t->add_option("--seed", train.seed);
  t->add_option("--lr", train.lr);
  t->add_option("--smoothing", train.smoothing);
  t->add_option("--dropout", train.dropout);
  t->add_option("--batch-size", train.batch_size);
  t->add_option("--max-epochs", train.max_epochs);
  t->add_option("--patience", train.patience);
  t->add_option("--layers", train.layers);
  t->add_option("--heads", train.heads);
  t->add_option("--d-ff", train.d_ff);
  t->add_option("--max-caption-len", train.max_caption_len);
  t->add_option("--min-freq", train.min_freq);

  CaptionArgs caption;
  auto* c = app.add_subcommand("caption", "Caption proposals with a trained checkpoint");
  c->add_option("--checkpoint", caption.checkpoint)->required();
  c->add_option("--manifest", caption.manifest)->required();
  c->add_option("--proposals", caption.proposals, "{video_id: [{start, end}]}")->required();
  c->add_option("--out", caption.out, "Submission file (stdout if omitted)");
  c->add_option("--seed", caption.seed, "Seed for missing-modality stand-ins");

  ProposeArgs propose;
  auto* p = app.add_subcommand("propose", "Fuse confidence streams into proposals");
  p->add_option("--forward", propose.forward)->required();
  p->add_option("--backward", propose.backward)->required();
  p->add_option("--video-id", propose.video_id)->required();
  p->add_option("--threshold", propose.threshold)->capture_default_str();
  p->add_option("--max-count", propose.max_count)->capture_default_str();
  p->add_option("--out", propose.out);

  EvaluateArgs evaluate;
  auto* e = app.add_subcommand("evaluate", "Score a submission against references");
  e->add_option("--pred", evaluate.pred)->required();
  e->add_option("--ref", evaluate.refs, "Reference set; repeat for several")->required();
  e->add_option("--tiou-thresholds", evaluate.thresholds)->capture_default_str();
  e->add_option("--max-n", evaluate.max_n, "Highest BLEU order")->capture_default_str();
  e->add_option("--max-proposals", evaluate.max_proposals)->capture_default_str();
  e->add_option("--out", evaluate.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    if (err.get_exit_code() == 0) return app.exit(err);
    std::cerr << json{{"error", "invalid_argument"}, {"status", MDVC_ERR_INVALID_ARGUMENT}, {"message", err.what()}}.dump()
              << "\n";
    return MDVC_ERR_INVALID_ARGUMENT;
  }

  try {
    if (*s) cmd_synth(synth);
    if (*t) cmd_train(train);
    if (*c) cmd_caption(caption);
    if (*p) cmd_propose(propose);
    if (*e) cmd_evaluate(evaluate);
  } catch (const Failure& f) {
    std::cerr << json{{"error", mdvc_status_name(static_cast<mdvc_status>(f.status))},
                      {"status", f.status},
                      {"message", f.message}}
                     .dump()
              << "\n";
    return f.status;
  } catch (const std::exception& ex) {
    std::cerr << json{{"error", "internal_error"}, {"status", MDVC_ERR_INTERNAL}, {"message", ex.what()}}.dump()
              << "\n";
    return MDVC_ERR_INTERNAL;
  }
  return 0;
}
