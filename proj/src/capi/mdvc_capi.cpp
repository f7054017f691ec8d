#include "mdvc.h"

#include <cstdlib>
#include <cstring>
#include <json.hpp>
#include <new>
#include <string>

#include "mdvc/captioning.hpp"
#include "mdvc/checkpoint.hpp"
#include "mdvc/error.hpp"
#include "mdvc/evaluation.hpp"
#include "mdvc/pipeline.hpp"
#include "mdvc/proposals.hpp"
#include "mdvc/synth.hpp"

using nlohmann::json;

struct mdvc_model {
  mdvc::ModelCheckpoint checkpoint;
};

namespace {

thread_local std::string g_last_error;

mdvc_status record(mdvc_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename Fn>
mdvc_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return MDVC_OK;
  } catch (const mdvc::Error& e) {
    return record(static_cast<mdvc_status>(e.code()), e.what());
  } catch (const json::exception& e) {
    return record(MDVC_ERR_PARSE, e.what());
  } catch (const std::bad_alloc&) {
    return record(MDVC_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return record(MDVC_ERR_INTERNAL, e.what());
  } catch (...) {
    return record(MDVC_ERR_INTERNAL, "unknown error");
  }
}

char* copy_out(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(const void* p, const char* name) {
  if (p == nullptr) mdvc::fail(mdvc::ErrorCode::kInvalidArgument, std::string(name) + " must not be NULL");
}

}  // namespace

extern "C" {

const char* mdvc_version(void) { return "0.1.0"; }

const char* mdvc_status_name(mdvc_status status) {
  if (status == MDVC_OK) return "ok";
  if (status < MDVC_ERR_DIMENSION || status > MDVC_ERR_INTERNAL) return "unknown";
  return mdvc::error_code_name(static_cast<mdvc::ErrorCode>(status)).data();
}

const char* mdvc_last_error(void) { return g_last_error.c_str(); }

void mdvc_string_free(char* s) { std::free(s); }

mdvc_status mdvc_synth(const char* config_json, const char* out_dir, char** out_summary_json) {
  return guarded([&] {
    require(out_dir, "out_dir");
    const mdvc::SynthConfig config =
        config_json != nullptr ? mdvc::SynthConfig::from_json(config_json) : mdvc::SynthConfig{};
    const auto manifest = mdvc::synth_generate(config, out_dir);
    std::size_t train = 0, val = 0;
    for (const auto& v : manifest.videos) (v.split == "train" ? train : val) += v.annotations.size();
    if (out_summary_json != nullptr) {
      *out_summary_json = copy_out(json{{"videos", manifest.videos.size()},
                                        {"train_samples", train},
                                        {"val_samples", val},
                                        {"manifest", (std::filesystem::path(out_dir) / "manifest.json").string()}}
                                       .dump());
    }
  });
}

mdvc_status mdvc_resolve_settings(const char* settings_json, char** out_settings_json) {
  return guarded([&] {
    require(out_settings_json, "out_settings_json");
    const auto settings = mdvc::RunSettings::from_json(settings_json != nullptr ? settings_json : "{}");
    *out_settings_json = copy_out(settings.to_json());
  });
}

mdvc_status mdvc_train(const char* settings_json, const char* manifest_path, const char* out_dir,
                       mdvc_epoch_fn on_epoch, void* user, char** out_summary_json) {
  return guarded([&] {
    require(manifest_path, "manifest_path");
    require(out_dir, "out_dir");
    const auto settings = mdvc::RunSettings::from_json(settings_json != nullptr ? settings_json : "{}");
    const auto manifest = mdvc::load_manifest(manifest_path);
    mdvc::TrainCallbacks callbacks;
    if (on_epoch != nullptr) {
      callbacks.on_epoch = [&](const mdvc::EpochRecord& r) { on_epoch(r.to_json().c_str(), user); };
    }
    const auto run = mdvc::run_training(settings, manifest, callbacks);
    mdvc::write_training_outputs(run, out_dir);
    if (out_summary_json != nullptr) *out_summary_json = copy_out(run.summary_json());
  });
}

mdvc_status mdvc_model_load(const char* checkpoint_path, mdvc_model** out_model) {
  return guarded([&] {
    require(checkpoint_path, "checkpoint_path");
    require(out_model, "out_model");
    *out_model = nullptr;
    *out_model = new mdvc_model{mdvc::load_checkpoint(checkpoint_path)};
  });
}

void mdvc_model_free(mdvc_model* model) { delete model; }

mdvc_status mdvc_model_info(const mdvc_model* model, char** out_info_json) {
  return guarded([&] {
    require(model, "model");
    require(out_info_json, "out_info_json");
    const auto& m = model->checkpoint.model;
    *out_info_json = copy_out(json{{"model", json::parse(m.config().to_json())},
                                   {"vocab_size", model->checkpoint.vocabulary.size()},
                                   {"parameters", m.parameter_count()},
                                   {"weights_hash", m.weights_hash()}}
                                  .dump(2));
  });
}

mdvc_status mdvc_model_caption(const mdvc_model* model, const char* manifest_path, const char* proposals_json,
                               uint64_t seed, char** out_submission_json, size_t* out_failures) {
  return guarded([&] {
    require(model, "model");
    require(manifest_path, "manifest_path");
    require(proposals_json, "proposals_json");
    require(out_submission_json, "out_submission_json");
    const auto manifest = mdvc::load_manifest(manifest_path);
    const auto proposals = mdvc::proposals_from_json(proposals_json);
    std::size_t failures = 0;
    *out_submission_json = copy_out(mdvc::caption_submission(model->checkpoint.model, model->checkpoint.vocabulary,
                                                             manifest, proposals, seed, &failures));
    if (out_failures != nullptr) *out_failures = failures;
  });
}

mdvc_status mdvc_propose(const char* forward_json, const char* backward_json, double threshold, size_t max_count,
                         char** out_proposals_json) {
  return guarded([&] {
    require(forward_json, "forward_json");
    require(backward_json, "backward_json");
    require(out_proposals_json, "out_proposals_json");
    const auto grid = mdvc::fuse_bidirectional(mdvc::ConfidenceStream::from_json(forward_json),
                                               mdvc::ConfidenceStream::from_json(backward_json));
    json arr = json::array();
    for (const auto& p : mdvc::filter_proposals(grid, threshold, max_count)) {
      arr.push_back({{"start", p.start}, {"end", p.end}, {"score", p.score}});
    }
    *out_proposals_json = copy_out(arr.dump(2));
  });
}

mdvc_status mdvc_evaluate(const char* submission_json, const char* const* reference_jsons, size_t reference_count,
                          const double* thresholds, size_t threshold_count, int max_n, size_t max_proposals,
                          char** out_report_json) {
  return guarded([&] {
    require(submission_json, "submission_json");
    require(out_report_json, "out_report_json");
    if (reference_count == 0) mdvc::fail(mdvc::ErrorCode::kInvalidArgument, "at least one reference set is required");
    require(reference_jsons, "reference_jsons");
    const auto predictions = mdvc::parse_submission(submission_json);
    std::vector<mdvc::Submission> refs;
    for (std::size_t i = 0; i < reference_count; ++i) {
      require(reference_jsons[i], "reference_jsons[i]");
      try {
        refs.push_back(mdvc::parse_submission(reference_jsons[i]));
      } catch (const mdvc::Error& e) {
        mdvc::fail(e.code(), "reference set " + std::to_string(i) + ": " + e.what());
      }
    }
    std::vector<double> t = mdvc::kDefaultTiouThresholds;
    if (thresholds != nullptr) t.assign(thresholds, thresholds + threshold_count);
    *out_report_json = copy_out(mdvc::dense_caption_eval(predictions, refs, t, max_n, max_proposals).to_json());
  });
}

}  // extern "C"
