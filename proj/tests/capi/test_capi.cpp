#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "mdvc.h"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Owned {
  char* ptr = nullptr;
  ~Owned() { mdvc_string_free(ptr); }
  std::string str() const { return ptr ? ptr : ""; }
};

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mdvc_capi_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

struct RunResult {
  int status = 0;
  std::string out;
};

RunResult run(const std::string& args) {
  const std::string cmd = std::string(MDVC_CLI_PATH) + " " + args + " 2>&1";
  RunResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe)) r.out += buf.data();
  const int raw = ::pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

const char* kRefs = R"({"v1": [{"start": 0, "end": 10, "sentence": "a man is cutting bread"}],
"v2": [{"start": 0, "end": 30, "sentence": "a dog runs in the park"}]})";

}  // namespace

TEST(CApi, VersionAndStatusNames) {
  EXPECT_STRNE(mdvc_version(), "");
  EXPECT_STREQ(mdvc_status_name(MDVC_OK), "ok");
  EXPECT_STRNE(mdvc_status_name(MDVC_ERR_PARSE), mdvc_status_name(MDVC_ERR_RANGE));
}

TEST(CApi, EvaluateIdenticalSubmission) {
  Owned out;
  const char* refs[] = {kRefs};
  ASSERT_EQ(mdvc_evaluate(kRefs, refs, 1, nullptr, 0, 4, 100, &out.ptr), MDVC_OK) << mdvc_last_error();
  const json report = json::parse(out.str());
  EXPECT_DOUBLE_EQ(report["scores"]["Bleu_1"].get<double>(), 1.0);
  EXPECT_TRUE(report["scores"]["METEOR"].is_null());
}

TEST(CApi, ParseErrorsSurfaceAsStatus) {
  Owned out;
  const char* refs[] = {kRefs};
  EXPECT_EQ(mdvc_evaluate("{\n\"v1\": [\n oops", refs, 1, nullptr, 0, 4, 100, &out.ptr), MDVC_ERR_PARSE);
  EXPECT_EQ(out.ptr, nullptr);
  EXPECT_NE(std::string(mdvc_last_error()).find("line 3"), std::string::npos) << mdvc_last_error();
}

TEST(CApi, NullArgumentsAreRejected) {
  Owned out;
  EXPECT_EQ(mdvc_evaluate(nullptr, nullptr, 0, nullptr, 0, 4, 100, &out.ptr), MDVC_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(mdvc_model_load(nullptr, nullptr), MDVC_ERR_INVALID_ARGUMENT);
}

TEST(CApi, ProposeFusesStreams) {
  const char* fwd = R"({"direction":"forward","step_seconds":1.0,"entries":[[1,1,0.9],[0,0,0.8]]})";
  const char* bwd = R"({"direction":"backward","step_seconds":1.0,"entries":[[0,1,0.8],[0,0,0.5]]})";
  Owned out;
  ASSERT_EQ(mdvc_propose(fwd, bwd, 0.5, 100, &out.ptr), MDVC_OK) << mdvc_last_error();
  const json list = json::parse(out.str());
  ASSERT_EQ(list.size(), 1u);
  EXPECT_DOUBLE_EQ(list[0]["end"].get<double>(), 2.0);
  EXPECT_NEAR(list[0]["score"].get<double>(), 0.72, 1e-15);
  EXPECT_EQ(mdvc_propose(fwd, fwd, 0.5, 100, &out.ptr), MDVC_ERR_ALIGNMENT);
}

TEST(CApi, SynthTrainLoadCaption) {
  const fs::path dir = scratch("pipeline");
  Owned synth_summary;
  ASSERT_EQ(mdvc_synth(R"({"seed": 1, "train_videos": 8, "val_videos": 2})", (dir / "data").c_str(),
                       &synth_summary.ptr),
            MDVC_OK)
      << mdvc_last_error();

  int epochs_seen = 0;
  auto on_epoch = [](const char* record, void* user) {
    EXPECT_TRUE(json::parse(record).contains("train_loss"));
    ++*static_cast<int*>(user);
  };
  Owned train_summary;
  const char* settings = R"({"preset": "desk", "train": {"max_epochs": 2, "patience": 2}})";
  ASSERT_EQ(mdvc_train(settings, (dir / "data" / "manifest.json").c_str(), (dir / "run").c_str(), on_epoch,
                       &epochs_seen, &train_summary.ptr),
            MDVC_OK)
      << mdvc_last_error();
  EXPECT_EQ(epochs_seen, 2);
  EXPECT_TRUE(fs::exists(dir / "run" / "checkpoint.mdvc"));

  mdvc_model* model = nullptr;
  ASSERT_EQ(mdvc_model_load((dir / "run" / "checkpoint.mdvc").c_str(), &model), MDVC_OK) << mdvc_last_error();
  Owned info;
  ASSERT_EQ(mdvc_model_info(model, &info.ptr), MDVC_OK);
  EXPECT_GT(json::parse(info.str())["vocab_size"].get<int>(), 4);

  const char* proposals = R"({"syn00000": [{"start": 0.0, "end": 1.0, "score": 0.9}, {"start": 0.5, "end": 2.0, "score": 0.8}]})";
  Owned captions;
  std::size_t failures = 99;
  ASSERT_EQ(mdvc_model_caption(model, (dir / "data" / "manifest.json").c_str(), proposals, 0, &captions.ptr,
                               &failures),
            MDVC_OK)
      << mdvc_last_error();
  EXPECT_EQ(failures, 0u);
  EXPECT_EQ(json::parse(captions.str())["syn00000"].size(), 2u);
  mdvc_model_free(model);
  fs::remove_all(dir);
}

TEST(Cli, EvaluateIdenticalFilesGivesPerfectBleu1) {
  const fs::path dir = scratch("cli_eval");
  write(dir / "p.json", kRefs);
  write(dir / "r.json", kRefs);
  const RunResult r = run("evaluate --pred " + (dir / "p.json").string() + " --ref " + (dir / "r.json").string() +
                          " --out " + (dir / "report.json").string());
  ASSERT_EQ(r.status, 0) << r.out;
  std::ifstream in(dir / "report.json");
  const json report = json::parse(in);
  EXPECT_DOUBLE_EQ(report["scores"]["Bleu_1"].get<double>(), 1.0);
  for (double s : report["per_threshold"]["Bleu_1"]) EXPECT_DOUBLE_EQ(s, 1.0);
  EXPECT_TRUE(fs::exists(dir / "report.json.run_config.json"));
  fs::remove_all(dir);
}

TEST(Cli, ErrorsAreSingleJsonLineWithStatusExitCode) {
  const fs::path dir = scratch("cli_err");
  write(dir / "bad.json", "{\n  \"v1\": [\n    {\"start\": 0,\n    oops\n");
  write(dir / "r.json", kRefs);
  const RunResult r = run("evaluate --pred " + (dir / "bad.json").string() + " --ref " + (dir / "r.json").string());
  EXPECT_EQ(r.status, static_cast<int>(MDVC_ERR_PARSE));
  const json err = json::parse(r.out);
  EXPECT_EQ(err["status"].get<int>(), static_cast<int>(MDVC_ERR_PARSE));
  EXPECT_NE(err["message"].get<std::string>().find("line"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Cli, MissingRequiredOptionFails) {
  const RunResult r = run("evaluate --pred nothing.json");
  EXPECT_NE(r.status, 0);
}
