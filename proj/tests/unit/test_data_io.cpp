#include <gtest/gtest.h>

#include <set>

#include "mdvc/binary_io.hpp"
#include "mdvc/checkpoint.hpp"
#include "mdvc/dataset.hpp"
#include "mdvc/error.hpp"
#include "mdvc/features.hpp"
#include "mdvc/samples.hpp"
#include "mdvc/synth.hpp"
#include "mdvc/vocabulary.hpp"
#include "test_support.hpp"

using namespace mdvc;
namespace t = mdvc::testing;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInternal;
}

FeatureRecord record(std::size_t rows, std::size_t cols = 2) {
  return FeatureRecord::from_tensor("visual", t::random_matrix(rows, cols, rows), kDefaultFeatureStep);
}

Vocabulary toy_vocabulary(std::size_t size) {
  std::vector<std::string> tokens{"<pad>", "<s>", "</s>", "<unk>"};
  for (std::size_t i = 4; i < size; ++i) tokens.push_back("w" + std::to_string(i));
  return Vocabulary::from_tokens(tokens);
}

SynthConfig small_synth(std::uint64_t seed = 3) {
  SynthConfig c;
  c.seed = seed;
  c.train_videos = 6;
  c.val_videos = 2;
  return c;
}

}  // namespace

TEST(Slicing, ExactTiling) {
  EXPECT_EQ(feature_rows_for(record(5), {0.0, 1.92}), (std::vector<std::size_t>{0, 1}));
}

TEST(Slicing, PartialOverlap) {
  EXPECT_EQ(feature_rows_for(record(5), {0.5, 1.0}), (std::vector<std::size_t>{0, 1}));
}

TEST(Slicing, HalfOpenBoundary) {
  EXPECT_EQ(feature_rows_for(record(5), {0.96, 0.96 + 1e-6}), (std::vector<std::size_t>{1}));
}

TEST(Slicing, OutsideExtentIsRangeError) {
  EXPECT_EQ(code_of([] { feature_rows_for(record(2), {0.0, 5.0}); }), ErrorCode::kRange);
  const Tensor rows = slice_features(record(5, 3), {0.0, 1.92});
  EXPECT_EQ(rows.shape(), (Shape{2, 3}));
}

TEST(FeatureFile, RoundTripIsByteExact) {
  const FeatureRecord r = record(4, 3);
  const std::string bytes = encode_feature_record(r);
  const FeatureRecord back = decode_feature_record(bytes);
  EXPECT_EQ(back.values, r.values);
  EXPECT_EQ(back.modality, "visual");
  EXPECT_EQ(encode_feature_record(back), bytes);
  EXPECT_EQ(code_of([&] { decode_feature_record(bytes.substr(0, bytes.size() - 1)); }), ErrorCode::kParse);
  EXPECT_EQ(code_of([&] { decode_feature_record("XXXXX"); }), ErrorCode::kParse);
}

TEST(Speech, SelectionRule) {
  const Proposal p{7, 12, 1};
  EXPECT_EQ(select_speech({{5, 8, "hello"}}, p), (std::vector<std::string>{"hello"}));
  EXPECT_TRUE(select_speech({{0, 6, "hello"}}, p).empty());
  EXPECT_EQ(select_speech({{11, 20, "bye"}}, p), (std::vector<std::string>{"bye"}));
}

TEST(Speech, SoundTagsRemovedAndOrderKept) {
  const std::vector<SpeechSegment> segs{{5, 8, "[Music] Hello there"}, {9, 10, "[Applause]"}, {11, 20, "bye"}, {30, 40, "x"}};
  EXPECT_EQ(select_speech(segs, {7, 12, 1}), (std::vector<std::string>{"hello", "there", "bye"}));
  EXPECT_EQ(normalize(strip_sound_tags("[Applause] yes [Laughter]")), "yes");
}

TEST(Vocabulary, TokenizeDetachesPunctuation) {
  EXPECT_EQ(tokenize("A man runs."), (std::vector<std::string>{"a", "man", "runs", "."}));
  EXPECT_EQ(normalize("  It's a   well-known  fact! "), "it's a well-known fact !");
}

TEST(Vocabulary, BuildOrderAndUnknown) {
  const Vocabulary v = Vocabulary::build({"b a b", "c b a"});
  EXPECT_EQ(v.tokens(), (std::vector<std::string>{"<pad>", "<s>", "</s>", "<unk>", "b", "a", "c"}));
  EXPECT_EQ(v.id("zebra"), Vocabulary::kUnk);
  EXPECT_EQ(v.id("zebra"), 3u);
  const Vocabulary floor = Vocabulary::build({"b a b", "c b a"}, 2);
  EXPECT_FALSE(floor.contains("c"));
}

TEST(Vocabulary, DecodeEncodeRoundTrip) {
  const Vocabulary v = Vocabulary::build({"A man runs. A dog sits!"});
  const std::string s = "a dog runs .";
  EXPECT_EQ(v.decode(v.encode(s)), normalize(s));
  const std::vector<std::size_t> ids{Vocabulary::kStart, v.id("dog"), Vocabulary::kEnd, Vocabulary::kPad};
  EXPECT_EQ(v.decode(ids), "dog");
}

TEST(Manifest, JsonRoundTripAndValidation) {
  DatasetManifest m;
  VideoRecord v;
  v.id = "vid";
  v.duration = 10.0;
  v.split = "train";
  v.feature_paths["audio"] = "features/vid_audio.mdvf";
  v.feature_paths["visual"] = std::nullopt;
  v.speech.push_back({0.0, 2.0, "hi"});
  v.annotations.push_back({1.0, 4.0, "a man waves"});
  m.videos.push_back(v);
  const DatasetManifest back = manifest_from_json(manifest_to_json(m), "/tmp");
  EXPECT_EQ(manifest_to_json(back), manifest_to_json(m));
  EXPECT_FALSE(back.videos[0].feature_paths.at("visual").has_value());
  m.videos[0].annotations[0].end = 11.0;
  EXPECT_EQ(code_of([&] { m.validate(); }), ErrorCode::kRange);
  EXPECT_EQ(code_of([] { manifest_from_json("{\"videos\": 3}", "/tmp"); }), ErrorCode::kParse);
}

TEST(Synth, CeilingsByEnumeration) {
  const SynthConfig c;
  EXPECT_NEAR(exact_match_ceiling(c, true, false, false), 0.1375, 1e-12);
  EXPECT_NEAR(exact_match_ceiling(c, false, true, false), 0.0625, 1e-12);
  EXPECT_NEAR(exact_match_ceiling(c, false, false, true), 0.1375, 1e-12);
  EXPECT_NEAR(exact_match_ceiling(c, false, true, true), 0.25, 1e-12);
  EXPECT_NEAR(exact_match_ceiling(c, true, true, true), 1.0, 1e-12);
  SynthConfig uniform;
  uniform.action_weights.clear();
  EXPECT_NEAR(exact_match_ceiling(uniform, false, false, true), 1.0 / 16.0, 1e-12);
}

TEST(Synth, SixtyFourCaptionsAndSlotPlacement) {
  SynthConfig c = small_synth();
  c.train_videos = 400;
  const SynthDataset d = synth_build(c);
  std::set<std::string> captions;
  for (const auto& v : d.manifest.videos) {
    for (const auto& a : v.annotations) captions.insert(normalize(a.caption));
    EXPECT_TRUE(v.feature_paths.count("audio"));
    EXPECT_TRUE(v.feature_paths.count("visual"));
  }
  EXPECT_EQ(captions.size(), 64u);
}

TEST(Synth, SameSeedSameBytes) {
  t::TempDir a("synth_a"), b("synth_b");
  synth_generate(small_synth(), a.path());
  synth_generate(small_synth(), b.path());
  std::size_t files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a.path())) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), a.path());
    EXPECT_EQ(read_file(entry.path()), read_file(b.path() / rel)) << rel;
    ++files;
  }
  EXPECT_GT(files, 10u);
  t::TempDir other("synth_c");
  synth_generate(small_synth(4), other.path());
  EXPECT_NE(read_file(a.path() / "manifest.json"), read_file(other.path() / "manifest.json"));
}

TEST(Synth, AlphabetOverlapIsConfigError) {
  SynthConfig c = small_synth();
  c.objects[0] = "A Young Man";
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::kConfig);
  EXPECT_EQ(code_of([&] { synth_build(c); }), ErrorCode::kConfig);
}

TEST(Synth, ConfigJsonRoundTrip) {
  SynthConfig c = small_synth();
  c.missing_rate = 0.25;
  EXPECT_EQ(SynthConfig::from_json(c.to_json()).to_json(), c.to_json());
}

TEST(Samples, MissingModalityIsSubstitutedDeterministically) {
  t::TempDir dir("samples");
  SynthConfig c = small_synth();
  c.missing_rate = 1.0;
  const DatasetManifest m = synth_generate(c, dir.path());
  const Vocabulary vocab = Vocabulary::build(text_corpus(m, "train"));
  ModelConfig mc = t::toy_config();
  mc.modalities = {{"speech", 8, 1}, {"audio", c.audio_dim, 1}, {"visual", c.visual_dim, 1}};
  mc.d_ff = 32;
  mc.vocab_size = vocab.size();
  FeatureCache cache;
  const auto first = build_samples(mc, vocab, m, "train", cache, 5);
  const auto second = build_samples(mc, vocab, m, "train", cache, 5);
  ASSERT_FALSE(first.empty());
  EXPECT_EQ(first[0].substituted, (std::vector<std::string>{"audio", "visual"}));
  const auto a = first[0].inputs[1].features.data();
  const auto b = second[0].inputs[1].features.data();
  EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
}

TEST(Checkpoint, RoundTripPreservesCaptions) {
  const ModelConfig c = t::toy_config();
  const MdvcModel model = MdvcModel::create(c, 21);
  const Vocabulary vocab = toy_vocabulary(c.vocab_size);
  t::TempDir dir("ckpt");
  save_checkpoint(model, vocab, dir.path() / "m.mdvc");
  const ModelCheckpoint back = load_checkpoint(dir.path() / "m.mdvc");
  EXPECT_EQ(back.model.weights_hash(), model.weights_hash());
  EXPECT_EQ(back.vocabulary.tokens(), vocab.tokens());
  const auto inputs = t::toy_inputs(c, 3);
  EXPECT_EQ(back.model.greedy_decode(inputs), model.greedy_decode(inputs));
  EXPECT_EQ(encode_checkpoint(back.model, back.vocabulary), encode_checkpoint(model, vocab));
}

TEST(Checkpoint, TruncatedOrCorruptFilesAreRejected) {
  const ModelConfig c = t::toy_config();
  const std::string bytes = encode_checkpoint(MdvcModel::create(c, 1), toy_vocabulary(c.vocab_size));
  for (std::size_t cut : {std::size_t{4}, std::size_t{40}, bytes.size() / 2, bytes.size() - 1}) {
    EXPECT_EQ(code_of([&] { decode_checkpoint(std::string_view(bytes).substr(0, cut)); }), ErrorCode::kCheckpoint)
        << cut;
  }
  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x1;
  EXPECT_EQ(code_of([&] { decode_checkpoint(flipped); }), ErrorCode::kCheckpoint);
}

TEST(Checkpoint, VocabularyMismatchIsRejected) {
  const ModelConfig c = t::toy_config();
  EXPECT_EQ(code_of([&] { encode_checkpoint(MdvcModel::create(c, 1), toy_vocabulary(c.vocab_size + 1)); }),
            ErrorCode::kCheckpoint);
}

TEST(Checkpoint, TensorShapeMismatchListsOffenders) {
  const ModelConfig stored_config = t::toy_config();
  ModelConfig header_config = stored_config;
  header_config.d_ff = 24;
  const MdvcModel model = MdvcModel::create(stored_config, 1);
  const Vocabulary vocab = toy_vocabulary(stored_config.vocab_size);

  std::string header = "{\"model\":" + header_config.to_json() + ",\"vocabulary\":[";
  for (std::size_t i = 0; i < vocab.size(); ++i) header += (i ? ",\"" : "\"") + vocab.token(i) + "\"";
  header += "]}";
  ByteWriter w;
  w.bytes("MDVCKPT1");
  w.u32(static_cast<std::uint32_t>(header.size()));
  w.bytes(header);
  w.u64(fnv1a(header));
  const auto params = model.named_parameters();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, tensor] : params) {
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes(name);
    w.u8(static_cast<std::uint8_t>(tensor.rank()));
    for (std::size_t d : tensor.shape()) w.u64(d);
    for (double x : tensor.data()) w.f64(x);
  }
  w.u64(fnv1a(w.buffer()));
  try {
    decode_checkpoint(w.buffer());
    FAIL() << "expected a checkpoint error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCheckpoint);
    EXPECT_NE(std::string(e.what()).find("speech.encoder.0.feed_forward.w1"), std::string::npos) << e.what();
  }
}
