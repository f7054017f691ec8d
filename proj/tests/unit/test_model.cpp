#include <gtest/gtest.h>

#include "mdvc/error.hpp"
#include "mdvc/model.hpp"
#include "mdvc/vocabulary.hpp"
#include "test_support.hpp"

using namespace mdvc;
namespace t = mdvc::testing;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInternal;
}

const std::vector<std::size_t> kPrefix{Vocabulary::kStart, 7, 5, 9};

}  // namespace

TEST(ModelConfig, FullScaleFusedWidth) {
  const ModelConfig c = ModelConfig::full_scale(100);
  EXPECT_EQ(c.fused_width(), 1664u);
  EXPECT_EQ(c.heads, 4u);
  EXPECT_EQ(c.d_ff, 2048u);
}

TEST(ModelConfig, JsonRoundTrip) {
  const ModelConfig c = t::toy_config(FusionMode::kAverage, ResidualMode::kStandard);
  const ModelConfig back = ModelConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(back.hash(), c.hash());
}

TEST(ModelConfig, RejectsBadDimensions) {
  ModelConfig c = t::toy_config();
  c.heads = 3;
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::kConfig);
  c = t::toy_config();
  c.d_ff = 8;
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::kConfig);
  c = t::toy_config();
  c.modalities[1].d_model = 5;
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::kConfig);
}

TEST(Fusion, AverageOfOneHots) {
  const Tensor out = generator_fuse_average({Tensor::matrix(1, 2, {1, 0}), Tensor::matrix(1, 2, {0, 1})});
  EXPECT_DOUBLE_EQ(out.at(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(out.at(0, 1), 0.5);
}

TEST(Fusion, AverageOfIdenticalInputsIsIdentity) {
  const Tensor p = softmax(t::random_matrix(3, 5, 1));
  const Tensor out = generator_fuse_average({p, p, p});
  for (std::size_t i = 0; i < p.numel(); ++i) EXPECT_NEAR(out.data()[i], p.data()[i], 1e-15);
}

TEST(Fusion, AverageShapeMismatchIsFusionError) {
  EXPECT_EQ(code_of([] { generator_fuse_average({Tensor::zeros({1, 3}), Tensor::zeros({1, 4})}); }),
            ErrorCode::kFusion);
}

TEST(Fusion, ConcatWidthMismatchIsFusionError) {
  const GeneratorWeights w{t::random_matrix(6, 4, 1), t::random_matrix(4, 4, 2)};
  EXPECT_EQ(code_of([&] { generator_fuse_concat({Tensor::zeros({1, 2}), Tensor::zeros({1, 2})}, w); }),
            ErrorCode::kFusion);
  const Tensor p = generator_fuse_concat({t::random_matrix(2, 2, 3), t::random_matrix(2, 4, 4)}, w);
  EXPECT_EQ(p.shape(), (Shape{2, 4}));
}

TEST(Fusion, PermutedModalitiesWithPermutedBlocksAgree) {
  const Tensor a = t::random_matrix(2, 3, 1), b = t::random_matrix(2, 2, 2);
  const Tensor w1 = t::random_matrix(5, 4, 3), w2 = t::random_matrix(4, 4, 4);
  std::vector<double> swapped;
  const auto d = w1.data();
  swapped.insert(swapped.end(), d.begin() + 12, d.end());
  swapped.insert(swapped.end(), d.begin(), d.begin() + 12);
  const Tensor p = generator_fuse_concat({a, b}, {w1, w2});
  const Tensor q = generator_fuse_concat({b, a}, {Tensor::matrix(5, 4, swapped), w2});
  for (std::size_t i = 0; i < p.numel(); ++i) EXPECT_NEAR(p.data()[i], q.data()[i], 1e-14);
}

TEST(Model, ArityMismatchIsFusionError) {
  const ModelConfig c = t::toy_config();
  const MdvcModel model = MdvcModel::create(c, 1);
  auto inputs = t::toy_inputs(c, 2);
  inputs.pop_back();
  EXPECT_EQ(code_of([&] { model.forward(inputs, kPrefix); }), ErrorCode::kFusion);
  EXPECT_EQ(code_of([&] { model.greedy_decode(inputs); }), ErrorCode::kFusion);
}

TEST(Model, FeatureWidthMismatchIsDimensionError) {
  const ModelConfig c = t::toy_config();
  const MdvcModel model = MdvcModel::create(c, 1);
  auto inputs = t::toy_inputs(c, 2);
  inputs[2].features = t::random_matrix(3, 7, 1);
  EXPECT_EQ(code_of([&] { model.forward(inputs, kPrefix); }), ErrorCode::kDimension);
}

TEST(Model, ForwardProducesDistributions) {
  for (FusionMode fusion : {FusionMode::kConcat, FusionMode::kAverage}) {
    const ModelConfig c = t::toy_config(fusion);
    const MdvcModel model = MdvcModel::create(c, 3);
    const Tensor p = model.forward(t::toy_inputs(c, 4), kPrefix);
    ASSERT_EQ(p.shape(), (Shape{kPrefix.size(), c.vocab_size}));
    for (std::size_t r = 0; r < p.rows(); ++r) {
      double total = 0.0;
      for (std::size_t j = 0; j < p.cols(); ++j) total += p.at(r, j);
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(Model, SameSeedSameWeights) {
  const ModelConfig c = t::toy_config();
  EXPECT_EQ(MdvcModel::create(c, 5).weights_hash(), MdvcModel::create(c, 5).weights_hash());
  EXPECT_NE(MdvcModel::create(c, 5).weights_hash(), MdvcModel::create(c, 6).weights_hash());
}

TEST(Model, GreedyDecodeIsDeterministic) {
  const ModelConfig c = t::toy_config();
  const MdvcModel model = MdvcModel::create(c, 7);
  const auto inputs = t::toy_inputs(c, 8);
  const auto a = model.greedy_decode(inputs);
  EXPECT_EQ(a, model.greedy_decode(inputs));
  EXPECT_EQ(a.front(), Vocabulary::kStart);
  EXPECT_LE(a.size(), c.max_caption_len + 1);
}

TEST(Model, UniformDistributionBreaksTiesToLowestId) {
  EXPECT_EQ(argmax_row(Tensor::matrix(1, 4, {0.25, 0.25, 0.25, 0.25}), 0), 0u);
  EXPECT_EQ(argmax_row(Tensor::matrix(1, 4, {0.1, 0.4, 0.4, 0.1}), 0), 1u);

  const ModelConfig c = t::toy_config();
  const MdvcModel model = MdvcModel::create(c, 9);
  for (double& x : model.generator().w_f1.node()->data) x = 0.0;
  const auto seq = model.greedy_decode(t::toy_inputs(c, 1), 4);
  EXPECT_EQ(seq, (std::vector<std::size_t>{Vocabulary::kStart, 0, 0, 0, 0}));
}

TEST(Model, GeneratorPeakedOnEndStopsImmediately) {
  const ModelConfig c = t::toy_config();
  const MdvcModel model = MdvcModel::create(c, 10);
  auto& w1 = model.generator().w_f1.node()->data;
  auto& w2 = model.generator().w_f2.node()->data;
  std::fill(w1.begin(), w1.end(), 0.0);
  std::fill(w2.begin(), w2.end(), 0.0);
  // Columns 0 and 1 carry +h_0 and -h_0, so one of them is positive after ReLU.
  w1[0] = 1.0;
  w1[1] = -1.0;
  w2[0 * c.vocab_size + Vocabulary::kEnd] = 100.0;
  w2[1 * c.vocab_size + Vocabulary::kEnd] = 100.0;
  const auto seq = model.greedy_decode(t::toy_inputs(c, 2));
  EXPECT_EQ(seq, (std::vector<std::size_t>{Vocabulary::kStart, Vocabulary::kEnd}));
}

TEST(Model, TeacherForcingMatchesIncrementalPrefixes) {
  for (ResidualMode mode : {ResidualMode::kVerbatim, ResidualMode::kStandard}) {
    const ModelConfig c = t::toy_config(FusionMode::kConcat, mode);
    const MdvcModel model = MdvcModel::create(c, 11);
    const auto inputs = t::toy_inputs(c, 12);
    const Tensor full = model.forward(inputs, kPrefix);
    for (std::size_t len = 1; len <= kPrefix.size(); ++len) {
      const std::vector<std::size_t> prefix(kPrefix.begin(), kPrefix.begin() + len);
      const Tensor part = model.forward(inputs, prefix);
      for (std::size_t j = 0; j < c.vocab_size; ++j) {
        EXPECT_LT(std::abs(part.at(len - 1, j) - full.at(len - 1, j)), 1e-9);
      }
    }
  }
}

TEST(Model, PaddedEncoderRowsLeaveOutputsUnchanged) {
  const ModelConfig c = t::toy_config();
  const MdvcModel model = MdvcModel::create(c, 13);
  const auto inputs = t::toy_inputs(c, 14);
  auto padded = inputs;
  padded[0].tokens.push_back(Vocabulary::kPad);
  padded[0].tokens.push_back(Vocabulary::kPad);
  padded[0].padding = {false, false, false, true, true};
  for (std::size_t m = 1; m < 3; ++m) {
    const Tensor& f = inputs[m].features;
    std::vector<double> rows(f.data().begin(), f.data().end());
    rows.resize(rows.size() + f.cols(), 0.0);
    padded[m].features = Tensor::matrix(f.rows() + 1, f.cols(), rows);
    padded[m].padding.assign(f.rows() + 1, false);
    padded[m].padding.back() = true;
  }
  const Tensor a = model.forward(inputs, kPrefix);
  const Tensor b = model.forward(padded, kPrefix);
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_EQ(a.data()[i], b.data()[i]);
}

TEST(Model, SnapshotRestoreRoundTrip) {
  const ModelConfig c = t::toy_config();
  MdvcModel model = MdvcModel::create(c, 15);
  const auto snap = model.snapshot();
  const auto hash = model.weights_hash();
  t::randomize(model.parameters().front(), 99);
  EXPECT_NE(model.weights_hash(), hash);
  model.restore(snap);
  EXPECT_EQ(model.weights_hash(), hash);
}
