#include "mdvc/checkpoint.hpp"

#include <json.hpp>
#include <map>
#include <vector>

#include "mdvc/binary_io.hpp"
#include "mdvc/error.hpp"
#include "mdvc/rng.hpp"

namespace mdvc {

using nlohmann::json;

namespace {

constexpr std::string_view kMagic = "MDVCKPT1";

struct StoredTensor {
  Shape shape;
  std::vector<double> values;
};

}  // namespace

std::string encode_checkpoint(const MdvcModel& model, const Vocabulary& vocabulary) {
  if (vocabulary.size() != model.config().vocab_size) {
    fail(ErrorCode::kCheckpoint, "checkpoint: vocabulary has " + std::to_string(vocabulary.size()) +
                                     " entries, model expects " + std::to_string(model.config().vocab_size));
  }
  const std::string header =
      json{{"model", json::parse(model.config().to_json())}, {"vocabulary", vocabulary.tokens()}}.dump();
  const auto params = model.named_parameters();
  ByteWriter w;
  w.bytes(kMagic);
  w.u32(static_cast<std::uint32_t>(header.size()));
  w.bytes(header);
  w.u64(fnv1a(header));
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes(name);
    w.u8(static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape()) w.u64(d);
    for (double v : t.data()) w.f64(v);
  }
  w.u64(fnv1a(w.buffer()));
  return w.take();
}

ModelCheckpoint decode_checkpoint(std::string_view bytes) {
  ByteReader r(bytes, ErrorCode::kCheckpoint, "checkpoint");
  if (r.bytes(kMagic.size()) != kMagic) fail(ErrorCode::kCheckpoint, "checkpoint: bad magic");
  const std::string header(r.bytes(r.u32()));
  if (r.u64() != fnv1a(header)) fail(ErrorCode::kCheckpoint, "checkpoint: config hash mismatch");

  ModelConfig config;
  std::vector<std::string> tokens;
  try {
    const json j = json::parse(header);
    config = ModelConfig::from_json(j.at("model").dump());
    tokens = j.at("vocabulary").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kCheckpoint, std::string("checkpoint: malformed header: ") + e.what());
  } catch (const Error& e) {
    fail(ErrorCode::kCheckpoint, std::string("checkpoint: invalid config: ") + e.what());
  }

  std::map<std::string, StoredTensor> stored;
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name(r.bytes(r.u16()));
    StoredTensor t;
    const std::uint8_t rank = r.u8();
    for (std::uint8_t d = 0; d < rank; ++d) t.shape.push_back(r.u64());
    const std::size_t n = shape_numel(t.shape);
    if (n > r.remaining() / 8) fail(ErrorCode::kCheckpoint, "checkpoint: truncated tensor " + name);
    t.values.resize(n);
    for (double& v : t.values) v = r.f64();
    if (!stored.emplace(std::move(name), std::move(t)).second) {
      fail(ErrorCode::kCheckpoint, "checkpoint: duplicate tensor name");
    }
  }
  const std::size_t body_size = r.position();
  const std::uint64_t checksum = r.u64();
  if (r.remaining() != 0) fail(ErrorCode::kCheckpoint, "checkpoint: trailing bytes after checksum");
  if (checksum != fnv1a(bytes.substr(0, body_size))) fail(ErrorCode::kCheckpoint, "checkpoint: checksum mismatch");

  Vocabulary vocabulary = Vocabulary::from_tokens(std::move(tokens));
  if (vocabulary.size() != config.vocab_size) {
    fail(ErrorCode::kCheckpoint, "checkpoint: vocabulary size " + std::to_string(vocabulary.size()) +
                                     " disagrees with config " + std::to_string(config.vocab_size));
  }
  MdvcModel model = MdvcModel::create(config, 0);
  std::vector<std::string> offenders;
  std::vector<std::vector<double>> values;
  for (const auto& [name, t] : model.named_parameters()) {
    auto it = stored.find(name);
    if (it == stored.end()) {
      offenders.push_back("missing " + name);
      continue;
    }
    if (it->second.shape != t.shape()) {
      offenders.push_back(name + " " + shape_str(it->second.shape) + " != " + shape_str(t.shape()));
    }
    values.push_back(std::move(it->second.values));
    stored.erase(it);
  }
  for (const auto& [name, t] : stored) offenders.push_back("unexpected " + name);
  if (!offenders.empty()) {
    std::string msg = "checkpoint: tensors do not match config:";
    for (const auto& o : offenders) msg += " [" + o + "]";
    fail(ErrorCode::kCheckpoint, msg);
  }
  model.restore(values);
  return ModelCheckpoint{std::move(model), std::move(vocabulary)};
}

void save_checkpoint(const MdvcModel& model, const Vocabulary& vocabulary, const std::filesystem::path& path) {
  write_file_atomic(path, encode_checkpoint(model, vocabulary));
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace mdvc
