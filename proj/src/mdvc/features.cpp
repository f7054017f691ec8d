#include "mdvc/features.hpp"

#include <algorithm>
#include <cmath>

#include "mdvc/binary_io.hpp"
#include "mdvc/error.hpp"
#include "mdvc/rng.hpp"

namespace mdvc {

namespace {

constexpr std::string_view kMagic = "MDVF1";
constexpr double kTimeTolerance = 1e-9;

std::uint8_t modality_tag(const std::string& modality) {
  if (modality == "visual") return 'V';
  if (modality == "audio") return 'A';
  if (modality == "speech") return 'S';
  fail(ErrorCode::kInvalidArgument, "feature record: unknown modality '" + modality + "'");
}

std::string modality_from_tag(std::uint8_t tag) {
  switch (tag) {
    case 'V': return "visual";
    case 'A': return "audio";
    case 'S': return "speech";
    default: fail(ErrorCode::kParse, "feature record: unknown modality tag " + std::to_string(tag));
  }
}

}  // namespace

Tensor FeatureRecord::to_tensor() const {
  std::vector<double> wide(values.begin(), values.end());
  return Tensor::matrix(rows, cols, std::move(wide));
}

FeatureRecord FeatureRecord::from_tensor(std::string modality, const Tensor& t, double step_seconds) {
  if (t.rank() != 2) fail(ErrorCode::kDimension, "feature record: expected a matrix, got " + shape_str(t.shape()));
  FeatureRecord r;
  r.modality = std::move(modality);
  r.rows = t.rows();
  r.cols = t.cols();
  r.step_seconds = step_seconds;
  r.values.assign(t.data().begin(), t.data().end());
  return r;
}

std::string encode_feature_record(const FeatureRecord& record) {
  if (record.values.size() != record.rows * record.cols) {
    fail(ErrorCode::kDimension, "feature record: payload holds " + std::to_string(record.values.size()) +
                                    " values for " + std::to_string(record.rows) + "x" + std::to_string(record.cols));
  }
  if (!(record.step_seconds > 0.0)) fail(ErrorCode::kInvalidArgument, "feature record: step must be positive");
  ByteWriter w;
  w.bytes(kMagic);
  w.u8(modality_tag(record.modality));
  w.u32(static_cast<std::uint32_t>(record.rows));
  w.u32(static_cast<std::uint32_t>(record.cols));
  w.f64(record.step_seconds);
  for (float v : record.values) w.f32(v);
  return w.take();
}

FeatureRecord decode_feature_record(std::string_view bytes) {
  ByteReader r(bytes, ErrorCode::kParse, "feature record");
  if (r.bytes(kMagic.size()) != kMagic) fail(ErrorCode::kParse, "feature record: bad magic");
  FeatureRecord rec;
  rec.modality = modality_from_tag(r.u8());
  rec.rows = r.u32();
  rec.cols = r.u32();
  rec.step_seconds = r.f64();
  if (!(rec.step_seconds > 0.0) || !std::isfinite(rec.step_seconds)) {
    fail(ErrorCode::kParse, "feature record: invalid step " + std::to_string(rec.step_seconds));
  }
  const std::size_t n = rec.rows * rec.cols;
  if (r.remaining() != n * 4) {
    fail(ErrorCode::kParse, "feature record: payload is " + std::to_string(r.remaining()) + " bytes, expected " +
                                std::to_string(n * 4));
  }
  rec.values.resize(n);
  for (auto& v : rec.values) {
    v = r.f32();
    if (!std::isfinite(v)) fail(ErrorCode::kParse, "feature record: non-finite value in payload");
  }
  return rec;
}

void write_feature_record(const std::filesystem::path& path, const FeatureRecord& record) {
  write_file_atomic(path, encode_feature_record(record));
}

FeatureRecord read_feature_record(const std::filesystem::path& path) {
  try {
    return decode_feature_record(read_file(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kParse) fail(ErrorCode::kParse, path.string() + ": " + e.what());
    throw;
  }
}

std::vector<std::size_t> feature_rows_for(const FeatureRecord& record, const Proposal& p) {
  if (record.rows == 0) fail(ErrorCode::kRange, "slice: feature record has no rows");
  const double extent = record.extent_seconds();
  if (p.start < -kTimeTolerance || p.end > extent + kTimeTolerance || p.end < p.start) {
    fail(ErrorCode::kRange, "slice: proposal [" + std::to_string(p.start) + ", " + std::to_string(p.end) +
                                "] outside media extent [0, " + std::to_string(extent) + "]");
  }
  const double step = record.step_seconds;
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < record.rows; ++i) {
    const double lo = static_cast<double>(i) * step;
    const double hi = static_cast<double>(i + 1) * step;
    if (lo < p.end - kTimeTolerance && hi > p.start + kTimeTolerance) rows.push_back(i);
  }
  if (rows.empty()) {
    const double mid = 0.5 * (p.start + p.end);
    const auto nearest = static_cast<std::size_t>(std::clamp(std::floor(mid / step), 0.0,
                                                             static_cast<double>(record.rows - 1)));
    rows.push_back(nearest);
  }
  return rows;
}

Tensor slice_features(const FeatureRecord& record, const Proposal& p) {
  const auto rows = feature_rows_for(record, p);
  std::vector<double> out;
  out.reserve(rows.size() * record.cols);
  for (std::size_t r : rows) {
    out.insert(out.end(), record.values.begin() + r * record.cols, record.values.begin() + (r + 1) * record.cols);
  }
  return Tensor::matrix(rows.size(), record.cols, std::move(out));
}

Tensor random_features(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> values(rows * cols);
  for (double& v : values) v = rng.normal();
  return Tensor::matrix(rows, cols, std::move(values));
}

}  // namespace mdvc
