#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mdvc/proposal.hpp"
#include "mdvc/tensor.hpp"

namespace mdvc {

inline constexpr double kDefaultFeatureStep = 0.96;

// On-disk layout, all little-endian:
//   "MDVF1" | tag u8 | rows u32 | cols u32 | step_seconds f64 | rows*cols f32
// Tags: 'V' visual, 'A' audio, 'S' speech.
struct FeatureRecord {
  std::string modality;
  std::size_t rows = 0;
  std::size_t cols = 0;
  double step_seconds = kDefaultFeatureStep;
  std::vector<float> values;

  double extent_seconds() const { return static_cast<double>(rows) * step_seconds; }
  Tensor to_tensor() const;
  static FeatureRecord from_tensor(std::string modality, const Tensor& t, double step_seconds);
};

std::string encode_feature_record(const FeatureRecord& record);
FeatureRecord decode_feature_record(std::string_view bytes);
void write_feature_record(const std::filesystem::path& path, const FeatureRecord& record);
FeatureRecord read_feature_record(const std::filesystem::path& path);

// Rows whose half-open interval [i*step, (i+1)*step) meets [start, end);
// snaps to the nearest row when that set is empty.
std::vector<std::size_t> feature_rows_for(const FeatureRecord& record, const Proposal& p);
Tensor slice_features(const FeatureRecord& record, const Proposal& p);

// Seeded standard-normal stand-in for an absent modality.
Tensor random_features(std::size_t rows, std::size_t cols, std::uint64_t seed);

}  // namespace mdvc
