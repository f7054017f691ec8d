#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "mdvc/model.hpp"
#include "mdvc/vocabulary.hpp"

namespace mdvc {

// Binary layout, little-endian:
//   "MDVCKPT1"
//   u32 header length | header JSON {"model": <config>, "vocabulary": [...]}
//   u64 FNV-1a of the header bytes
//   u32 tensor count
//   per tensor: u16 name length | name | u8 rank | u64 dims[rank] | f64 values
//   u64 FNV-1a of every preceding byte
struct ModelCheckpoint {
  MdvcModel model;
  Vocabulary vocabulary;
};

std::string encode_checkpoint(const MdvcModel& model, const Vocabulary& vocabulary);
ModelCheckpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const MdvcModel& model, const Vocabulary& vocabulary, const std::filesystem::path& path);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mdvc
