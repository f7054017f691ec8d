#include "mdvc/proposals.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <set>

#include "mdvc/binary_io.hpp"
#include "mdvc/error.hpp"

namespace mdvc {

using nlohmann::json;

namespace {

std::set<std::size_t> span_set(const ConfidenceStream& s) {
  std::set<std::size_t> spans;
  for (const auto& [key, score] : s.scores) spans.insert(key.second);
  return spans;
}

}  // namespace

void ConfidenceStream::validate() const {
  if (!(step_seconds > 0.0) || !std::isfinite(step_seconds)) {
    fail(ErrorCode::kParameter, "confidence stream: step_seconds must be positive");
  }
  for (const auto& [key, score] : scores) {
    if (!(score >= 0.0 && score <= 1.0)) {
      fail(ErrorCode::kRange, "confidence stream: score " + std::to_string(score) + " at (" +
                                  std::to_string(key.first) + ", " + std::to_string(key.second) +
                                  ") outside [0, 1]");
    }
  }
}

ConfidenceStream ConfidenceStream::from_json(const std::string& text) {
  ConfidenceStream s;
  try {
    const json j = json::parse(text);
    const auto dir = j.at("direction").get<std::string>();
    if (dir == "forward") {
      s.direction = Direction::kForward;
    } else if (dir == "backward") {
      s.direction = Direction::kBackward;
    } else {
      fail(ErrorCode::kParse, "confidence stream: direction must be \"forward\" or \"backward\"");
    }
    s.step_seconds = j.at("step_seconds").get<double>();
    for (const auto& e : j.at("entries")) {
      if (!e.is_array() || e.size() != 3) fail(ErrorCode::kParse, "confidence stream: entries are [anchor, span, score]");
      const auto anchor = e[0].get<std::size_t>();
      const auto span = e[1].get<std::size_t>();
      if (!s.scores.emplace(std::make_pair(anchor, span), e[2].get<double>()).second) {
        fail(ErrorCode::kParse, "confidence stream: duplicate entry (" + std::to_string(anchor) + ", " +
                                    std::to_string(span) + ")");
      }
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("confidence stream: ") + e.what());
  }
  s.validate();
  return s;
}

std::string ConfidenceStream::to_json() const {
  json entries = json::array();
  for (const auto& [key, score] : scores) entries.push_back({key.first, key.second, score});
  return json{{"direction", direction == Direction::kForward ? "forward" : "backward"},
              {"step_seconds", step_seconds},
              {"entries", entries}}
      .dump();
}

ConfidenceStream load_confidence_stream(const std::filesystem::path& path) {
  return ConfidenceStream::from_json(read_file(path));
}

Proposal ProposalGrid::to_proposal(const GridCell& cell) const {
  return {static_cast<double>(cell.start) * step_seconds,
          static_cast<double>(cell.start + cell.span + 1) * step_seconds, cell.score};
}

ProposalGrid fuse_bidirectional(const ConfidenceStream& forward, const ConfidenceStream& backward) {
  if (forward.direction != Direction::kForward || backward.direction != Direction::kBackward) {
    fail(ErrorCode::kAlignment, "fuse: expected one forward and one backward stream");
  }
  forward.validate();
  backward.validate();
  if (std::abs(forward.step_seconds - backward.step_seconds) > 1e-12) {
    fail(ErrorCode::kAlignment, "fuse: grid steps differ (" + std::to_string(forward.step_seconds) + " vs " +
                                    std::to_string(backward.step_seconds) + ")");
  }
  if (span_set(forward) != span_set(backward)) fail(ErrorCode::kAlignment, "fuse: streams cover different spans");

  ProposalGrid grid;
  grid.step_seconds = forward.step_seconds;
  for (const auto& [key, b] : backward.scores) {
    const auto [start, span] = key;
    auto it = forward.scores.find({start + span, span});
    if (it == forward.scores.end()) continue;
    grid.cells.push_back({start, span, it->second * b});
  }
  return grid;
}

std::vector<Proposal> filter_proposals(const ProposalGrid& grid, double threshold, std::size_t max_count) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) fail(ErrorCode::kParameter, "filter: threshold outside [0, 1]");
  if (max_count == 0) fail(ErrorCode::kParameter, "filter: max_count must be at least 1");
  std::vector<GridCell> kept;
  for (const auto& c : grid.cells) {
    if (c.score >= threshold) kept.push_back(c);
  }
  std::sort(kept.begin(), kept.end(), [](const GridCell& a, const GridCell& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.start != b.start) return a.start < b.start;
    return a.span < b.span;
  });
  if (kept.size() > max_count) kept.resize(max_count);
  std::vector<Proposal> out;
  out.reserve(kept.size());
  for (const auto& c : kept) out.push_back(grid.to_proposal(c));
  return out;
}

std::string proposals_to_json(const std::map<std::string, std::vector<Proposal>>& by_video) {
  json doc = json::object();
  for (const auto& [video, list] : by_video) {
    json arr = json::array();
    for (const auto& p : list) arr.push_back({{"start", p.start}, {"end", p.end}, {"score", p.score}});
    doc[video] = std::move(arr);
  }
  return doc.dump(2);
}

std::map<std::string, std::vector<Proposal>> proposals_from_json(const std::string& text) {
  std::map<std::string, std::vector<Proposal>> out;
  try {
    const json doc = json::parse(text);
    if (!doc.is_object()) fail(ErrorCode::kParse, "proposals: top level must be an object of videos");
    for (const auto& [video, arr] : doc.items()) {
      auto& list = out[video];
      for (const auto& e : arr) {
        Proposal p{e.at("start").get<double>(), e.at("end").get<double>(), e.value("score", 1.0)};
        if (!p.valid()) fail(ErrorCode::kParse, "proposals: invalid proposal in video " + video);
        list.push_back(p);
      }
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("proposals: ") + e.what());
  }
  return out;
}

}  // namespace mdvc
