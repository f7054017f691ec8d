#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mdvc/proposal.hpp"

namespace mdvc {

enum class Direction { kForward, kBackward };

// Per-time-step confidences from one pass of a bidirectional proposal scorer.
// Forward anchors are ending grid positions, backward anchors are starting
// positions. A span index k covers k + 1 grid steps.
struct ConfidenceStream {
  Direction direction = Direction::kForward;
  double step_seconds = 0.0;
  std::map<std::pair<std::size_t, std::size_t>, double> scores;  // (anchor, span) -> confidence

  void validate() const;
  static ConfidenceStream from_json(const std::string& text);
  std::string to_json() const;
};

ConfidenceStream load_confidence_stream(const std::filesystem::path& path);

struct GridCell {
  std::size_t start = 0;  // grid index of the first step
  std::size_t span = 0;
  double score = 0.0;
};

struct ProposalGrid {
  double step_seconds = 0.0;
  std::vector<GridCell> cells;  // ordered by (start, span)

  Proposal to_proposal(const GridCell& cell) const;
};

// Cell (s, k) takes forward(s + k, k) * backward(s, k); cells missing from
// either stream are dropped. Streams must share their step and span set.
ProposalGrid fuse_bidirectional(const ConfidenceStream& forward, const ConfidenceStream& backward);

inline constexpr double kDefaultProposalThreshold = 0.5;

// Keeps score >= threshold, sorted by score descending, then earlier start,
// then shorter span, truncated to max_count.
std::vector<Proposal> filter_proposals(const ProposalGrid& grid, double threshold = kDefaultProposalThreshold,
                                       std::size_t max_count = 100);

std::string proposals_to_json(const std::map<std::string, std::vector<Proposal>>& by_video);
std::map<std::string, std::vector<Proposal>> proposals_from_json(const std::string& text);

}  // namespace mdvc
