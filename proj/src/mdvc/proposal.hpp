#pragma once

namespace mdvc {

// Temporal event candidate in seconds.
struct Proposal {
  double start = 0.0;
  double end = 0.0;
  double score = 1.0;

  double duration() const { return end - start; }
  bool valid() const { return start >= 0.0 && start < end && score >= 0.0 && score <= 1.0; }
};

}  // namespace mdvc
