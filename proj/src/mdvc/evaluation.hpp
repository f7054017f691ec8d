#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mdvc/proposal.hpp"

namespace mdvc {

using TokenList = std::vector<std::string>;

// |intersection| / |union| of two intervals; 0 when the union is empty.
double tiou(const Proposal& a, const Proposal& b);

// Clipped n-gram matches and total candidate n-grams over a corpus.
// references[i] holds every reference for candidates[i].
std::pair<std::size_t, std::size_t> modified_precision(const std::vector<TokenList>& candidates,
                                                       const std::vector<std::vector<TokenList>>& references,
                                                       int n);

// exp(1 - r/c) when c < r, else 1. Zero for an empty candidate corpus.
double brevity_penalty(std::size_t candidate_length, std::size_t reference_length);

// Corpus BLEU@max_n: geometric mean of clipped 1..max_n-gram precisions times
// the brevity penalty. The effective reference length per candidate is the
// closest reference length (shorter on ties).
double bleu(const std::vector<TokenList>& candidates, const std::vector<std::vector<TokenList>>& references,
            int max_n);
double bleu(const std::vector<TokenList>& candidates, const std::vector<TokenList>& references, int max_n);

// Caption tokens as scored: normalized, punctuation-only tokens dropped.
TokenList scoring_tokens(const std::string& sentence);

struct CaptionedEvent {
  double start = 0.0;
  double end = 0.0;
  std::string sentence;

  Proposal span() const { return {start, end, 1.0}; }
};

// {video_id: [{"start", "end", "sentence"}, ...]}
using Submission = std::map<std::string, std::vector<CaptionedEvent>>;

Submission parse_submission(const std::string& json_text);
Submission load_submission(const std::string& path);
std::string submission_to_json(const Submission& submission);

inline constexpr std::size_t kMaxProposalsPerVideo = 100;
inline const std::vector<double> kDefaultTiouThresholds = {0.3, 0.5, 0.7, 0.9};

struct MetricReport {
  std::string name;
  std::vector<double> per_threshold;                      // aligned with EvalReport::thresholds
  std::map<std::string, std::vector<double>> per_video;   // video -> per-threshold score
  double final_score = 0.0;
};

struct EvalReport {
  std::vector<double> thresholds;
  std::size_t reference_sets = 0;
  std::vector<MetricReport> metrics;  // Bleu_1 .. Bleu_N

  const MetricReport& metric(const std::string& name) const;
  std::string to_json() const;
};

// A prediction is scored against its best-overlapping reference when that
// overlap strictly exceeds the threshold, and scores zero otherwise. Scores
// are averaged per video, then over the videos of the reference set, then
// over thresholds; several reference sets are evaluated separately and
// averaged. At most max_proposals predictions per video are used, in
// submission order. Reference videos without predictions score zero.
EvalReport dense_caption_eval(const Submission& predictions, const std::vector<Submission>& reference_sets,
                              const std::vector<double>& thresholds = kDefaultTiouThresholds, int max_n = 4,
                              std::size_t max_proposals = kMaxProposalsPerVideo);

}  // namespace mdvc
