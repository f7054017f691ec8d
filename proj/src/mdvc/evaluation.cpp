#include "mdvc/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <json.hpp>
#include <limits>

#include "mdvc/binary_io.hpp"
#include "mdvc/error.hpp"
#include "mdvc/vocabulary.hpp"

namespace mdvc {

using nlohmann::json;

double tiou(const Proposal& a, const Proposal& b) {
  const double inter = std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
  const double uni = std::max(a.end, b.end) - std::min(a.start, b.start);
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts ngrams(const TokenList& tokens, int n) {
  NgramCounts counts;
  const auto un = static_cast<std::size_t>(n);
  if (tokens.size() < un) return counts;
  for (std::size_t i = 0; i + un <= tokens.size(); ++i) {
    ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                      tokens.begin() + static_cast<std::ptrdiff_t>(i + un))];
  }
  return counts;
}

void check_corpus(std::size_t candidates, std::size_t references, int n) {
  if (n < 1) fail(ErrorCode::kInvalidArgument, "bleu: n-gram order must be at least 1");
  if (candidates != references) {
    fail(ErrorCode::kInvalidArgument, "bleu: " + std::to_string(candidates) + " candidates but " +
                                          std::to_string(references) + " reference lists");
  }
}

std::size_t closest_reference_length(std::size_t c, const std::vector<TokenList>& refs) {
  std::size_t best = 0;
  std::size_t best_gap = std::numeric_limits<std::size_t>::max();
  for (const auto& r : refs) {
    const std::size_t gap = r.size() > c ? r.size() - c : c - r.size();
    if (gap < best_gap || (gap == best_gap && r.size() < best)) {
      best = r.size();
      best_gap = gap;
    }
  }
  return best;
}

}  // namespace

std::pair<std::size_t, std::size_t> modified_precision(const std::vector<TokenList>& candidates,
                                                       const std::vector<std::vector<TokenList>>& references,
                                                       int n) {
  check_corpus(candidates.size(), references.size(), n);
  std::size_t matches = 0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const NgramCounts cand = ngrams(candidates[i], n);
    NgramCounts max_ref;
    for (const auto& ref : references[i]) {
      for (const auto& [g, c] : ngrams(ref, n)) max_ref[g] = std::max(max_ref[g], c);
    }
    for (const auto& [g, c] : cand) {
      total += c;
      auto it = max_ref.find(g);
      if (it != max_ref.end()) matches += std::min(c, it->second);
    }
  }
  return {matches, total};
}

double brevity_penalty(std::size_t candidate_length, std::size_t reference_length) {
  if (candidate_length == 0) return 0.0;
  if (candidate_length >= reference_length) return 1.0;
  return std::exp(1.0 - static_cast<double>(reference_length) / static_cast<double>(candidate_length));
}

double bleu(const std::vector<TokenList>& candidates, const std::vector<std::vector<TokenList>>& references,
            int max_n) {
  check_corpus(candidates.size(), references.size(), max_n);
  if (candidates.empty()) fail(ErrorCode::kInvalidArgument, "bleu: empty candidate set");
  std::size_t c = 0;
  std::size_t r = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    c += candidates[i].size();
    r += closest_reference_length(candidates[i].size(), references[i]);
  }
  if (c == 0) return 0.0;
  double log_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    const auto [matches, total] = modified_precision(candidates, references, n);
    if (matches == 0 || total == 0) return 0.0;
    log_sum += std::log(static_cast<double>(matches) / static_cast<double>(total));
  }
  return brevity_penalty(c, r) * std::exp(log_sum / max_n);
}

double bleu(const std::vector<TokenList>& candidates, const std::vector<TokenList>& references, int max_n) {
  std::vector<std::vector<TokenList>> wrapped;
  wrapped.reserve(references.size());
  for (const auto& ref : references) wrapped.push_back({ref});
  return bleu(candidates, wrapped, max_n);
}

TokenList scoring_tokens(const std::string& sentence) {
  TokenList out;
  for (auto& t : tokenize(sentence)) {
    const bool punct = std::all_of(t.begin(), t.end(), [](unsigned char ch) { return std::ispunct(ch) != 0; });
    if (!punct) out.push_back(std::move(t));
  }
  return out;
}

namespace {

std::size_t line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

std::size_t line_of_key(const std::string& text, const std::string& key) {
  const auto pos = text.find(json(key).dump());
  return pos == std::string::npos ? 0 : line_of_offset(text, pos);
}

[[noreturn]] void submission_error(const std::string& text, const std::string& video, const std::string& what) {
  const std::size_t line = line_of_key(text, video);
  std::string msg = "submission";
  if (line > 0) msg += " line " + std::to_string(line);
  fail(ErrorCode::kParse, msg + ": video " + json(video).dump() + ": " + what);
}

}  // namespace

Submission parse_submission(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kParse, "submission line " + std::to_string(line_of_offset(json_text, e.byte)) + ": " + e.what());
  }
  if (!doc.is_object()) fail(ErrorCode::kParse, "submission line 1: top level must be an object of videos");
  Submission out;
  for (const auto& [video, events] : doc.items()) {
    if (!events.is_array()) submission_error(json_text, video, "events must be an array");
    auto& list = out[video];
    for (std::size_t i = 0; i < events.size(); ++i) {
      const json& e = events[i];
      const std::string where = "event " + std::to_string(i) + ": ";
      if (!e.is_object()) submission_error(json_text, video, where + "must be an object");
      for (const char* key : {"start", "end"}) {
        if (!e.contains(key) || !e[key].is_number()) {
          submission_error(json_text, video, where + "\"" + key + "\" must be a number");
        }
      }
      if (!e.contains("sentence") || !e["sentence"].is_string()) {
        submission_error(json_text, video, where + "\"sentence\" must be a string");
      }
      CaptionedEvent ev{e["start"].get<double>(), e["end"].get<double>(), e["sentence"].get<std::string>()};
      if (!std::isfinite(ev.start) || !std::isfinite(ev.end) || ev.end < ev.start) {
        submission_error(json_text, video, where + "invalid time span");
      }
      list.push_back(std::move(ev));
    }
  }
  return out;
}

Submission load_submission(const std::string& path) { return parse_submission(read_file(path)); }

std::string submission_to_json(const Submission& submission) {
  json doc = json::object();
  for (const auto& [video, events] : submission) {
    json list = json::array();
    for (const auto& e : events) list.push_back({{"start", e.start}, {"end", e.end}, {"sentence", e.sentence}});
    doc[video] = std::move(list);
  }
  return doc.dump(2);
}

const MetricReport& EvalReport::metric(const std::string& name) const {
  for (const auto& m : metrics) {
    if (m.name == name) return m;
  }
  fail(ErrorCode::kInvalidArgument, "no metric named " + name);
}

std::string EvalReport::to_json() const {
  json doc;
  doc["tiou_thresholds"] = thresholds;
  doc["reference_sets"] = reference_sets;
  json scores = json::object();
  json per_threshold = json::object();
  json per_video = json::object();
  for (const auto& m : metrics) {
    scores[m.name] = m.final_score;
    per_threshold[m.name] = m.per_threshold;
    for (const auto& [video, values] : m.per_video) per_video[video][m.name] = values;
  }
  scores["METEOR"] = nullptr;
  doc["scores"] = std::move(scores);
  doc["per_threshold"] = std::move(per_threshold);
  doc["per_video"] = std::move(per_video);
  return doc.dump(2);
}

namespace {

struct Tokenized {
  Proposal span;
  TokenList tokens;
};

std::vector<Tokenized> tokenized(const std::vector<CaptionedEvent>& events, std::size_t cap) {
  std::vector<Tokenized> out;
  for (std::size_t i = 0; i < events.size() && i < cap; ++i) {
    out.push_back({events[i].span(), scoring_tokens(events[i].sentence)});
  }
  return out;
}

// metrics x videos x thresholds for a single reference set.
std::vector<MetricReport> eval_one(const Submission& predictions, const Submission& references,
                                   const std::vector<double>& thresholds, int max_n, std::size_t cap) {
  const std::size_t nt = thresholds.size();
  std::vector<MetricReport> reports(static_cast<std::size_t>(max_n));
  for (int n = 1; n <= max_n; ++n) {
    auto& m = reports[static_cast<std::size_t>(n - 1)];
    m.name = "Bleu_" + std::to_string(n);
    m.per_threshold.assign(nt, 0.0);
  }
  if (references.empty()) return reports;

  for (const auto& [video, ref_events] : references) {
    const auto refs = tokenized(ref_events, std::numeric_limits<std::size_t>::max());
    std::vector<Tokenized> preds;
    if (auto it = predictions.find(video); it != predictions.end()) preds = tokenized(it->second, cap);

    // Best-overlapping reference per prediction; first wins ties.
    std::vector<double> best_overlap(preds.size(), 0.0);
    std::vector<std::vector<double>> sentence_scores(preds.size(), std::vector<double>(max_n, 0.0));
    for (std::size_t p = 0; p < preds.size(); ++p) {
      std::size_t best = refs.size();
      for (std::size_t r = 0; r < refs.size(); ++r) {
        const double o = tiou(preds[p].span, refs[r].span);
        if (best == refs.size() || o > best_overlap[p]) {
          best = r;
          best_overlap[p] = o;
        }
      }
      if (best == refs.size()) continue;
      for (int n = 1; n <= max_n; ++n) {
        sentence_scores[p][static_cast<std::size_t>(n - 1)] = bleu({preds[p].tokens}, {refs[best].tokens}, n);
      }
    }

    for (int n = 1; n <= max_n; ++n) {
      auto& m = reports[static_cast<std::size_t>(n - 1)];
      auto& row = m.per_video[video];
      row.assign(nt, 0.0);
      for (std::size_t t = 0; t < nt; ++t) {
        if (preds.empty()) continue;
        double sum = 0.0;
        for (std::size_t p = 0; p < preds.size(); ++p) {
          if (best_overlap[p] > thresholds[t]) sum += sentence_scores[p][static_cast<std::size_t>(n - 1)];
        }
        row[t] = sum / static_cast<double>(preds.size());
      }
      for (std::size_t t = 0; t < nt; ++t) m.per_threshold[t] += row[t] / static_cast<double>(references.size());
    }
  }
  return reports;
}

}  // namespace

EvalReport dense_caption_eval(const Submission& predictions, const std::vector<Submission>& reference_sets,
                              const std::vector<double>& thresholds, int max_n, std::size_t max_proposals) {
  if (reference_sets.empty()) fail(ErrorCode::kInvalidArgument, "evaluation needs at least one reference set");
  if (thresholds.empty()) fail(ErrorCode::kInvalidArgument, "evaluation needs at least one tIoU threshold");
  for (double t : thresholds) {
    if (!(t >= 0.0 && t < 1.0)) fail(ErrorCode::kInvalidArgument, "tIoU threshold out of [0, 1): " + std::to_string(t));
  }
  if (max_n < 1) fail(ErrorCode::kInvalidArgument, "BLEU order must be at least 1");
  if (max_proposals == 0) fail(ErrorCode::kInvalidArgument, "max_proposals must be positive");

  EvalReport report;
  report.thresholds = thresholds;
  report.reference_sets = reference_sets.size();
  const double weight = 1.0 / static_cast<double>(reference_sets.size());
  std::map<std::string, std::size_t> video_sets;  // how many sets each video appears in
  for (const auto& refs : reference_sets) {
    for (const auto& [video, events] : refs) ++video_sets[video];
  }

  for (const auto& refs : reference_sets) {
    auto one = eval_one(predictions, refs, thresholds, max_n, max_proposals);
    if (report.metrics.empty()) {
      report.metrics.resize(one.size());
      for (std::size_t i = 0; i < one.size(); ++i) {
        report.metrics[i].name = one[i].name;
        report.metrics[i].per_threshold.assign(thresholds.size(), 0.0);
      }
    }
    for (std::size_t i = 0; i < one.size(); ++i) {
      auto& m = report.metrics[i];
      for (std::size_t t = 0; t < thresholds.size(); ++t) m.per_threshold[t] += weight * one[i].per_threshold[t];
      for (const auto& [video, row] : one[i].per_video) {
        auto& dst = m.per_video[video];
        dst.resize(thresholds.size(), 0.0);
        const double w = 1.0 / static_cast<double>(video_sets[video]);
        for (std::size_t t = 0; t < thresholds.size(); ++t) dst[t] += w * row[t];
      }
    }
  }
  for (auto& m : report.metrics) {
    double sum = 0.0;
    for (double v : m.per_threshold) sum += v;
    m.final_score = sum / static_cast<double>(thresholds.size());
  }
  return report;
}

}  // namespace mdvc
