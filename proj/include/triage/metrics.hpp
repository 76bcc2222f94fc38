// Copyright 2026 The Triage Loop Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

// Corpus metrics: BLEU-1..4 (Papineni, no smoothing), ROUGE-L F1, diagnostic
// label F1 per facet, and the combined report.

#ifndef TRIAGE_METRICS_HPP_
#define TRIAGE_METRICS_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "triage/agents.hpp"
#include "triage/core.hpp"
#include "triage/error.hpp"
#include "triage/text.hpp"

namespace triage {

using Tokens = std::vector<std::string>;

enum class TokenizerMode { kWhitespaceLower, kCjkChar };

inline std::string_view tokenizer_name(TokenizerMode m) {
  return m == TokenizerMode::kWhitespaceLower ? "whitespace_lower" : "cjk_char";
}

inline TokenizerMode parse_tokenizer(std::string_view s) {
  if (text::iequals(s, "whitespace_lower")) return TokenizerMode::kWhitespaceLower;
  if (text::iequals(s, "cjk_char")) return TokenizerMode::kCjkChar;
  throw Error(ErrorCode::kInvalidConfig, "unknown tokenizer '" + std::string(s) + "'");
}

/// kCjkChar emits one token per code point and drops whitespace.
inline Tokens tokenize(std::string_view s, TokenizerMode mode) {
  const std::string lowered = text::ascii_lower(s);
  if (mode == TokenizerMode::kWhitespaceLower) return text::split_whitespace(lowered);
  Tokens out;
  for (auto& cp : text::utf8_code_points(lowered)) {
    if (cp.size() == 1 && text::is_space(cp[0])) continue;
    out.push_back(std::move(cp));
  }
  return out;
}

namespace detail {

inline std::map<std::vector<std::string>, int> ngram_counts(const Tokens& toks, std::size_t n) {
  std::map<std::vector<std::string>, int> counts;
  if (toks.size() < n) return counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    ++counts[std::vector<std::string>(toks.begin() + i, toks.begin() + i + n)];
  }
  return counts;
}

}  // namespace detail

/// Geometric mean of clipped n-gram precisions for orders 1..n, uniform
/// weights, times the brevity penalty min(1, exp(1 - r/c)) where r is the
/// reference length closest to the candidate length (shorter wins ties).
/// Any zero precision makes the score 0.
inline double bleu_n(const Tokens& candidate, const std::vector<Tokens>& references, int n) {
  if (n < 1 || n > 4) throw Error(ErrorCode::kPrecondition, "BLEU order must be in [1, 4]");
  if (candidate.empty() || references.empty()) throw Error(ErrorCode::kEmptyInput, "BLEU input");
  for (const auto& r : references) {
    if (r.empty()) throw Error(ErrorCode::kEmptyInput, "BLEU reference");
  }

  double log_sum = 0.0;
  for (int k = 1; k <= n; ++k) {
    const auto cand = detail::ngram_counts(candidate, k);
    std::map<std::vector<std::string>, int> max_ref;
    for (const auto& r : references) {
      for (const auto& [g, c] : detail::ngram_counts(r, k)) max_ref[g] = std::max(max_ref[g], c);
    }
    int clipped = 0, total = 0;
    for (const auto& [g, c] : cand) {
      total += c;
      auto it = max_ref.find(g);
      if (it != max_ref.end()) clipped += std::min(c, it->second);
    }
    if (clipped == 0 || total == 0) return 0.0;
    log_sum += std::log(static_cast<double>(clipped) / total);
  }

  const auto c = static_cast<double>(candidate.size());
  double r = static_cast<double>(references.front().size());
  for (const auto& ref : references) {
    const auto len = static_cast<double>(ref.size());
    if (std::abs(len - c) < std::abs(r - c) || (std::abs(len - c) == std::abs(r - c) && len < r)) r = len;
  }
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum / n);
}

inline std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// LCS-based F1 (beta = 1).
inline double rouge_l(const Tokens& candidate, const Tokens& reference) {
  if (candidate.empty() || reference.empty()) throw Error(ErrorCode::kEmptyInput, "ROUGE input");
  const auto lcs = static_cast<double>(lcs_length(candidate, reference));
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(candidate.size());
  const double r = lcs / static_cast<double>(reference.size());
  return 2.0 * p * r / (p + r);
}

// ---------------------------------------------------------------------------
// Label F1

enum class Facet { kCategory, kItems, kStatus };

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  friend bool operator==(const Prf&, const Prf&) = default;
};

struct MatchCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  MatchCounts& operator+=(const MatchCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
};

/// Both sides empty scores 1 on every component; one side empty scores 0.
inline Prf prf_from_counts(const MatchCounts& c) {
  if (c.tp + c.fp == 0 && c.tp + c.fn == 0) return Prf{1.0, 1.0, 1.0};
  const double p = c.tp + c.fp == 0 ? 0.0 : static_cast<double>(c.tp) / (c.tp + c.fp);
  const double r = c.tp + c.fn == 0 ? 0.0 : static_cast<double>(c.tp) / (c.tp + c.fn);
  const double f = p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  return Prf{p, r, f};
}

/// CATEGORY compares categories only, ITEMS compares (category, item),
/// STATUS compares the full triple.
inline std::set<std::string> project(const std::set<DiagnosticLabel>& labels, Facet facet) {
  std::set<std::string> out;
  for (const auto& l : labels) {
    std::string key(category_name(l.category));
    if (facet != Facet::kCategory) key += "\x1f" + l.item;
    if (facet == Facet::kStatus) key += "\x1f" + std::string(status_name(l.status));
    out.insert(std::move(key));
  }
  return out;
}

inline MatchCounts label_counts(const std::set<DiagnosticLabel>& pred,
                                const std::set<DiagnosticLabel>& gold, Facet facet) {
  const auto p = project(pred, facet);
  const auto g = project(gold, facet);
  MatchCounts c;
  for (const auto& k : p) {
    if (g.count(k)) ++c.tp;
    else ++c.fp;
  }
  for (const auto& k : g) {
    if (!p.count(k)) ++c.fn;
  }
  return c;
}

inline Prf label_f1(const std::set<DiagnosticLabel>& pred, const std::set<DiagnosticLabel>& gold,
                    Facet facet) {
  return prf_from_counts(label_counts(pred, gold, facet));
}

// ---------------------------------------------------------------------------
// Corpus report

enum class F1Averaging { kMicro, kMacro };

struct EvaluationRun {
  Dialogue generated;
  Dialogue reference;
  std::set<DiagnosticLabel> predicted;
  std::set<DiagnosticLabel> gold;
  std::optional<HighLevelScores> highlevel;
};

struct DialogueScores {
  std::string id;
  std::array<double, 4> bleu{};
  double rouge_l = 0.0;
  std::array<Prf, 3> f1{};
};

struct MetricReport {
  std::array<double, 4> bleu{};
  double rouge_l = 0.0;
  std::array<Prf, 3> f1{};  // category, items, status
  std::optional<HighLevelScores> highlevel;
  std::size_t n_dialogues = 0;
  std::size_t n_highlevel = 0;
  TokenizerMode tokenizer = TokenizerMode::kWhitespaceLower;
  F1Averaging averaging = F1Averaging::kMicro;
  std::vector<DialogueScores> per_dialogue;
};

namespace detail {

/// Order-independent mean: values are sorted before summation so the result
/// is bit-identical for any permutation of the runs.
inline double stable_mean(std::vector<double> xs) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

inline std::string doctor_text(const Dialogue& d) {
  std::string joined;
  for (const auto& u : utterances_of(d, Role::kDoctor)) {
    if (!joined.empty()) joined += ' ';
    joined += u;
  }
  return joined;
}

}  // namespace detail

/// Text metrics compare the concatenated doctor utterances of each generated
/// dialogue with those of its reference and are macro-averaged over
/// dialogues. A dialogue whose two sides are both empty scores 1, one empty
/// side scores 0.
inline MetricReport corpus_report(const std::vector<EvaluationRun>& runs, TokenizerMode tok,
                                  F1Averaging averaging = F1Averaging::kMicro) {
  if (runs.empty()) throw Error(ErrorCode::kEmptyCorpus, "no runs to report");
  MetricReport rep;
  rep.tokenizer = tok;
  rep.averaging = averaging;
  rep.n_dialogues = runs.size();

  std::array<std::vector<double>, 4> bleu_vals;
  std::vector<double> rouge_vals;
  std::array<MatchCounts, 3> pooled{};
  std::array<std::array<std::vector<double>, 3>, 3> macro_vals;  // facet x (p, r, f)
  std::array<std::vector<double>, 3> hl_vals;

  for (const auto& run : runs) {
    DialogueScores ds;
    ds.id = run.generated.id();
    const Tokens cand = tokenize(detail::doctor_text(run.generated), tok);
    const Tokens ref = tokenize(detail::doctor_text(run.reference), tok);
    for (int n = 1; n <= 4; ++n) {
      ds.bleu[n - 1] = cand.empty() || ref.empty() ? (cand.empty() && ref.empty() ? 1.0 : 0.0)
                                                   : bleu_n(cand, {ref}, n);
      bleu_vals[n - 1].push_back(ds.bleu[n - 1]);
    }
    ds.rouge_l = cand.empty() || ref.empty() ? (cand.empty() && ref.empty() ? 1.0 : 0.0)
                                             : rouge_l(cand, ref);
    rouge_vals.push_back(ds.rouge_l);

    for (int f = 0; f < 3; ++f) {
      const MatchCounts c = label_counts(run.predicted, run.gold, static_cast<Facet>(f));
      pooled[f] += c;
      ds.f1[f] = prf_from_counts(c);
      macro_vals[f][0].push_back(ds.f1[f].precision);
      macro_vals[f][1].push_back(ds.f1[f].recall);
      macro_vals[f][2].push_back(ds.f1[f].f1);
    }
    if (run.highlevel) {
      hl_vals[0].push_back(run.highlevel->fluency);
      hl_vals[1].push_back(run.highlevel->professionalism);
      hl_vals[2].push_back(run.highlevel->safety);
    }
    rep.per_dialogue.push_back(std::move(ds));
  }

  for (int n = 0; n < 4; ++n) rep.bleu[n] = detail::stable_mean(bleu_vals[n]);
  rep.rouge_l = detail::stable_mean(rouge_vals);
  for (int f = 0; f < 3; ++f) {
    rep.f1[f] = averaging == F1Averaging::kMicro
                    ? prf_from_counts(pooled[f])
                    : Prf{detail::stable_mean(macro_vals[f][0]), detail::stable_mean(macro_vals[f][1]),
                          detail::stable_mean(macro_vals[f][2])};
  }
  rep.n_highlevel = hl_vals[0].size();
  if (rep.n_highlevel > 0) {
    rep.highlevel = HighLevelScores{detail::stable_mean(hl_vals[0]), detail::stable_mean(hl_vals[1]),
                                    detail::stable_mean(hl_vals[2])};
  }
  std::sort(rep.per_dialogue.begin(), rep.per_dialogue.end(),
            [](const DialogueScores& a, const DialogueScores& b) { return a.id < b.id; });
  return rep;
}

inline nlohmann::json prf_json(const Prf& p) {
  return {{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}};
}

inline nlohmann::json report_json(const MetricReport& r) {
  nlohmann::json hl = nullptr;
  if (r.highlevel) {
    hl = {{"fluency", r.highlevel->fluency},
          {"professionalism", r.highlevel->professionalism},
          {"safety", r.highlevel->safety}};
  }
  return {
      {"tokenizer", tokenizer_name(r.tokenizer)},
      {"f1_averaging", r.averaging == F1Averaging::kMicro ? "micro" : "macro"},
      {"n_dialogues", r.n_dialogues},
      {"language", {{"bleu1", r.bleu[0]}, {"bleu2", r.bleu[1]}, {"bleu3", r.bleu[2]},
                    {"bleu4", r.bleu[3]}, {"rouge", r.rouge_l}}},
      {"highlevel", hl},
      {"n_highlevel", r.n_highlevel},
      {"diagnostic_f1", {{"category", prf_json(r.f1[0])}, {"items", prf_json(r.f1[1])},
                         {"status", prf_json(r.f1[2])}}},
  };
}

inline nlohmann::json dialogue_scores_json(const DialogueScores& d) {
  return {{"id", d.id},
          {"bleu", d.bleu},
          {"rouge", d.rouge_l},
          {"f1", {{"category", d.f1[0].f1}, {"items", d.f1[1].f1}, {"status", d.f1[2].f1}}}};
}

/// Report table header, in column order.
inline const std::array<std::string_view, 11>& report_columns() {
  static const std::array<std::string_view, 11> kColumns = {
      "BLEU1", "BLEU2", "BLEU3", "BLEU4", "ROUGE", "Fluency", "Professionalism", "Safety",
      "Category", "Items", "Status"};
  return kColumns;
}

/// Fixed-width text table: language style | judged quality | label F1.
inline std::string format_report_table(const MetricReport& r) {
  const auto& cols = report_columns();
  std::array<std::string, 11> cells;
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return std::string(buf);
  };
  for (int i = 0; i < 4; ++i) cells[i] = fmt(r.bleu[i]);
  cells[4] = fmt(r.rouge_l);
  cells[5] = r.highlevel ? fmt(r.highlevel->fluency) : "-";
  cells[6] = r.highlevel ? fmt(r.highlevel->professionalism) : "-";
  cells[7] = r.highlevel ? fmt(r.highlevel->safety) : "-";
  for (int f = 0; f < 3; ++f) cells[8 + f] = fmt(r.f1[f].f1);

  std::string header, values;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i == 5 || i == 8) {
      header += "| ";
      values += "| ";
    }
    const std::size_t width = std::max<std::size_t>(cols[i].size(), 7) + 1;
    std::string h(cols[i]);
    h.resize(width, ' ');
    std::string v = cells[i];
    v.resize(width, ' ');
    header += h;
    values += v;
  }
  while (!header.empty() && header.back() == ' ') header.pop_back();
  while (!values.empty() && values.back() == ' ') values.pop_back();
  return header + "\n" + values + "\n";
}

}  // namespace triage

#endif  // TRIAGE_METRICS_HPP_
