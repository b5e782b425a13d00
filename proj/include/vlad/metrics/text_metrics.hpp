#pragma once

// Corpus BLEU-4, exact-match METEOR, ROUGE-L and CIDEr over tokenized text.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "vlad/errors.hpp"

namespace vlad {

using Tokens = std::vector<std::string>;

namespace detail {

/// Byte length of a UTF-8 whitespace sequence starting at s[i], or 0.
inline std::size_t whitespace_len(std::string_view s, std::size_t i) noexcept {
  const auto c = static_cast<unsigned char>(s[i]);
  if (c == ' ' || (c >= 0x09 && c <= 0x0D)) return 1;
  auto at = [&](std::size_t k) { return i + k < s.size() ? static_cast<unsigned char>(s[i + k]) : 0u; };
  if (c == 0xC2 && (at(1) == 0x85 || at(1) == 0xA0)) return 2;
  if (c == 0xE1 && at(1) == 0x9A && at(2) == 0x80) return 3;  // U+1680
  if (c == 0xE2 && at(1) == 0x80 && ((at(2) >= 0x80 && at(2) <= 0x8A) || at(2) == 0xA8 || at(2) == 0xA9 || at(2) == 0xAF))
    return 3;                                                       // U+2000..200A, 2028, 2029, 202F
  if (c == 0xE2 && at(1) == 0x81 && at(2) == 0x9F) return 3;  // U+205F
  if (c == 0xE3 && at(1) == 0x80 && at(2) == 0x80) return 3;  // U+3000
  return 0;
}

}  // namespace detail

/// Lowercases ASCII, splits on Unicode whitespace, strips trailing
/// punctuation from {. , ! ? ; :} and drops tokens left empty.
inline Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string cur;
  auto flush = [&] {
    while (!cur.empty() && std::string_view(".,!?;:").find(cur.back()) != std::string_view::npos) cur.pop_back();
    if (!cur.empty()) out.push_back(cur);
    cur.clear();
  };
  for (std::size_t i = 0; i < text.size();) {
    if (const auto w = detail::whitespace_len(text, i)) {
      flush();
      i += w;
      continue;
    }
    char c = text[i++];
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    cur += c;
  }
  flush();
  return out;
}

using NgramCounts = std::map<std::vector<std::string>, int>;

inline NgramCounts ngram_counts(const Tokens& t, std::size_t n) {
  NgramCounts out;
  if (t.size() < n) return out;
  for (std::size_t i = 0; i + n <= t.size(); ++i) ++out[Tokens(t.begin() + static_cast<std::ptrdiff_t>(i), t.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return out;
}

inline constexpr double kBleuSmoothing = 1e-9;

/// Corpus BLEU-4 with clipped counts, one reference per candidate, zero
/// precisions replaced by 1e-9, brevity penalty exp(1 - r/c) for c < r.
/// Scaled to [0, 100]; an empty candidate side scores 0.
inline double bleu(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references) {
  if (candidates.size() != references.size()) throw ValidationError("bleu: candidate/reference count mismatch");
  if (candidates.empty()) throw ValidationError("bleu: empty corpus");
  std::array<double, 4> match{}, total{};
  double c_len = 0, r_len = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    c_len += static_cast<double>(candidates[i].size());
    r_len += static_cast<double>(references[i].size());
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto cc = ngram_counts(candidates[i], n);
      const auto rc = ngram_counts(references[i], n);
      for (const auto& [g, count] : cc) {
        total[n - 1] += count;
        if (auto it = rc.find(g); it != rc.end()) match[n - 1] += std::min(count, it->second);
      }
    }
  }
  if (c_len == 0) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < 4; ++n) {
    double p = total[n] > 0 ? match[n] / total[n] : 0.0;
    if (p == 0.0) p = kBleuSmoothing;
    log_sum += std::log(p);
  }
  const double bp = c_len < r_len ? std::exp(1.0 - r_len / c_len) : 1.0;
  return 100.0 * bp * std::exp(log_sum / 4.0);
}

// ---------------------------------------------------------------------------
// METEOR (exact matches only)

struct Alignment {
  std::size_t matches = 0;
  std::size_t chunks = 0;
};

namespace detail {

/// Branch-and-bound over unigram alignments: every maximum-cardinality
/// alignment is a candidate; the one with fewest chunks wins. A greedy
/// chunk-extending alignment seeds the bound. Sentences whose search
/// exceeds `node_budget` keep the best alignment found so far.
class MeteorAligner {
 public:
  MeteorAligner(const Tokens& cand, const Tokens& ref, std::size_t node_budget)
      : cand_(cand), ref_(ref), used_(ref.size(), 0), budget_(node_budget) {
    std::map<std::string, int> id;
    auto word_id = [&](const std::string& w) { return id.try_emplace(w, static_cast<int>(id.size())).first->second; };
    for (const auto& w : cand_) cand_ids_.push_back(word_id(w));
    for (const auto& w : ref_) ref_ids_.push_back(word_id(w));
    cand_left_.assign(id.size(), 0);
    ref_left_.assign(id.size(), 0);
    for (int w : cand_ids_) ++cand_left_[static_cast<std::size_t>(w)];
    for (int w : ref_ids_) ++ref_left_[static_cast<std::size_t>(w)];
    for (std::size_t w = 0; w < id.size(); ++w) max_matches_ += static_cast<std::size_t>(std::min(cand_left_[w], ref_left_[w]));
  }

  Alignment solve() {
    if (max_matches_ == 0) return {};
    best_chunks_ = greedy_chunks();
    search(0, kNone, 0, 0);
    return {max_matches_, best_chunks_};
  }

 private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  std::size_t potential() const {
    std::size_t p = 0;
    for (std::size_t w = 0; w < cand_left_.size(); ++w) p += static_cast<std::size_t>(std::min(cand_left_[w], ref_left_[w]));
    return p;
  }

  std::size_t greedy_chunks() const {
    std::vector<char> used(ref_.size(), 0);
    std::size_t chunks = 0, prev = kNone;
    for (std::size_t i = 0; i < cand_.size(); ++i) {
      std::size_t pick = kNone;
      if (prev != kNone && prev + 1 < ref_.size() && !used[prev + 1] && ref_ids_[prev + 1] == cand_ids_[i]) pick = prev + 1;
      for (std::size_t j = 0; pick == kNone && j < ref_.size(); ++j)
        if (!used[j] && ref_ids_[j] == cand_ids_[i]) pick = j;
      if (pick != kNone) {
        used[pick] = 1;
        if (prev == kNone || pick != prev + 1) ++chunks;
      }
      prev = pick;
    }
    return chunks;
  }

  void search(std::size_t i, std::size_t prev, std::size_t matched, std::size_t chunks) {
    if (chunks >= best_chunks_ || nodes_++ > budget_) return;
    if (matched + potential() < max_matches_) return;
    if (i == cand_.size()) {
      best_chunks_ = chunks;  // matched == max_matches_ here
      return;
    }
    const auto w = static_cast<std::size_t>(cand_ids_[i]);
    --cand_left_[w];
    // Extending the current chunk first finds cheap alignments early.
    if (prev != kNone && prev + 1 < ref_.size() && !used_[prev + 1] && ref_ids_[prev + 1] == cand_ids_[i])
      take(i, prev + 1, matched, chunks);
    for (std::size_t j = 0; j < ref_.size(); ++j)
      if (!used_[j] && ref_ids_[j] == cand_ids_[i] && !(prev != kNone && j == prev + 1)) take(i, j, matched, chunks + 1);
    search(i + 1, kNone, matched, chunks);
    ++cand_left_[w];
  }

  void take(std::size_t i, std::size_t j, std::size_t matched, std::size_t chunks) {
    const auto w = static_cast<std::size_t>(ref_ids_[j]);
    used_[j] = 1;
    --ref_left_[w];
    search(i + 1, j, matched + 1, chunks);
    ++ref_left_[w];
    used_[j] = 0;
  }

  const Tokens& cand_;
  const Tokens& ref_;
  std::vector<int> cand_ids_, ref_ids_;
  std::vector<int> cand_left_, ref_left_;
  std::vector<char> used_;
  std::size_t max_matches_ = 0;
  std::size_t best_chunks_ = 0;
  std::size_t nodes_ = 0;
  std::size_t budget_;
};

}  // namespace detail

inline Alignment meteor_alignment(const Tokens& candidate, const Tokens& reference, std::size_t node_budget = 200'000) {
  return detail::MeteorAligner(candidate, reference, node_budget).solve();
}

/// Exact-match METEOR: F = 10PR/(R + 9P), penalty 0.5 (chunks/m)^3, x100.
inline double meteor(const Tokens& candidate, const Tokens& reference) {
  if (reference.empty()) throw ValidationError("meteor: empty reference");
  const Alignment a = meteor_alignment(candidate, reference);
  if (a.matches == 0) return 0.0;
  const double m = static_cast<double>(a.matches);
  const double p = m / static_cast<double>(candidate.size());
  const double r = m / static_cast<double>(reference.size());
  const double f = 10.0 * p * r / (r + 9.0 * p);
  const double frag = static_cast<double>(a.chunks) / m;
  return 100.0 * f * (1.0 - 0.5 * frag * frag * frag);
}

// ---------------------------------------------------------------------------
// ROUGE-L

inline std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline double rouge_l(const Tokens& candidate, const Tokens& reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const double lcs = static_cast<double>(lcs_length(candidate, reference));
  const double p = lcs / static_cast<double>(candidate.size());
  const double r = lcs / static_cast<double>(reference.size());
  if (p + r == 0.0) return 0.0;
  return 100.0 * 2.0 * p * r / (p + r);
}

// ---------------------------------------------------------------------------
// CIDEr

/// One reference per candidate. For n = 1..4, TF-IDF vectors with
/// TF = raw count and IDF = log(N / df), df counted over references; the
/// per-n score is the cosine similarity (0 if either vector is zero) and
/// the result is 10 x the mean over n.
inline double cider(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references) {
  if (candidates.size() != references.size()) throw ValidationError("cider: candidate/reference count mismatch");
  if (candidates.empty()) throw ValidationError("cider: empty corpus");
  const double n_docs = static_cast<double>(references.size());
  double total = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    std::vector<NgramCounts> ref_counts, cand_counts;
    std::map<std::vector<std::string>, int> df;
    for (const auto& r : references) {
      ref_counts.push_back(ngram_counts(r, n));
      for (const auto& [g, _] : ref_counts.back()) ++df[g];
    }
    for (const auto& c : candidates) cand_counts.push_back(ngram_counts(c, n));
    auto idf = [&](const std::vector<std::string>& g) {
      const auto it = df.find(g);
      return std::log(n_docs / static_cast<double>(it == df.end() ? 1 : it->second));
    };
    double sum = 0.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      double dot = 0.0, nc = 0.0, nr = 0.0;
      for (const auto& [g, count] : cand_counts[i]) {
        const double wc = count * idf(g);
        nc += wc * wc;
        if (auto it = ref_counts[i].find(g); it != ref_counts[i].end()) dot += wc * it->second * idf(g);
      }
      for (const auto& [g, count] : ref_counts[i]) {
        const double wr = count * idf(g);
        nr += wr * wr;
      }
      if (nc > 0.0 && nr > 0.0) sum += dot / (std::sqrt(nc) * std::sqrt(nr));
    }
    total += sum / static_cast<double>(candidates.size());
  }
  return 10.0 * total / 4.0;
}

/// Corpus scores: BLEU and CIDEr at corpus level, METEOR and ROUGE-L as the
/// mean of sentence scores.
struct TextScores {
  double bleu = 0.0;
  double meteor = 0.0;
  double rouge_l = 0.0;
  double cider = 0.0;
};

inline TextScores score_corpus(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references) {
  TextScores s;
  s.bleu = vlad::bleu(candidates, references);
  s.cider = vlad::cider(candidates, references);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    s.meteor += vlad::meteor(candidates[i], references[i]);
    s.rouge_l += vlad::rouge_l(candidates[i], references[i]);
  }
  s.meteor /= static_cast<double>(candidates.size());
  s.rouge_l /= static_cast<double>(candidates.size());
  return s;
}

}  // namespace vlad
