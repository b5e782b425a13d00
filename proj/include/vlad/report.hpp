#pragma once

#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vlad/json_io.hpp"
#include "vlad/metrics/latency.hpp"
#include "vlad/metrics/plan_metrics.hpp"
#include "vlad/metrics/text_metrics.hpp"
#include "vlad/scene.hpp"

namespace vlad::report {

/// Plain-text table with per-column width and alignment.
class TextTable {
 public:
  explicit TextTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(std::vector<std::string> row) {
    row.resize(header_.size());
    rows_.push_back(std::move(row));
  }

  /// Left-aligns the first column and right-aligns the rest.
  std::string render(const std::string& title = {}) const {
    std::vector<std::size_t> width(header_.size());
    for (std::size_t c = 0; c < header_.size(); ++c) {
      width[c] = header_[c].size();
      for (const auto& r : rows_) width[c] = std::max(width[c], r[c].size());
    }
    auto line = [&](const std::vector<std::string>& cells) {
      std::string out;
      for (std::size_t c = 0; c < cells.size(); ++c) {
        const std::string pad(width[c] - cells[c].size(), ' ');
        if (c > 0) out += "  ";
        out += c == 0 ? cells[c] + pad : pad + cells[c];
      }
      while (!out.empty() && out.back() == ' ') out.pop_back();
      return out + "\n";
    };
    std::size_t total = 0;
    for (auto w : width) total += w;
    total += 2 * (width.size() - 1);
    std::string out;
    if (!title.empty()) out += title + "\n";
    out += line(header_);
    out += std::string(total, '-') + "\n";
    for (const auto& r : rows_) out += line(r);
    return out;
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// ---------------------------------------------------------------------------
// Table I: displacement and collision

struct PlanRow {
  std::string method;
  PlanEvalRow values;
  std::size_t samples = 0;
};

inline Json horizons_json(const HorizonValues& h) {
  Json j;
  j["1s"] = h.at_1s;
  j["2s"] = h.at_2s;
  j["3s"] = h.at_3s;
  j["avg"] = h.avg;
  return j;
}

inline Json plan_json(const std::vector<PlanRow>& rows) {
  Json j;
  j["table"] = "plan";
  j["rows"] = Json::array();
  for (const auto& r : rows) {
    Json row;
    row["method"] = r.method;
    row["samples"] = r.samples;
    row["l2_m"] = horizons_json(r.values.l2);
    row["collision_pct"] = horizons_json(r.values.collision);
    j["rows"].push_back(row);
  }
  return j;
}

inline std::string plan_table(const std::vector<PlanRow>& rows) {
  TextTable t({"Method", "L2 1s", "L2 2s", "L2 3s", "L2 Avg.", "Col 1s", "Col 2s", "Col 3s", "Col Avg."});
  for (const auto& r : rows) {
    const auto& l = r.values.l2;
    const auto& c = r.values.collision;
    t.add_row({r.method, fixed(l.at_1s, 2), fixed(l.at_2s, 2), fixed(l.at_3s, 2), fixed(l.avg, 2), fixed(c.at_1s, 2),
               fixed(c.at_2s, 2), fixed(c.at_3s, 2), fixed(c.avg, 2)});
  }
  return t.render("Trajectory planning: L2 (m) and collision rate (%)");
}

// ---------------------------------------------------------------------------
// Table II: explanation quality

struct TextRow {
  std::string method;
  TextScores scores;
  std::optional<double> gpt_score;
};

inline Json text_json(const std::vector<TextRow>& rows, const std::string& format) {
  Json j;
  j["table"] = "text";
  j["format"] = format;
  j["rows"] = Json::array();
  for (const auto& r : rows) {
    Json row;
    row["method"] = r.method;
    row["bleu"] = r.scores.bleu;
    row["meteor_exact"] = r.scores.meteor;
    row["rouge_l"] = r.scores.rouge_l;
    row["cider"] = r.scores.cider;
    if (r.gpt_score) row["gpt_score"] = *r.gpt_score;
    j["rows"].push_back(row);
  }
  return j;
}

/// The GPT-Score column only appears when some row carries a judge score.
inline std::string text_table(const std::vector<TextRow>& rows) {
  bool judged = false;
  for (const auto& r : rows) judged |= r.gpt_score.has_value();
  std::vector<std::string> header = {"Method", "BLEU", "METEOR-exact", "ROUGE-L", "CIDEr"};
  if (judged) header.push_back("GPT-Score");
  TextTable t(header);
  for (const auto& r : rows) {
    std::vector<std::string> cells = {r.method, fixed(r.scores.bleu, 2), fixed(r.scores.meteor, 2),
                                      fixed(r.scores.rouge_l, 2), fixed(r.scores.cider, 2)};
    if (judged) cells.push_back(r.gpt_score ? fixed(*r.gpt_score, 2) : "-");
    t.add_row(cells);
  }
  return t.render("Explanation quality");
}

// ---------------------------------------------------------------------------
// Table III: planning accuracy

struct ActionRow {
  std::string method;
  double accuracy = 0.0;
  std::size_t samples = 0;
  /// confusion[label][decision]
  std::map<MetaAction, std::map<MetaAction, std::size_t>> confusion;
};

inline Json actions_json(const std::vector<ActionRow>& rows) {
  Json j;
  j["table"] = "actions";
  j["rows"] = Json::array();
  for (const auto& r : rows) {
    Json row;
    row["method"] = r.method;
    row["samples"] = r.samples;
    row["accuracy_pct"] = r.accuracy;
    Json conf;
    for (auto label : kAllActions) {
      Json inner;
      for (auto decided : kAllActions) {
        std::size_t n = 0;
        if (auto it = r.confusion.find(label); it != r.confusion.end())
          if (auto jt = it->second.find(decided); jt != it->second.end()) n = jt->second;
        inner[std::string(to_string(decided))] = n;
      }
      conf[std::string(to_string(label))] = inner;
    }
    row["confusion"] = conf;
    j["rows"].push_back(row);
  }
  return j;
}

inline std::string actions_table(const std::vector<ActionRow>& rows) {
  TextTable t({"Method", "Planning accuracy (%)"});
  for (const auto& r : rows) t.add_row({r.method, fixed(r.accuracy, 2)});
  std::string out = t.render("Planning accuracy");
  for (const auto& r : rows) {
    if (r.confusion.empty()) continue;
    std::vector<std::string> header = {"label \\ decision"};
    for (auto a : kAllActions) header.emplace_back(to_string(a));
    TextTable c(header);
    for (auto label : kAllActions) {
      std::vector<std::string> cells = {std::string(to_string(label))};
      for (auto decided : kAllActions) {
        std::size_t n = 0;
        if (auto it = r.confusion.find(label); it != r.confusion.end())
          if (auto jt = it->second.find(decided); jt != it->second.end()) n = jt->second;
        cells.push_back(std::to_string(n));
      }
      c.add_row(cells);
    }
    out += "\n" + c.render("Confusion counts: " + r.method);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Table IV: inference time

struct LatencyRow {
  std::string format;  ///< "Long" or "Short"
  LatencyStats stats;
  std::size_t samples = 0;
};

inline Json latency_json(const std::vector<LatencyRow>& rows, const std::string& oracle) {
  Json j;
  j["table"] = "latency";
  j["oracle"] = oracle;
  j["rows"] = Json::array();
  for (const auto& r : rows) {
    Json row;
    row["format"] = r.format;
    row["samples"] = r.samples;
    row["mean_s"] = r.stats.mean;
    row["p50_s"] = r.stats.p50;
    row["p95_s"] = r.stats.p95;
    j["rows"].push_back(row);
  }
  return j;
}

inline std::string latency_table(const std::vector<LatencyRow>& rows) {
  TextTable t({"Format", "Mean (s)", "P50 (s)", "P95 (s)"});
  for (const auto& r : rows)
    t.add_row({r.format + " Format", fixed(r.stats.mean, 3), fixed(r.stats.p50, 3), fixed(r.stats.p95, 3)});
  return t.render("Inference time");
}

}  // namespace vlad::report
