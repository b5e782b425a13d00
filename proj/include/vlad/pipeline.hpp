#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vlad/errors.hpp"
#include "vlad/external_oracle.hpp"
#include "vlad/json_io.hpp"
#include "vlad/metrics/latency.hpp"
#include "vlad/metrics/plan_metrics.hpp"
#include "vlad/metrics/text_metrics.hpp"
#include "vlad/oracle.hpp"
#include "vlad/planner.hpp"
#include "vlad/planner_train.hpp"
#include "vlad/qa.hpp"
#include "vlad/report.hpp"
#include "vlad/scene_io.hpp"
#include "vlad/simgen.hpp"

namespace vlad {

namespace fs = std::filesystem;

enum class PlannerMode { Model, GroundTruth };

/// Everything a pipeline command needs. Paths left unset resolve to the
/// standard file names inside `out`.
struct RunConfig {
  fs::path out = "vlad_out";
  std::uint64_t seed = 7;
  GenSpec gen;
  double train_frac = 0.8;
  PlannerConfig planner;
  std::size_t epochs = 50;
  double lr = 1e-2;
  std::string oracle = "rule";
  ExplanationFormat format = ExplanationFormat::Short;
  std::chrono::milliseconds oracle_timeout = kDefaultOracleTimeout;
  PlannerMode planner_mode = PlannerMode::Model;
  Extent ego_extent;
  std::size_t bench_warmup = 3;

  std::optional<fs::path> scenarios_path;
  std::optional<fs::path> train_path;
  std::optional<fs::path> eval_path;
  std::optional<fs::path> qa_path;
  std::optional<fs::path> checkpoint_path;

  fs::path scenarios_file() const { return scenarios_path.value_or(out / "scenarios.jsonl"); }
  fs::path train_file() const { return train_path.value_or(out / "train.jsonl"); }
  fs::path eval_file() const { return eval_path.value_or(out / "eval.jsonl"); }
  fs::path qa_file() const { return qa_path.value_or(out / "qa.jsonl"); }
  fs::path checkpoint_file() const { return checkpoint_path.value_or(out / "checkpoint.json"); }

  GenSpec gen_spec() const {
    GenSpec g = gen;
    g.seed = seed;
    return g;
  }

  void validate() const {
    gen_spec().validate();
    if (!(train_frac > 0.0 && train_frac < 1.0)) throw ConfigError("gen.train_frac: must be in (0, 1)");
    planner.validate();
    if (!std::isfinite(lr) || lr < 0.0) throw ConfigError("train.lr: must be finite and non-negative");
    if (oracle_timeout.count() <= 0) throw ConfigError("oracle.timeout_ms: must be positive");
    if (!(ego_extent.length > 0.0 && ego_extent.width > 0.0)) throw ConfigError("eval.ego_length/ego_width: must be positive");
  }
};

namespace detail {

inline void reject_unknown(const JsonReader& r, std::initializer_list<const char*> known) {
  if (!r.node().is_object()) r.fail("expected object");
  for (auto it = r.node().begin(); it != r.node().end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw SchemaError(r.line(), r.path().empty() ? it.key() : r.path() + "." + it.key(), "unknown key");
  }
}

inline std::size_t positive_size(const JsonReader& r) {
  const auto v = r.unsigned_integer();
  if (v == 0) r.fail("must be positive");
  return static_cast<std::size_t>(v);
}

inline RunConfig parse_run_config(const Json& j) {
  RunConfig c;
  const JsonReader root(j, 1, "");
  reject_unknown(root, {"out", "seed", "gen", "planner", "train", "oracle", "eval", "bench", "paths"});
  if (root.has("out")) c.out = root.at("out").string();
  if (root.has("seed")) c.seed = root.at("seed").unsigned_integer();
  if (root.has("gen")) {
    const auto g = root.at("gen");
    reject_unknown(g, {"n_scenarios", "suite", "agent_density", "speed_min", "speed_max", "train_frac"});
    if (g.has("n_scenarios")) c.gen.n_scenarios = positive_size(g.at("n_scenarios"));
    if (g.has("suite")) {
      const auto suite = parse_suite(g.at("suite").string());
      if (!suite) g.at("suite").fail("expected CRUISE, TURNS, HAZARD_VRU, SYMMETRIC_FORK or MIXED");
      c.gen.suite = *suite;
    }
    if (g.has("agent_density")) c.gen.agent_density = g.at("agent_density").number();
    if (g.has("speed_min")) c.gen.speed_min = g.at("speed_min").number();
    if (g.has("speed_max")) c.gen.speed_max = g.at("speed_max").number();
    if (g.has("train_frac")) c.train_frac = g.at("train_frac").number();
  }
  if (root.has("planner")) {
    const auto p = root.at("planner");
    reject_unknown(p, {"d_model", "n_heads", "hidden"});
    if (p.has("d_model")) c.planner.d_model = static_cast<int>(p.at("d_model").integer());
    if (p.has("n_heads")) c.planner.n_heads = static_cast<int>(p.at("n_heads").integer());
    if (p.has("hidden")) c.planner.hidden = static_cast<int>(p.at("hidden").integer());
  }
  if (root.has("train")) {
    const auto t = root.at("train");
    reject_unknown(t, {"epochs", "lr"});
    if (t.has("epochs")) c.epochs = static_cast<std::size_t>(t.at("epochs").unsigned_integer());
    if (t.has("lr")) c.lr = t.at("lr").number();
  }
  if (root.has("oracle")) {
    const auto o = root.at("oracle");
    reject_unknown(o, {"endpoint", "format", "timeout_ms"});
    if (o.has("endpoint")) c.oracle = o.at("endpoint").string();
    if (o.has("format")) {
      const auto f = parse_format(o.at("format").string());
      if (!f) o.at("format").fail("expected short or long");
      c.format = *f;
    }
    if (o.has("timeout_ms")) c.oracle_timeout = std::chrono::milliseconds(positive_size(o.at("timeout_ms")));
  }
  if (root.has("eval")) {
    const auto e = root.at("eval");
    reject_unknown(e, {"planner", "ego_length", "ego_width"});
    if (e.has("planner")) {
      const auto m = e.at("planner").string();
      if (m == "model") c.planner_mode = PlannerMode::Model;
      else if (m == "gt") c.planner_mode = PlannerMode::GroundTruth;
      else e.at("planner").fail("expected model or gt");
    }
    if (e.has("ego_length")) c.ego_extent.length = e.at("ego_length").number();
    if (e.has("ego_width")) c.ego_extent.width = e.at("ego_width").number();
  }
  if (root.has("bench")) {
    const auto b = root.at("bench");
    reject_unknown(b, {"warmup"});
    if (b.has("warmup")) c.bench_warmup = static_cast<std::size_t>(b.at("warmup").unsigned_integer());
  }
  if (root.has("paths")) {
    const auto p = root.at("paths");
    reject_unknown(p, {"scenarios", "train", "eval", "qa", "checkpoint"});
    if (p.has("scenarios")) c.scenarios_path = p.at("scenarios").string();
    if (p.has("train")) c.train_path = p.at("train").string();
    if (p.has("eval")) c.eval_path = p.at("eval").string();
    if (p.has("qa")) c.qa_path = p.at("qa").string();
    if (p.has("checkpoint")) c.checkpoint_path = p.at("checkpoint").string();
  }
  return c;
}

}  // namespace detail

/// Parses a run configuration; every problem surfaces as ConfigError.
inline RunConfig run_config_from_string(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  try {
    return detail::parse_run_config(j);
  } catch (const SchemaError& e) {
    throw ConfigError("config field '" + e.field() + "': " + e.what());
  }
}

/// Relative entries under "paths" are taken from the config file's directory.
inline RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  RunConfig c = run_config_from_string(ss.str());
  const fs::path base = path.parent_path();
  for (auto* p : {&c.scenarios_path, &c.train_path, &c.eval_path, &c.qa_path, &c.checkpoint_path})
    if (*p && p->value().is_relative()) *p = base / p->value();
  return c;
}

/// "rule", "const:LABEL", "exec:CMD" or "tcp:HOST:PORT".
inline std::unique_ptr<MetaActionOracle> make_oracle(const std::string& endpoint,
                                                     std::chrono::milliseconds timeout = kDefaultOracleTimeout) {
  if (endpoint == "rule") return std::make_unique<RuleOracle>();
  if (endpoint.starts_with("const:")) {
    const auto a = parse_meta_action(endpoint.substr(6));
    if (!a) throw ConfigError("oracle: unknown label in '" + endpoint + "'");
    return std::make_unique<ConstantOracle>(*a);
  }
  return std::make_unique<ExternalOracle>(endpoint, timeout);
}

enum class LogLevel { Debug, Info, Warn };
using LogSink = std::function<void(LogLevel, const std::string&)>;

/// Scores a (candidate, reference) pair on a 1-5 scale.
using JudgeHook = std::function<double(const std::string& candidate, const std::string& reference)>;

/// Results go to `out` and to files; diagnostics go to `log`.
struct CommandContext {
  RunConfig config;
  std::ostream& out;
  LogSink log = [](LogLevel, const std::string&) {};
  std::optional<JudgeHook> judge;
};

namespace detail {

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("write failed: " + path.string());
}

inline std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void write_report(const CommandContext& ctx, const std::string& stem, const Json& json, const std::string& table) {
  ensure_dir(ctx.config.out);
  write_text(ctx.config.out / (stem + ".json"), json.dump(2) + "\n");
  write_text(ctx.config.out / (stem + ".txt"), table);
  ctx.out << table;
}

inline std::vector<Scenario> load_nonempty(const fs::path& path) {
  auto s = load_scenarios(path);
  if (s.empty()) throw ValidationError("no scenarios in " + path.string());
  return s;
}

inline Trajectory constant_velocity_baseline(const EgoState& ego) {
  Trajectory t;
  const Vec2 dir{std::cos(ego.heading), std::sin(ego.heading)};
  for (std::size_t k = 0; k < kFutureSteps; ++k)
    t[k] = ego.position + (ego.speed * kStepSeconds * static_cast<double>(k + 1)) * dir;
  return t;
}

}  // namespace detail

inline void cmd_simgen(const CommandContext& ctx) {
  const auto& c = ctx.config;
  c.validate();
  const auto all = generate(c.gen_spec());
  const auto [train_set, eval_set] = split(all, c.train_frac, c.seed);
  detail::ensure_dir(c.out);
  save_scenarios(all, c.scenarios_file());
  save_scenarios(train_set, c.train_file());
  save_scenarios(eval_set, c.eval_file());
  ctx.log(LogLevel::Info, "wrote " + c.scenarios_file().string());
  ctx.out << "suite " << to_string(c.gen.suite) << ": " << all.size() << " scenarios (" << train_set.size() << " train, "
          << eval_set.size() << " eval)\n";
}

inline void cmd_qagen(const CommandContext& ctx) {
  const auto& c = ctx.config;
  const auto scenarios = load_scenarios(c.scenarios_file());
  std::vector<QAItem> items;
  for (const auto& s : scenarios) {
    auto qa = generate_qa(s);
    items.insert(items.end(), qa.begin(), qa.end());
  }
  detail::ensure_dir(c.out);
  save_qa(items, c.qa_file());
  std::map<QaTask, std::size_t> per_task;
  std::map<MetaAction, std::size_t> per_action;
  for (const auto& q : items) {
    ++per_task[q.task];
    if (q.gt_action) ++per_action[*q.gt_action];
  }
  ctx.out << "qa items: " << items.size() << "\n";
  for (auto t : {QaTask::Perception, QaTask::Prediction, QaTask::Planning})
    ctx.out << "  " << to_string(t) << ": " << per_task[t] << "\n";
  ctx.out << "planning gt_action:\n";
  for (auto a : kAllActions) ctx.out << "  " << to_string(a) << ": " << per_action[a] << "\n";
}

inline TrainResult cmd_train(const CommandContext& ctx) {
  const auto& c = ctx.config;
  c.validate();
  const auto scenarios = detail::load_nonempty(c.train_file());
  auto oracle = make_oracle(c.oracle, c.oracle_timeout);
  ctx.log(LogLevel::Info, "training on " + std::to_string(scenarios.size()) + " scenarios");
  auto result = train(init_model(c.planner, c.seed), scenarios, *oracle, c.epochs, c.lr, c.seed);
  detail::ensure_dir(c.out);
  save_checkpoint(result.model, c.checkpoint_file());
  std::string csv = "epoch,mean_loss\n";
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", e + 1, result.epoch_loss[e]);
    csv += buf;
  }
  detail::write_text(c.out / "loss_curve.csv", csv);
  ctx.out << "epochs " << c.epochs << ", lr " << c.lr << "\n";
  if (!result.epoch_loss.empty())
    ctx.out << "mean loss: first epoch " << report::fixed(result.epoch_loss.front(), 6) << ", last epoch "
            << report::fixed(result.epoch_loss.back(), 6) << "\n";
  ctx.out << "checkpoint: " << c.checkpoint_file().string() << "\n";
  return result;
}

inline std::vector<report::PlanRow> cmd_eval_plan(const CommandContext& ctx) {
  const auto& c = ctx.config;
  c.validate();
  const auto scenarios = detail::load_nonempty(c.eval_file());
  std::optional<PlannerModel> model;
  if (c.planner_mode == PlannerMode::Model) model = load_checkpoint(c.checkpoint_file());
  auto oracle = make_oracle(c.oracle, c.oracle_timeout);

  PlanEvalAccumulator planned, baseline;
  for (const auto& s : scenarios) {
    Trajectory pred = s.gt_future;
    if (model) pred = forward(*model, s, oracle->decide(s, ExplanationFormat::Short).action);
    planned.add(l2_horizons(pred, s.gt_future),
                collision_horizons(pred, c.ego_extent, s.agents, s.ego.position, s.ego.heading));
    const auto base = detail::constant_velocity_baseline(s.ego);
    baseline.add(l2_horizons(base, s.gt_future),
                 collision_horizons(base, c.ego_extent, s.agents, s.ego.position, s.ego.heading));
  }
  const std::string method = model ? "Planner (oracle " + oracle->name() + ")" : "Ground-truth replay";
  std::vector<report::PlanRow> rows = {{method, planned.mean(), planned.count()},
                                       {"Constant-velocity baseline", baseline.mean(), baseline.count()}};
  detail::write_report(ctx, "report_plan", report::plan_json(rows), report::plan_table(rows));
  return rows;
}

inline report::TextRow cmd_eval_text(const CommandContext& ctx) {
  const auto& c = ctx.config;
  c.validate();
  const auto scenarios = detail::load_nonempty(c.eval_file());
  auto oracle = make_oracle(c.oracle, c.oracle_timeout);
  std::vector<Tokens> cand, ref;
  double judged = 0.0;
  for (const auto& s : scenarios) {
    const auto candidate = oracle->decide(s, c.format).rationale(c.format);
    const auto reference = rule_oracle_decide(s, c.format).rationale(c.format);
    cand.push_back(tokenize(candidate));
    ref.push_back(tokenize(reference));
    if (ctx.judge) {
      const double g = (*ctx.judge)(candidate, reference);
      if (!(g >= 1.0 && g <= 5.0)) throw ValidationError("judge score outside [1, 5]: " + std::to_string(g));
      judged += g;
    }
  }
  report::TextRow row{oracle->name() + " (" + std::string(to_string(c.format)) + ")", score_corpus(cand, ref), {}};
  if (ctx.judge) row.gpt_score = judged / static_cast<double>(scenarios.size());
  detail::write_report(ctx, "report_text", report::text_json({row}, std::string(to_string(c.format))),
                       report::text_table({row}));
  return row;
}

inline report::ActionRow cmd_eval_actions(const CommandContext& ctx) {
  const auto& c = ctx.config;
  c.validate();
  const auto scenarios = load_scenarios(c.scenarios_file());
  std::map<std::string, const Scenario*> by_id;
  for (const auto& s : scenarios) by_id[s.id] = &s;
  const auto qa = load_qa(c.qa_file());
  auto oracle = make_oracle(c.oracle, c.oracle_timeout);

  std::vector<MetaAction> decisions, labels;
  report::ActionRow row;
  row.method = oracle->name();
  for (const auto& q : qa) {
    if (q.task != QaTask::Planning) continue;
    auto it = by_id.find(q.scenario_id);
    if (it == by_id.end())
      throw ValidationError("qa item refers to scenario '" + q.scenario_id + "' missing from " +
                            c.scenarios_file().string());
    const auto d = oracle->decide(*it->second, c.format).action;
    decisions.push_back(d);
    labels.push_back(*q.gt_action);
    ++row.confusion[*q.gt_action][d];
  }
  row.accuracy = planning_accuracy(decisions, labels);
  row.samples = labels.size();
  detail::write_report(ctx, "report_actions", report::actions_json({row}), report::actions_table({row}));
  return row;
}

/// Wall-clock decide() latency per format; warm-up calls are not recorded.
inline std::vector<report::LatencyRow> cmd_bench_oracle(const CommandContext& ctx) {
  const auto& c = ctx.config;
  c.validate();
  const auto scenarios = detail::load_nonempty(c.eval_file());
  auto oracle = make_oracle(c.oracle, c.oracle_timeout);
  std::vector<report::LatencyRow> rows;
  for (auto fmt : {ExplanationFormat::Long, ExplanationFormat::Short}) {
    for (std::size_t i = 0; i < c.bench_warmup; ++i) oracle->decide(scenarios[i % scenarios.size()], fmt);
    std::vector<double> samples;
    samples.reserve(scenarios.size());
    for (const auto& s : scenarios) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto d = oracle->decide(s, fmt);
      const auto t1 = std::chrono::steady_clock::now();
      (void)d;
      samples.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    rows.push_back({fmt == ExplanationFormat::Long ? "Long" : "Short", latency_stats(samples), samples.size()});
  }
  detail::write_report(ctx, "report_latency", report::latency_json(rows, oracle->name()), report::latency_table(rows));
  return rows;
}

/// Collects whichever per-table reports exist in the output directory.
inline void cmd_report(const CommandContext& ctx) {
  const auto& c = ctx.config;
  Json merged;
  std::string text;
  for (const char* stem : {"report_plan", "report_text", "report_actions", "report_latency"}) {
    const auto json_path = c.out / (std::string(stem) + ".json");
    if (!fs::exists(json_path)) continue;
    try {
      merged[std::string(stem).substr(7)] = Json::parse(detail::read_text(json_path));
    } catch (const Json::parse_error&) {
      throw IoError("corrupt report file " + json_path.string());
    }
    if (!text.empty()) text += "\n";
    text += detail::read_text(c.out / (std::string(stem) + ".txt"));
  }
  if (merged.is_null()) throw IoError("no report_*.json files in " + c.out.string());
  detail::write_text(c.out / "report.json", merged.dump(2) + "\n");
  detail::write_text(c.out / "report.txt", text);
  ctx.out << text;
}

}  // namespace vlad
