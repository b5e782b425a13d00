#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "vlad/pipeline.hpp"

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kIo = 3, kDivergence = 4, kOracle = 5 };

std::shared_ptr<spdlog::logger> make_logger() {
  auto logger = spdlog::stderr_logger_st("vlad");
  logger->set_pattern("[%l] %v");
  logger->set_level(spdlog::level::warn);
  if (const char* env = std::getenv("VLAD_LOG")) {
    const std::string v = env;
    if (v == "debug") logger->set_level(spdlog::level::debug);
    else if (v == "info") logger->set_level(spdlog::level::info);
    else if (v != "warn") logger->warn("VLAD_LOG='{}' not recognised; using warn", v);
  }
  return logger;
}

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> suite;
  std::optional<std::size_t> n;
  std::optional<double> train_frac;
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
  std::optional<std::string> oracle;
  std::optional<std::string> format;
  std::optional<std::string> out;
  std::optional<std::string> planner;
  std::optional<std::string> scenarios;
  std::optional<std::string> qa;
  std::optional<std::string> checkpoint;
  std::optional<std::size_t> timeout_ms;
};

vlad::RunConfig resolve(const Overrides& o, const std::string& command) {
  vlad::RunConfig c = o.config.empty() ? vlad::RunConfig{} : vlad::load_run_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.suite) {
    const auto s = vlad::parse_suite(*o.suite);
    if (!s) throw vlad::ConfigError("--suite: unknown suite '" + *o.suite + "'");
    c.gen.suite = *s;
  }
  if (o.n) c.gen.n_scenarios = *o.n;
  if (o.train_frac) c.train_frac = *o.train_frac;
  if (o.epochs) c.epochs = *o.epochs;
  if (o.lr) c.lr = *o.lr;
  if (o.oracle) c.oracle = *o.oracle;
  if (o.format) {
    const auto f = vlad::parse_format(*o.format);
    if (!f) throw vlad::ConfigError("--format: expected short or long");
    c.format = *f;
  }
  if (o.out) c.out = *o.out;
  if (o.planner) {
    if (*o.planner == "model") c.planner_mode = vlad::PlannerMode::Model;
    else if (*o.planner == "gt") c.planner_mode = vlad::PlannerMode::GroundTruth;
    else throw vlad::ConfigError("--planner: expected model or gt");
  }
  if (o.scenarios) {
    if (command == "train") c.train_path = *o.scenarios;
    else if (command == "eval-plan" || command == "eval-text" || command == "bench-oracle") c.eval_path = *o.scenarios;
    else c.scenarios_path = *o.scenarios;
  }
  if (o.qa) c.qa_path = *o.qa;
  if (o.checkpoint) c.checkpoint_path = *o.checkpoint;
  if (o.timeout_ms) c.oracle_timeout = std::chrono::milliseconds(*o.timeout_ms);
  return c;
}

void add_common(CLI::App& app, Overrides& o) {
  app.add_option("--config", o.config, "Run configuration (JSON)");
  app.add_option("--seed", o.seed, "Seed for generation, split, init and shuffling");
  app.add_option("--suite", o.suite, "CRUISE | TURNS | HAZARD_VRU | SYMMETRIC_FORK | MIXED");
  app.add_option("--n", o.n, "Number of scenarios to generate");
  app.add_option("--train-frac", o.train_frac, "Train fraction for the split");
  app.add_option("--epochs", o.epochs, "Training epochs");
  app.add_option("--lr", o.lr, "SGD learning rate");
  app.add_option("--oracle", o.oracle, "rule | const:LABEL | exec:CMD | tcp:HOST:PORT");
  app.add_option("--format", o.format, "Rationale format: short | long");
  app.add_option("--out", o.out, "Output directory");
  app.add_option("--planner", o.planner, "eval-plan predictions: model | gt");
  app.add_option("--scenarios", o.scenarios, "Scenario JSONL read by the command");
  app.add_option("--qa", o.qa, "QA JSONL path");
  app.add_option("--checkpoint", o.checkpoint, "Checkpoint path");
  app.add_option("--timeout-ms", o.timeout_ms, "External oracle reply timeout");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Command-conditioned planner with a meta-action oracle: data, training and evaluation"};
  app.require_subcommand(1);
  Overrides o;
  const char* names[][2] = {{"simgen", "Generate scenario JSONL and the train/eval split"},
                            {"qagen", "Generate perception/prediction/planning QA pairs"},
                            {"train", "Train the planner with commands from the frozen oracle"},
                            {"eval-plan", "L2 and collision table"},
                            {"eval-text", "Explanation quality table"},
                            {"eval-actions", "Planning accuracy table"},
                            {"bench-oracle", "Oracle latency table"},
                            {"report", "Collect all tables in the output directory"}};
  for (auto& [name, help] : names) add_common(*app.add_subcommand(name, help), o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  auto logger = make_logger();
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    vlad::CommandContext ctx{resolve(o, command), std::cout, [logger](vlad::LogLevel level, const std::string& msg) {
                               switch (level) {
                                 case vlad::LogLevel::Debug: logger->debug(msg); break;
                                 case vlad::LogLevel::Info: logger->info(msg); break;
                                 case vlad::LogLevel::Warn: logger->warn(msg); break;
                               }
                             },
                             std::nullopt};
    logger->debug("command {} with output directory {}", command, ctx.config.out.string());
    if (command == "simgen") vlad::cmd_simgen(ctx);
    else if (command == "qagen") vlad::cmd_qagen(ctx);
    else if (command == "train") vlad::cmd_train(ctx);
    else if (command == "eval-plan") vlad::cmd_eval_plan(ctx);
    else if (command == "eval-text") vlad::cmd_eval_text(ctx);
    else if (command == "eval-actions") vlad::cmd_eval_actions(ctx);
    else if (command == "bench-oracle") vlad::cmd_bench_oracle(ctx);
    else vlad::cmd_report(ctx);
  } catch (const vlad::ConfigError& e) {
    logger->error("config error: {}", e.what());
    return kConfig;
  } catch (const vlad::DivergenceError& e) {
    logger->error("{}", e.what());
    return kDivergence;
  } catch (const vlad::OracleError& e) {
    logger->error("external oracle failure: {}", e.what());
    return kOracle;
  } catch (const vlad::Error& e) {
    logger->error("input/output error: {}", e.what());
    return kIo;
  } catch (const std::exception& e) {
    logger->error("unexpected error: {}", e.what());
    return kIo;
  }
  std::cout.flush();
  return kOk;
}
