#pragma once

// SGD training with commands from a frozen oracle, and checkpoint I/O.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "vlad/json_io.hpp"
#include "vlad/oracle.hpp"
#include "vlad/planner.hpp"
#include "vlad/rng.hpp"

namespace vlad {

struct TrainResult {
  PlannerModel model;
  std::vector<double> epoch_loss;  ///< mean per-sample loss seen during each epoch
};

/// params += alpha * other
inline void axpy(PlannerParams& params, double alpha, const PlannerParams& other) {
  std::vector<double*> targets;
  params.for_each([&](const std::string&, auto& a) { targets.push_back(a.data()); });
  std::size_t i = 0;
  other.for_each([&](const std::string&, const auto& a) {
    double* t = targets[i++];
    for (Eigen::Index k = 0; k < a.size(); ++k) t[k] += alpha * a.data()[k];
  });
}

/// Plain per-sample SGD over a freshly shuffled order each epoch. Commands
/// come from the frozen oracle (SHORT format, queried once per scenario).
/// Per-epoch losses are reduced in scenario order, so lr = 0 gives an
/// exactly flat curve.
inline TrainResult train(PlannerModel model, const std::vector<Scenario>& scenarios, MetaActionOracle& oracle,
                         std::size_t epochs, double lr, std::uint64_t seed) {
  if (scenarios.empty()) throw ConfigError("train: empty scenario list");
  if (!std::isfinite(lr) || lr < 0.0) throw ConfigError("train.lr: must be finite and non-negative");
  model.config.validate();

  std::vector<MetaAction> commands;
  commands.reserve(scenarios.size());
  for (const auto& s : scenarios) commands.push_back(oracle.decide(s, ExplanationFormat::Short).action);

  std::vector<std::size_t> order(scenarios.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  SplitMix64 rng(seed);
  TrainResult result{model, {}};
  std::vector<double> losses(scenarios.size());
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    shuffle(order, rng);
    for (std::size_t idx : order) {
      auto [loss, grads] = backward(result.model, scenarios[idx], commands[idx], scenarios[idx].gt_future);
      if (!std::isfinite(loss) || !grads.all_finite()) {
        std::ostringstream msg;
        msg << "training diverged at epoch " << epoch + 1 << " on scenario '" << scenarios[idx].id << "' (loss " << loss
            << "); the learning rate " << lr << " is likely too high";
        throw DivergenceError(msg.str());
      }
      losses[idx] = loss;
      if (lr != 0.0) axpy(result.model.params, -lr, grads);
    }
    double sum = 0.0;
    for (double l : losses) sum += l;
    result.epoch_loss.push_back(sum / static_cast<double>(losses.size()));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints

inline Json config_to_json(const PlannerConfig& c) {
  Json j;
  j["a_max"] = c.a_max;
  j["d_model"] = c.d_model;
  j["hidden"] = c.hidden;
  j["m_max"] = c.m_max;
  j["n_heads"] = c.n_heads;
  j["p_m"] = c.p_m;
  j["t_f"] = c.t_f;
  return j;
}

inline PlannerConfig config_from_json(const JsonReader& r) {
  PlannerConfig c;
  c.d_model = static_cast<int>(r.at("d_model").integer());
  c.n_heads = static_cast<int>(r.at("n_heads").integer());
  c.hidden = static_cast<int>(r.at("hidden").integer());
  if (r.has("t_f")) c.t_f = static_cast<std::size_t>(r.at("t_f").unsigned_integer());
  if (r.has("a_max")) c.a_max = static_cast<std::size_t>(r.at("a_max").unsigned_integer());
  if (r.has("m_max")) c.m_max = static_cast<std::size_t>(r.at("m_max").unsigned_integer());
  if (r.has("p_m")) c.p_m = static_cast<std::size_t>(r.at("p_m").unsigned_integer());
  return c;
}

namespace detail {

template <class A>
Json array_to_json(const A& a, bool is_vector) {
  Json shape = is_vector ? Json::array({a.rows()}) : Json::array({a.rows(), a.cols()});
  Json data = Json::array();
  for (Eigen::Index r = 0; r < a.rows(); ++r)
    for (Eigen::Index c = 0; c < a.cols(); ++c) data.push_back(a(r, c));
  Json j;
  j["shape"] = std::move(shape);
  j["data"] = std::move(data);
  return j;
}

}  // namespace detail

/// {"version":1,"config":{...},"params":{name:{"shape":[...],"data":[...]}}}
/// with parameter names sorted and data row-major.
inline std::string checkpoint_to_string(const PlannerModel& m) {
  std::map<std::string, Json> sorted;
  m.params.for_each([&](const std::string& name, const auto& a) {
    constexpr bool is_vec = std::decay_t<decltype(a)>::ColsAtCompileTime == 1;
    sorted.emplace(name, detail::array_to_json(a, is_vec));
  });
  Json params = Json::object();
  for (auto& [k, v] : sorted) params[k] = std::move(v);
  Json j;
  j["version"] = 1;
  j["config"] = config_to_json(m.config);
  j["params"] = std::move(params);
  return dump_deterministic(j) + "\n";
}

inline PlannerModel checkpoint_from_string(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw SchemaError(1, "", std::string("invalid checkpoint JSON: ") + e.what());
  }
  const JsonReader root(j, 1, "");
  if (root.at("version").integer() != 1) root.at("version").fail("unsupported checkpoint version");
  PlannerModel m;
  m.config = config_from_json(root.at("config"));
  try {
    m.config.validate();
  } catch (const ConfigError& e) {
    root.at("config").fail(e.what());
  }
  m.params = PlannerParams::zeros(m.config);
  const auto params = root.at("params");
  if (!params.node().is_object()) params.fail("expected object");
  std::size_t expected = 0;
  m.params.for_each([&](const std::string& name, auto& a) {
    ++expected;
    constexpr bool is_vec = std::decay_t<decltype(a)>::ColsAtCompileTime == 1;
    const auto entry = params.at(name);
    const auto shape = entry.at("shape");
    const std::size_t dims = shape.array_size();
    const bool shape_ok =
        is_vec ? (dims == 1 && shape.at(std::size_t{0}).integer() == a.rows())
               : (dims == 2 && shape.at(std::size_t{0}).integer() == a.rows() && shape.at(std::size_t{1}).integer() == a.cols());
    if (!shape_ok) shape.fail("shape does not match the configured architecture");
    const auto data = entry.at("data");
    if (data.array_size() != static_cast<std::size_t>(a.size())) data.fail("element count does not match shape");
    std::size_t i = 0;
    for (Eigen::Index r = 0; r < a.rows(); ++r)
      for (Eigen::Index c = 0; c < a.cols(); ++c) a(r, c) = data.at(i++).number();
  });
  if (params.node().size() != expected) params.fail("unknown parameter names present");
  return m;
}

inline void save_checkpoint(const PlannerModel& m, const std::filesystem::path& path) {
  const std::string text = checkpoint_to_string(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << text;
}

inline PlannerModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_string(buf.str());
}

}  // namespace vlad
