#include "fastsverl/config.h"

#include <algorithm>
#include <fstream>
#include <set>

#include "fastsverl/errors.h"

namespace fastsverl {

using nlohmann::json;

namespace {

void CheckKeys(const json& j, const std::set<std::string>& allowed,
               const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) {
      throw ConfigError("unknown key '" + item.key() + "' in " + where);
    }
  }
}

template <typename T>
void Read(const json& j, const char* key, const std::string& where, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad type for " + where + "." + key);
  }
}

template <typename T>
void RequireRange(bool ok, const std::string& what, T value) {
  if (!ok) {
    throw ConfigError(what + " out of range (" + std::to_string(value) + ")");
  }
}

ModelConfig ParseModel(const json& j, const std::string& where,
                       DistributionSampler::Weighting* weighting) {
  std::set<std::string> keys{"hidden",     "learning_rate", "lr_final_factor",
                             "batch_size", "updates",       "optimizer",
                             "eval_every", "mask_value"};
  if (weighting) keys.insert("weighting");
  CheckKeys(j, keys, where);
  ModelConfig m;
  Read(j, "hidden", where, m.hidden);
  Read(j, "learning_rate", where, m.learning_rate);
  Read(j, "lr_final_factor", where, m.lr_final_factor);
  Read(j, "batch_size", where, m.batch_size);
  Read(j, "updates", where, m.updates);
  Read(j, "eval_every", where, m.eval_every);
  Read(j, "mask_value", where, m.mask_value);
  std::string optimizer = "adam";
  Read(j, "optimizer", where, optimizer);
  if (optimizer == "adam") {
    m.optimizer = OptimizerKind::kAdam;
  } else if (optimizer == "sgd") {
    m.optimizer = OptimizerKind::kSgd;
  } else {
    throw ConfigError(where + ".optimizer must be adam or sgd");
  }
  if (weighting && j.contains("weighting")) {
    std::string w;
    Read(j, "weighting", where, w);
    *weighting = ParseWeighting(w);
  }
  for (int h : m.hidden) RequireRange(h > 0, where + ".hidden", h);
  RequireRange(m.learning_rate > 0.0, where + ".learning_rate", m.learning_rate);
  RequireRange(m.lr_final_factor > 0.0 && m.lr_final_factor <= 1.0,
               where + ".lr_final_factor", m.lr_final_factor);
  RequireRange(m.batch_size > 0, where + ".batch_size", m.batch_size);
  RequireRange(m.updates >= 0, where + ".updates", m.updates);
  RequireRange(m.eval_every > 0, where + ".eval_every", m.eval_every);
  return m;
}

json ModelJson(const ModelConfig& m) {
  return {{"hidden", m.hidden},
          {"learning_rate", m.learning_rate},
          {"lr_final_factor", m.lr_final_factor},
          {"batch_size", m.batch_size},
          {"updates", m.updates},
          {"optimizer", m.optimizer == OptimizerKind::kAdam ? "adam" : "sgd"},
          {"eval_every", m.eval_every},
          {"mask_value", m.mask_value}};
}

std::string WeightingName(DistributionSampler::Weighting w) {
  return w == DistributionSampler::Weighting::kProbability ? "probability"
                                                           : "uniform";
}

EnvConfig ParseEnv(const json& j) {
  CheckKeys(j,
            {"name", "code_len", "max_guesses", "alphabet_size", "dims", "side",
             "gamma", "max_episode_steps"},
            "env");
  EnvConfig e;
  Read(j, "name", "env", e.name);
  Read(j, "code_len", "env", e.code_len);
  Read(j, "max_guesses", "env", e.max_guesses);
  Read(j, "alphabet_size", "env", e.alphabet_size);
  Read(j, "dims", "env", e.dims);
  Read(j, "side", "env", e.side);
  Read(j, "gamma", "env", e.gamma);
  Read(j, "max_episode_steps", "env", e.max_episode_steps);
  if (e.name != "gridworld" && e.name != "mastermind" && e.name != "hypercube") {
    throw ConfigError("env.name must be gridworld, mastermind or hypercube");
  }
  RequireRange(e.gamma < 0.0 || e.gamma <= 1.0, "env.gamma", e.gamma);
  RequireRange(e.max_episode_steps >= 0, "env.max_episode_steps",
               e.max_episode_steps);
  return e;
}

AgentConfig ParseAgent(const json& j) {
  CheckKeys(j,
            {"kind", "total_steps", "learning_starts", "train_every",
             "batch_size", "learning_rate", "hidden", "eps_start", "eps_end",
             "eps_decay_steps", "target_sync", "buffer_capacity",
             "snapshot_every"},
            "agent");
  AgentConfig a;
  DqnConfig& d = a.dqn;
  Read(j, "kind", "agent", a.kind);
  Read(j, "total_steps", "agent", d.total_steps);
  Read(j, "learning_starts", "agent", d.learning_starts);
  Read(j, "train_every", "agent", d.train_every);
  Read(j, "batch_size", "agent", d.batch_size);
  Read(j, "learning_rate", "agent", d.learning_rate);
  Read(j, "hidden", "agent", d.hidden);
  Read(j, "eps_start", "agent", d.eps_start);
  Read(j, "eps_end", "agent", d.eps_end);
  Read(j, "eps_decay_steps", "agent", d.eps_decay_steps);
  Read(j, "target_sync", "agent", d.target_sync);
  Read(j, "buffer_capacity", "agent", d.buffer_capacity);
  Read(j, "snapshot_every", "agent", d.snapshot_every);
  if (a.kind != "dqn" && a.kind != "optimal") {
    throw ConfigError("agent.kind must be dqn or optimal");
  }
  RequireRange(d.total_steps > 0, "agent.total_steps", d.total_steps);
  RequireRange(d.train_every > 0, "agent.train_every", d.train_every);
  RequireRange(d.batch_size > 0, "agent.batch_size", d.batch_size);
  RequireRange(d.eps_end >= 0.0 && d.eps_end <= d.eps_start && d.eps_start <= 1.0,
               "agent epsilon schedule", d.eps_end);
  RequireRange(d.target_sync > 0, "agent.target_sync", d.target_sync);
  RequireRange(d.buffer_capacity > 0, "agent.buffer_capacity",
               d.buffer_capacity);
  return a;
}

json AgentJson(const AgentConfig& a) {
  const DqnConfig& d = a.dqn;
  return {{"kind", a.kind},
          {"total_steps", d.total_steps},
          {"learning_starts", d.learning_starts},
          {"train_every", d.train_every},
          {"batch_size", d.batch_size},
          {"learning_rate", d.learning_rate},
          {"hidden", d.hidden},
          {"eps_start", d.eps_start},
          {"eps_end", d.eps_end},
          {"eps_decay_steps", d.eps_decay_steps},
          {"target_sync", d.target_sync},
          {"buffer_capacity", d.buffer_capacity},
          {"snapshot_every", d.snapshot_every}};
}

ISConfig ParseIsValue(const json& j, const std::string& where) {
  if (!j.is_string()) throw ConfigError(where + " must be a string");
  return ParseISConfig(j.get<std::string>());
}

}  // namespace

RunConfig ParseConfig(const json& j) {
  CheckKeys(j,
            {"schema_version", "experiment", "env", "agent", "steady_state",
             "char_model", "shapley_model", "outcome", "targets", "offpolicy",
             "continual", "hypercube", "threshold", "seeds", "output_dir"},
            "config");
  RunConfig c;
  if (!j.contains("schema_version")) {
    throw ConfigError("config is missing schema_version");
  }
  Read(j, "schema_version", "config", c.schema_version);
  if (c.schema_version != kSchemaVersion) {
    throw ConfigError("unsupported schema_version " +
                      std::to_string(c.schema_version) + " (expected " +
                      std::to_string(kSchemaVersion) + ")");
  }
  Read(j, "experiment", "config", c.experiment);
  if (j.contains("env")) c.env = ParseEnv(j["env"]);
  if (j.contains("agent")) c.agent = ParseAgent(j["agent"]);
  if (j.contains("steady_state")) {
    const json& s = j["steady_state"];
    CheckKeys(s, {"mode", "episodes"}, "steady_state");
    std::string mode = "analytic";
    Read(s, "mode", "steady_state", mode);
    if (mode == "analytic") {
      c.steady_state.mode = StateDistribution::Mode::kAnalytic;
    } else if (mode == "empirical") {
      c.steady_state.mode = StateDistribution::Mode::kEmpirical;
    } else {
      throw ConfigError("steady_state.mode must be analytic or empirical");
    }
    Read(s, "episodes", "steady_state", c.steady_state.episodes);
    RequireRange(c.steady_state.episodes > 0, "steady_state.episodes",
                 c.steady_state.episodes);
  }
  if (j.contains("char_model")) {
    c.char_model = ParseModel(j["char_model"], "char_model", &c.char_weighting);
  }
  if (j.contains("shapley_model")) {
    c.shapley_model =
        ParseModel(j["shapley_model"], "shapley_model", &c.shapley_weighting);
  }
  if (j.contains("outcome")) {
    const json& o = j["outcome"];
    CheckKeys(o,
              {"model", "target_sync", "env_steps_per_update",
               "buffer_capacity", "learning_starts", "variants"},
              "outcome");
    if (o.contains("model")) {
      c.outcome.model = ParseModel(o["model"], "outcome.model", nullptr);
    }
    Read(o, "target_sync", "outcome", c.outcome.target_sync);
    Read(o, "env_steps_per_update", "outcome", c.outcome.env_steps_per_update);
    Read(o, "buffer_capacity", "outcome", c.outcome.buffer_capacity);
    Read(o, "learning_starts", "outcome", c.outcome.learning_starts);
    if (o.contains("variants")) {
      std::vector<std::string> names;
      Read(o, "variants", "outcome", names);
      c.outcome_variants.clear();
      for (const auto& n : names) c.outcome_variants.push_back(ParseOutcomeVariant(n));
    }
    RequireRange(c.outcome.target_sync > 0, "outcome.target_sync",
                 c.outcome.target_sync);
    RequireRange(c.outcome.env_steps_per_update > 0,
                 "outcome.env_steps_per_update",
                 c.outcome.env_steps_per_update);
    RequireRange(c.outcome.buffer_capacity > 0, "outcome.buffer_capacity",
                 c.outcome.buffer_capacity);
  }
  if (j.contains("targets")) {
    std::vector<std::string> names;
    Read(j, "targets", "config", names);
    c.targets.clear();
    for (const auto& n : names) c.targets.push_back(ParseTargetKind(n));
  }
  if (j.contains("offpolicy")) {
    const json& o = j["offpolicy"];
    CheckKeys(o, {"is_modes"}, "offpolicy");
    if (o.contains("is_modes")) {
      if (!o["is_modes"].is_array()) {
        throw ConfigError("offpolicy.is_modes must be a list");
      }
      c.offpolicy.is_modes.clear();
      for (const auto& m : o["is_modes"]) {
        c.offpolicy.is_modes.push_back(ParseIsValue(m, "offpolicy.is_modes"));
      }
    }
  }
  if (j.contains("continual")) {
    const json& o = j["continual"];
    CheckKeys(o, {"kind", "ratios", "is", "eval_every"}, "continual");
    if (o.contains("kind")) {
      std::string kind;
      Read(o, "kind", "continual", kind);
      c.continual.kind = ParseTargetKind(kind);
    }
    Read(o, "ratios", "continual", c.continual.ratios);
    if (o.contains("is")) c.continual.is = ParseIsValue(o["is"], "continual.is");
    Read(o, "eval_every", "continual", c.continual.eval_every);
    for (int r : c.continual.ratios) RequireRange(r >= 1, "continual.ratios", r);
    RequireRange(c.continual.eval_every > 0, "continual.eval_every",
                 c.continual.eval_every);
  }
  if (j.contains("hypercube")) {
    const json& o = j["hypercube"];
    CheckKeys(o, {"dims", "sides", "max_updates"}, "hypercube");
    Read(o, "dims", "hypercube", c.hypercube.dims);
    Read(o, "sides", "hypercube", c.hypercube.sides);
    Read(o, "max_updates", "hypercube", c.hypercube.max_updates);
    for (int d : c.hypercube.dims) RequireRange(d >= 1, "hypercube.dims", d);
    for (int l : c.hypercube.sides) RequireRange(l >= 2, "hypercube.sides", l);
    RequireRange(c.hypercube.max_updates > 0, "hypercube.max_updates",
                 c.hypercube.max_updates);
  }
  Read(j, "threshold", "config", c.threshold);
  RequireRange(c.threshold > 0.0, "threshold", c.threshold);
  Read(j, "seeds", "config", c.seeds);
  if (c.seeds.empty()) throw ConfigError("seeds must not be empty");
  Read(j, "output_dir", "config", c.output_dir);
  return c;
}

RunConfig LoadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  return ParseConfig(j);
}

json ToJson(const RunConfig& c) {
  json j;
  j["schema_version"] = c.schema_version;
  j["experiment"] = c.experiment;
  j["env"] = {{"name", c.env.name},
              {"code_len", c.env.code_len},
              {"max_guesses", c.env.max_guesses},
              {"alphabet_size", c.env.alphabet_size},
              {"dims", c.env.dims},
              {"side", c.env.side},
              {"gamma", c.env.gamma},
              {"max_episode_steps", c.env.max_episode_steps}};
  j["agent"] = AgentJson(c.agent);
  j["steady_state"] = {
      {"mode", c.steady_state.mode == StateDistribution::Mode::kAnalytic
                   ? "analytic"
                   : "empirical"},
      {"episodes", c.steady_state.episodes}};
  j["char_model"] = ModelJson(c.char_model);
  j["char_model"]["weighting"] = WeightingName(c.char_weighting);
  j["shapley_model"] = ModelJson(c.shapley_model);
  j["shapley_model"]["weighting"] = WeightingName(c.shapley_weighting);
  json variants = json::array();
  for (OutcomeVariant v : c.outcome_variants) variants.push_back(ToString(v));
  j["outcome"] = {{"model", ModelJson(c.outcome.model)},
                  {"target_sync", c.outcome.target_sync},
                  {"env_steps_per_update", c.outcome.env_steps_per_update},
                  {"buffer_capacity", c.outcome.buffer_capacity},
                  {"learning_starts", c.outcome.learning_starts},
                  {"variants", variants}};
  json targets = json::array();
  for (TargetKind k : c.targets) targets.push_back(ToString(k));
  j["targets"] = targets;
  json modes = json::array();
  for (const ISConfig& m : c.offpolicy.is_modes) modes.push_back(ToString(m));
  j["offpolicy"] = {{"is_modes", modes}};
  j["continual"] = {{"kind", ToString(c.continual.kind)},
                    {"ratios", c.continual.ratios},
                    {"is", ToString(c.continual.is)},
                    {"eval_every", c.continual.eval_every}};
  j["hypercube"] = {{"dims", c.hypercube.dims},
                    {"sides", c.hypercube.sides},
                    {"max_updates", c.hypercube.max_updates}};
  j["threshold"] = c.threshold;
  j["seeds"] = c.seeds;
  j["output_dir"] = c.output_dir;
  return j;
}

std::vector<uint64_t> ParseSeedRange(const std::string& text) {
  auto parse = [&](const std::string& part) -> uint64_t {
    size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(part, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (part.empty() || used != part.size() || part[0] == '-') {
      throw ConfigError("bad seed range '" + text + "' (expected N or N..M)");
    }
    return v;
  };
  const size_t dots = text.find("..");
  if (dots == std::string::npos) return {parse(text)};
  const uint64_t first = parse(text.substr(0, dots));
  const uint64_t last = parse(text.substr(dots + 2));
  if (last < first) throw ConfigError("empty seed range '" + text + "'");
  std::vector<uint64_t> seeds;
  for (uint64_t s = first; s <= last; ++s) seeds.push_back(s);
  return seeds;
}

std::shared_ptr<Environment> MakeEnvironment(const EnvConfig& config) {
  std::shared_ptr<Environment> env;
  if (config.name == "gridworld") {
    env = std::make_shared<Gridworld>();
  } else if (config.name == "mastermind") {
    env = std::make_shared<Mastermind>(config.code_len, config.max_guesses,
                                       config.alphabet_size);
  } else if (config.name == "hypercube") {
    env = std::make_shared<Hypercube>(config.dims, config.side);
  } else {
    throw ConfigError("unknown environment '" + config.name + "'");
  }
  if (config.gamma >= 0.0) env->set_gamma(config.gamma);
  if (config.max_episode_steps > 0) {
    env->set_max_episode_steps(config.max_episode_steps);
  }
  return env;
}

}  // namespace fastsverl
