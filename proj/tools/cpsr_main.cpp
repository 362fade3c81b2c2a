// Command-line front end: corpus generation, model learning, likelihood
// evaluation, planning, and policy evaluation, with deterministic seeding and
// reproducible file outputs.

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <memory>
#include <string>
#include <vector>

#include "cpsr/errors.hpp"
#include "cpsr/grid_world.hpp"
#include "cpsr/learner.hpp"
#include "cpsr/oracle_pomdp.hpp"
#include "cpsr/planner.hpp"
#include "cpsr/pocman.hpp"
#include "cpsr/rng.hpp"
#include "cpsr/sampling.hpp"
#include "cpsr/serialize.hpp"
#include "cpsr/tpsr.hpp"

namespace {

using json = nlohmann::json;

// All randomness descends from one root seed, split into named streams so
// that, e.g., changing the evaluation seed can never perturb the data.
std::uint64_t stream_seed(std::uint64_t root, std::string_view name) {
  return cpsr::rng::mix(root, cpsr::rng::fnv1a(name));
}

std::string read_file_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw cpsr::IoError("cannot open for reading: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw cpsr::IoError("read failed: " + path);
  return buffer.str();
}

std::unique_ptr<cpsr::Simulator> make_domain(const std::string& name,
                                             const std::string& map_path) {
  if (name == "oracle") {
    if (!map_path.empty()) throw cpsr::UsageError("the oracle domain takes no map");
    return std::make_unique<cpsr::OraclePomdp>();
  }
  if (name == "grid") {
    if (map_path.empty()) {
      return std::make_unique<cpsr::ColoredGridWorld>(
          cpsr::ColoredGridWorld::from_map_text(cpsr::ColoredGridWorld::default_map_text()));
    }
    return std::make_unique<cpsr::ColoredGridWorld>(
        cpsr::ColoredGridWorld::from_map_file(map_path));
  }
  if (name == "pocman" || name == "spocman") {
    const auto variant = name == "pocman" ? cpsr::PocManVariant::kFull
                                          : cpsr::PocManVariant::kSparse;
    if (map_path.empty()) return std::make_unique<cpsr::PocMan>(variant);
    return std::make_unique<cpsr::PocMan>(variant, read_file_text(map_path));
  }
  throw cpsr::UsageError("unknown domain '" + name +
                         "' (expected oracle, grid, pocman, or spocman)");
}

// The content hash a container or corpus file declares about itself; both
// formats carry it in their first line.
std::string container_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw cpsr::IoError("cannot open for reading: " + path);
  std::string line;
  std::getline(in, line);
  const json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return "";
  return j.value("content_hash", "");
}

std::string with_dim_suffix(const std::string& path, int dim) {
  const auto dot = path.rfind('.');
  const auto slash = path.find_last_of("/\\");
  const bool has_ext = dot != std::string::npos && (slash == std::string::npos || dot > slash);
  const std::string tag = "_d" + std::to_string(dim);
  return has_ext ? path.substr(0, dot) + tag + path.substr(dot) : path + tag;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---- flag bundles ----------------------------------------------------------

struct GenDataFlags {
  std::string domain = "oracle";
  std::string map;
  std::string out;
  int episodes = 0;
  int max_len = 0;
  std::uint64_t seed = 1;
  bool no_rewards = false;
};

struct LearnFlags {
  std::string corpus;
  std::string out;
  std::vector<int> dims = {50};
  int history_dim = 0;  // 0: same as the test dimension
  int d_prime = 0;
  int max_test_len = 3;
  std::string family = "spherical";
  bool signed_hash = false;
  std::string start_mode = "unique_start";
  double sv_tol = 0.0;
  double scale_constant = 0.0;
  int num_actions = 0;
  int num_observations = 0;
  std::uint64_t seed = 1;
  bool tpsr = false;
  int max_history_len = -1;
  double memory_budget_gb = 8.0;
};

struct LikelihoodFlags {
  std::string model;
  std::string corpus;
  std::string out;
  int max_horizon = 0;  // 0: shortest evaluation trajectory
};

struct PlannerFlags {
  double gamma = 0.99;
  int fq_iterations = 100;
  int trees = 25;
  int min_node_size = 5;
  int num_candidates = 0;
};

struct PlanFlags {
  std::string model;
  std::string corpus;
  std::string out;
  std::string domain;
  std::string map;
  bool memoryless = false;
  int planning_episodes = 0;  // 0: the whole corpus
  std::uint64_t seed = 1;
  PlannerFlags planner;
};

struct EvalPolicyFlags {
  std::string domain = "oracle";
  std::string map;
  std::string policy;
  std::string model;
  std::string memoryless_policy;
  bool random = false;
  std::string out;
  int episodes = 0;
  int max_eval_len = 100;
  double gamma = 0.99;
  std::uint64_t seed = 1;
};

struct FullFlags {
  std::string domain = "oracle";
  std::string map;
  std::string out_dir;
  std::uint64_t seed = 1;
  // learner
  int dim = 50;
  int history_dim = 0;
  int d_prime = 5;
  int max_test_len = 7;
  std::string family = "spherical";
  double sv_tol = 0.0;
  // combined loop
  PlannerFlags planner;
  int model_episodes = 10000;
  int planning_episodes = 1000;
  int rounds = 1;
  int max_len = 100;
  bool greedy_sampling = false;
  double epsilon = 0.1;
  // evaluation
  int eval_episodes = 500;
  int max_eval_len = 0;  // 0: same as max_len
  double eval_gamma = 0.0;  // 0: same as the planning discount
};

cpsr::ProjectionFamily parse_family(const std::string& name) {
  if (name == "spherical") return cpsr::ProjectionFamily::spherical;
  if (name == "rademacher") return cpsr::ProjectionFamily::rademacher;
  if (name == "hashed") return cpsr::ProjectionFamily::hashed;
  throw cpsr::UsageError("unknown projection family: " + name);
}

cpsr::StartMode parse_start_mode(const std::string& name) {
  if (name == "unique_start") return cpsr::StartMode::unique_start;
  if (name == "dummy_column") return cpsr::StartMode::dummy_column;
  throw cpsr::UsageError("unknown start mode: " + name);
}

void apply_planner_flags(cpsr::PlannerConfig& cfg, const PlannerFlags& flags) {
  cfg.gamma = flags.gamma;
  cfg.fitted_q_iterations = flags.fq_iterations;
  cfg.trees_per_action = flags.trees;
  cfg.min_node_size = flags.min_node_size;
  cfg.num_candidates = flags.num_candidates;
}

// Alphabet sizes for a corpus: explicit flags win, otherwise the header meta
// written at generation time.
std::pair<int, int> resolve_alphabet(const json& header, int flag_actions, int flag_observations) {
  int actions = flag_actions;
  int observations = flag_observations;
  const json meta = header.value("meta", json::object());
  if (actions <= 0) actions = meta.value("num_actions", 0);
  if (observations <= 0) observations = meta.value("num_observations", 0);
  if (actions <= 0 || observations <= 0) {
    throw cpsr::UsageError(
        "corpus header does not carry alphabet sizes; pass --num-actions and "
        "--num-observations");
  }
  return {actions, observations};
}

// ---- verbs -----------------------------------------------------------------

void cmd_gen_data(const GenDataFlags& flags) {
  if (flags.episodes <= 0) throw cpsr::UsageError("empty request: --episodes must be positive");
  if (flags.max_len <= 0) throw cpsr::UsageError("--max-len must be positive");
  auto domain = make_domain(flags.domain, flags.map);
  cpsr::UniformAgent agent(domain->num_actions());
  const std::uint64_t data_seed = stream_seed(flags.seed, "data");
  const cpsr::TrajectorySet corpus = cpsr::sample_trajectories(
      *domain, agent, flags.episodes, flags.max_len, data_seed, !flags.no_rewards);

  double total_len = 0;
  for (const auto& z : corpus) total_len += static_cast<double>(z.size());

  json meta;
  meta["command"] = "gen-data";
  meta["domain"] = flags.domain;
  meta["map"] = flags.map;
  meta["episodes"] = flags.episodes;
  meta["max_len"] = flags.max_len;
  meta["root_seed"] = flags.seed;
  meta["seed_stream"] = "data";
  meta["num_actions"] = domain->num_actions();
  meta["num_observations"] = domain->num_observations();
  meta["with_rewards"] = !flags.no_rewards;
  cpsr::save_corpus(flags.out, corpus, meta);
  std::cout << "wrote " << corpus.size() << " episodes (mean length "
            << total_len / static_cast<double>(corpus.size()) << ") to " << flags.out << "\n";
}

void cmd_learn(const LearnFlags& flags) {
  json header;
  const cpsr::TrajectorySet corpus = cpsr::load_corpus(flags.corpus, &header);
  const auto [num_actions, num_observations] =
      resolve_alphabet(header, flags.num_actions, flags.num_observations);
  const std::string corpus_hash = header.value("content_hash", "");

  if (flags.tpsr) {
    cpsr::TpsrConfig config;
    config.max_test_len = flags.max_test_len;
    config.max_history_len = flags.max_history_len;
    config.d_prime = flags.d_prime;
    config.sv_tol = flags.sv_tol;
    config.scale_constant = flags.scale_constant;
    config.num_actions = num_actions;
    config.num_observations = num_observations;
    config.memory_budget_bytes =
        static_cast<std::size_t>(flags.memory_budget_gb * 1024.0 * 1024.0 * 1024.0);

    const auto start = std::chrono::steady_clock::now();
    cpsr::TpsrBuild build = cpsr::build_tpsr(corpus, config);
    const double elapsed = seconds_since(start);

    json meta;
    meta["command"] = "learn";
    meta["kind"] = "tpsr";
    meta["corpus_hash"] = corpus_hash;
    meta["root_seed"] = flags.seed;
    meta["tests"] = build.tests.size();
    meta["histories"] = build.histories.size();
    cpsr::save_model(flags.out, build.model, meta);
    std::cout << "built uncompressed baseline: rank " << build.model.svd.rank() << ", "
              << build.tests.size() << " tests x " << build.histories.size()
              << " histories, " << elapsed << "s -> " << flags.out << "\n";
    return;
  }

  if (flags.dims.empty()) throw cpsr::UsageError("--dims needs at least one value");
  const std::uint64_t proj_seed = stream_seed(flags.seed, "projections");
  for (const int dim : flags.dims) {
    cpsr::LearnerConfig config;
    config.test_spec = cpsr::ProjectionSpec{parse_family(flags.family), dim,
                                            cpsr::rng::mix(proj_seed, 1), flags.signed_hash};
    const int history_dim = flags.history_dim > 0 ? flags.history_dim : dim;
    config.history_spec = cpsr::ProjectionSpec{parse_family(flags.family), history_dim,
                                               cpsr::rng::mix(proj_seed, 2), flags.signed_hash};
    config.start_mode = parse_start_mode(flags.start_mode);
    config.max_test_len = flags.max_test_len;
    config.d_prime = flags.d_prime;
    config.sv_tol = flags.sv_tol;
    config.scale_constant = flags.scale_constant;
    config.num_actions = num_actions;
    config.num_observations = num_observations;
    config.validate();

    const auto start = std::chrono::steady_clock::now();
    cpsr::SufficientStats stats(config);
    stats.accumulate_corpus(corpus);
    const cpsr::CpsrModel model = cpsr::build_model(stats);
    const double elapsed = seconds_since(start);

    json meta;
    meta["command"] = "learn";
    meta["kind"] = "cpsr";
    meta["corpus_hash"] = corpus_hash;
    meta["root_seed"] = flags.seed;
    meta["seed_stream"] = "projections";
    const std::string out =
        flags.dims.size() > 1 ? with_dim_suffix(flags.out, dim) : flags.out;
    cpsr::save_model(out, model, meta);
    std::cout << "built compressed model: d=" << dim << " rank " << model.svd.rank()
              << ", " << elapsed << "s -> " << out << "\n";
  }
}

void cmd_eval_likelihood(const LikelihoodFlags& flags) {
  json model_meta;
  const cpsr::CpsrModel model = cpsr::load_model(flags.model, &model_meta);
  json header;
  const cpsr::TrajectorySet corpus = cpsr::load_corpus(flags.corpus, &header);
  if (corpus.empty()) throw cpsr::UsageError("evaluation corpus is empty");

  std::size_t min_len = corpus.front().size();
  for (const auto& z : corpus) min_len = std::min(min_len, z.size());
  if (min_len == 0) throw cpsr::UsageError("evaluation corpus contains an empty trajectory");
  const int horizon = flags.max_horizon > 0 ? flags.max_horizon : static_cast<int>(min_len);
  if (horizon > static_cast<int>(min_len)) {
    throw cpsr::UsageError("horizon exceeds evaluation trajectory lengths");
  }

  cpsr::MetricsTable table;
  table.columns = {"horizon", "mean_ll", "n", "floor_hits"};
  for (int h = 1; h <= horizon; ++h) {
    const cpsr::LikelihoodResult result = cpsr::log_likelihood(model, corpus, h);
    table.rows.push_back({static_cast<double>(h), result.mean_log_prob,
                          static_cast<double>(corpus.size()),
                          static_cast<double>(result.floor_hits)});
    std::cout << "horizon " << h << ": mean log-likelihood " << result.mean_log_prob
              << " over " << corpus.size() << " episodes (" << result.floor_hits
              << " floored steps)\n";
  }

  json meta;
  meta["command"] = "eval-likelihood";
  meta["model_hash"] = container_hash(flags.model);
  meta["model_kind"] = model_meta.value("kind", "cpsr");
  meta["corpus_hash"] = header.value("content_hash", "");
  meta["max_horizon"] = horizon;
  cpsr::save_metrics(flags.out, table, meta);
  std::cout << "wrote " << table.rows.size() << " horizon rows to " << flags.out << "\n";
}

void warn_missing_actions(const cpsr::Policy& policy) {
  for (const int a : policy.actions_without_data) {
    std::cerr << "warning: action " << a
              << " has no training tuples; its value is the constant 0\n";
  }
}

void cmd_plan(const PlanFlags& flags) {
  json header;
  const cpsr::TrajectorySet corpus = cpsr::load_corpus(flags.corpus, &header);
  if (corpus.empty()) throw cpsr::UsageError("planning corpus is empty");
  std::size_t max_len = 1;
  for (const auto& z : corpus) max_len = std::max(max_len, z.size());

  cpsr::PlannerConfig cfg;
  apply_planner_flags(cfg, flags.planner);
  const int limit = flags.planning_episodes > 0 ? flags.planning_episodes
                                                : static_cast<int>(corpus.size());
  cfg.planning_episodes = limit;
  cfg.model_episodes = std::max(static_cast<int>(corpus.size()), limit);
  cfg.max_episode_len = static_cast<int>(max_len);
  const std::uint64_t trees_seed = stream_seed(flags.seed, "trees");

  json meta;
  meta["command"] = "plan";
  meta["corpus_hash"] = header.value("content_hash", "");
  meta["planner_config"] = cpsr::planner_config_to_json(cfg);
  meta["root_seed"] = flags.seed;
  meta["seed_stream"] = "trees";

  cpsr::Policy policy;
  cpsr::TupleBuild build;
  if (flags.memoryless) {
    if (flags.domain.empty()) {
      throw cpsr::UsageError("--memoryless needs --domain for the observation encoding");
    }
    auto domain = make_domain(flags.domain, flags.map);
    build = cpsr::build_memoryless_tuples(*domain, corpus, limit);
    if (build.tuples.empty()) throw cpsr::UsageError("no tuples in the planning corpus");
    policy = cpsr::fitted_q(build.tuples, cfg, domain->num_actions(), trees_seed);
    meta["kind"] = "memoryless";
    meta["domain"] = flags.domain;
  } else {
    if (flags.model.empty()) throw cpsr::UsageError("plan needs --model (or --memoryless)");
    const cpsr::CpsrModel model = cpsr::load_model(flags.model);
    build = cpsr::build_tuples(model, corpus, limit);
    if (build.tuples.empty()) {
      throw cpsr::UsageError("no usable tuples: every step failed to filter");
    }
    policy = cpsr::fitted_q(build.tuples, cfg, model.config.num_actions, trees_seed);
    meta["kind"] = "cpsr";
    meta["model_hash"] = container_hash(flags.model);
  }
  warn_missing_actions(policy);
  meta["tuples"] = build.tuples.size();
  meta["skipped_steps"] = build.skipped_steps;
  cpsr::save_policy(flags.out, policy, meta);
  std::cout << "fitted policy on " << build.tuples.size() << " tuples ("
            << build.skipped_steps << " steps skipped) -> " << flags.out << "\n";
}

struct AgentRow {
  int id = 0;
  std::string name;
  cpsr::EvalMetrics metrics;
};

void emit_returns(const std::string& out, const std::vector<AgentRow>& rows, json meta) {
  cpsr::MetricsTable table;
  table.columns = {"agent_id",     "mean_return", "mean_discounted_return",
                   "ci_return",    "ci_discounted", "episodes"};
  json legend = json::object();
  for (const AgentRow& row : rows) {
    table.rows.push_back({static_cast<double>(row.id), row.metrics.mean_return,
                          row.metrics.mean_discounted_return, row.metrics.ci_return,
                          row.metrics.ci_discounted, static_cast<double>(row.metrics.episodes)});
    legend[std::to_string(row.id)] = row.name;
    std::cout << row.name << ": mean return " << row.metrics.mean_return << " +/- "
              << row.metrics.ci_return << " (discounted " << row.metrics.mean_discounted_return
              << " +/- " << row.metrics.ci_discounted << ", " << row.metrics.episodes
            << " episodes)\n";
  }
  meta["agents"] = legend;
  cpsr::save_metrics(out, table, meta);
}

void cmd_eval_policy(const EvalPolicyFlags& flags) {
  if (flags.episodes <= 0) throw cpsr::UsageError("--episodes must be positive");
  if (!flags.random && flags.policy.empty() && flags.memoryless_policy.empty()) {
    throw cpsr::UsageError(
        "nothing to evaluate: pass --random, --memoryless-policy, or --policy with --model");
  }
  auto domain = make_domain(flags.domain, flags.map);
  const std::uint64_t eval_seed = stream_seed(flags.seed, "evaluation");

  std::vector<AgentRow> rows;
  if (flags.random) {
    cpsr::UniformAgent agent(domain->num_actions());
    rows.push_back({0, "random",
                    cpsr::eval_policy(*domain, agent, flags.episodes, flags.max_eval_len,
                                      flags.gamma, eval_seed)});
  }
  if (!flags.memoryless_policy.empty()) {
    const cpsr::Policy policy = cpsr::load_policy(flags.memoryless_policy);
    cpsr::MemorylessAgent agent(policy, *domain);
    rows.push_back({1, "memoryless",
                    cpsr::eval_policy(*domain, agent, flags.episodes, flags.max_eval_len,
                                      flags.gamma, eval_seed)});
  }
  if (!flags.policy.empty()) {
    if (flags.model.empty()) {
      throw cpsr::UsageError("--policy needs --model to filter states during rollout");
    }
    const cpsr::CpsrModel model = cpsr::load_model(flags.model);
    const cpsr::Policy policy = cpsr::load_policy(flags.policy);
    cpsr::ModelPolicyAgent agent(model, policy);
    rows.push_back({2, "cpsr",
                    cpsr::eval_policy(*domain, agent, flags.episodes, flags.max_eval_len,
                                      flags.gamma, eval_seed)});
  }

  json meta;
  meta["command"] = "eval-policy";
  meta["domain"] = flags.domain;
  meta["episodes"] = flags.episodes;
  meta["max_eval_len"] = flags.max_eval_len;
  meta["gamma"] = flags.gamma;
  meta["root_seed"] = flags.seed;
  meta["seed_stream"] = "evaluation";
  if (!flags.policy.empty()) meta["policy_hash"] = container_hash(flags.policy);
  if (!flags.memoryless_policy.empty()) {
    meta["memoryless_policy_hash"] = container_hash(flags.memoryless_policy);
  }
  emit_returns(flags.out, rows, meta);
}

void cmd_full(const FullFlags& flags) {
  if (flags.out_dir.empty()) throw cpsr::UsageError("--out-dir is required");
  std::error_code ec;
  std::filesystem::create_directories(flags.out_dir, ec);
  if (ec) throw cpsr::IoError("cannot create output directory: " + flags.out_dir);
  const auto out_path = [&](const char* name) {
    return (std::filesystem::path(flags.out_dir) / name).string();
  };

  auto domain = make_domain(flags.domain, flags.map);
  const std::uint64_t proj_seed = stream_seed(flags.seed, "projections");

  cpsr::LearnerConfig lcfg;
  lcfg.test_spec = cpsr::ProjectionSpec{parse_family(flags.family), flags.dim,
                                        cpsr::rng::mix(proj_seed, 1), false};
  const int history_dim = flags.history_dim > 0 ? flags.history_dim : flags.dim;
  lcfg.history_spec = cpsr::ProjectionSpec{parse_family(flags.family), history_dim,
                                           cpsr::rng::mix(proj_seed, 2), false};
  lcfg.max_test_len = flags.max_test_len;
  lcfg.d_prime = flags.d_prime;
  lcfg.sv_tol = flags.sv_tol;
  lcfg.num_actions = domain->num_actions();
  lcfg.num_observations = domain->num_observations();
  lcfg.validate();

  cpsr::PlannerConfig pcfg;
  apply_planner_flags(pcfg, flags.planner);
  pcfg.model_episodes = flags.model_episodes;
  pcfg.planning_episodes = flags.planning_episodes;
  pcfg.sampling_iterations = flags.rounds;
  pcfg.max_episode_len = flags.max_len;
  pcfg.greedy_sampling = flags.greedy_sampling;
  pcfg.epsilon = flags.epsilon;
  pcfg.validate();

  std::cout << "running the combined loop: " << flags.rounds << " round(s) of "
            << pcfg.model_episodes << " episodes on " << flags.domain << "\n";
  const auto start = std::chrono::steady_clock::now();
  cpsr::CombinedResult result =
      cpsr::run_combined(*domain, lcfg, pcfg, stream_seed(flags.seed, "data"));
  std::cout << "combined loop finished in " << seconds_since(start) << "s (model rank "
            << result.model.svd.rank() << ")\n";
  warn_missing_actions(result.policy);

  json common;
  common["command"] = "full";
  common["domain"] = flags.domain;
  common["root_seed"] = flags.seed;
  common["planner_config"] = cpsr::planner_config_to_json(pcfg);

  cpsr::save_model(out_path("model.json"), result.model, common);
  json policy_meta = common;
  policy_meta["model_hash"] = container_hash(out_path("model.json"));
  cpsr::save_policy(out_path("policy.json"), result.policy, policy_meta);

  cpsr::MetricsTable loop;
  loop.columns = {"round",             "episodes_sampled", "new_tuples",
                  "cumulative_tuples", "skipped_steps",    "model_rank"};
  for (std::size_t r = 0; r < result.metrics.rounds.size(); ++r) {
    const auto& round = result.metrics.rounds[r];
    loop.rows.push_back({static_cast<double>(r), static_cast<double>(round.episodes_sampled),
                         static_cast<double>(round.new_tuples),
                         static_cast<double>(round.cumulative_tuples),
                         static_cast<double>(round.skipped_steps),
                         static_cast<double>(round.model_rank)});
  }
  cpsr::save_metrics(out_path("loop.csv"), loop, common);

  // The memoryless baseline receives the same sampling budget, on its own
  // stream so it never perturbs the main run.
  cpsr::UniformAgent uniform(domain->num_actions());
  const cpsr::TrajectorySet baseline_corpus = cpsr::sample_trajectories(
      *domain, uniform, pcfg.model_episodes, pcfg.max_episode_len,
      stream_seed(flags.seed, "baseline-data"));
  const cpsr::Policy memoryless = cpsr::memoryless_baseline(
      *domain, baseline_corpus, pcfg, stream_seed(flags.seed, "trees"));
  cpsr::save_policy(out_path("memoryless.json"), memoryless, common);

  const int eval_len = flags.max_eval_len > 0 ? flags.max_eval_len : pcfg.max_episode_len;
  const double eval_gamma = flags.eval_gamma > 0.0 ? flags.eval_gamma : pcfg.gamma;
  const std::uint64_t eval_seed = stream_seed(flags.seed, "evaluation");

  std::vector<AgentRow> rows;
  rows.push_back({0, "random",
                  cpsr::eval_policy(*domain, uniform, flags.eval_episodes, eval_len,
                                    eval_gamma, eval_seed)});
  cpsr::MemorylessAgent memoryless_agent(memoryless, *domain);
  rows.push_back({1, "memoryless",
                  cpsr::eval_policy(*domain, memoryless_agent, flags.eval_episodes, eval_len,
                                    eval_gamma, eval_seed)});
  cpsr::ModelPolicyAgent planned(result.model, result.policy);
  rows.push_back({2, "cpsr",
                  cpsr::eval_policy(*domain, planned, flags.eval_episodes, eval_len,
                                    eval_gamma, eval_seed)});

  const double random_mean = rows[0].metrics.mean_return;
  const double memoryless_mean = rows[1].metrics.mean_return;
  const double cpsr_mean = rows[2].metrics.mean_return;
  json returns_meta = common;
  returns_meta["eval_gamma"] = eval_gamma;
  returns_meta["eval_episodes"] = flags.eval_episodes;
  returns_meta["max_eval_len"] = eval_len;
  returns_meta["ordering_cpsr_above_memoryless"] = cpsr_mean > memoryless_mean;
  returns_meta["ordering_memoryless_above_random"] = memoryless_mean > random_mean;
  returns_meta["cpsr_ci_separated_from_random"] =
      cpsr_mean - rows[2].metrics.ci_return > random_mean + rows[0].metrics.ci_return;
  emit_returns(out_path("returns.csv"), rows, returns_meta);
  std::cout << "ordering: cpsr > memoryless: "
            << (cpsr_mean > memoryless_mean ? "yes" : "no")
            << ", memoryless > random: " << (memoryless_mean > random_mean ? "yes" : "no")
            << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compressed predictive-state models: data generation, learning, and planning"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "INI file supplying flags per [verb] section; place it before the verb, "
                 "command-line values win");

  GenDataFlags gen_flags;
  auto* gen = app.add_subcommand("gen-data", "Sample a trajectory corpus from a domain");
  gen->add_option("--domain", gen_flags.domain, "oracle | grid | pocman | spocman");
  gen->add_option("--map", gen_flags.map, "map file for grid/pocman variants");
  gen->add_option("--episodes", gen_flags.episodes, "number of episodes")->required();
  gen->add_option("--max-len", gen_flags.max_len, "step cap per episode")->required();
  gen->add_option("--seed", gen_flags.seed, "root seed");
  gen->add_option("--out", gen_flags.out, "output corpus file")->required();
  gen->add_flag("--no-rewards", gen_flags.no_rewards, "omit rewards from the corpus");
  gen->callback([&] { cmd_gen_data(gen_flags); });

  LearnFlags learn_flags;
  auto* learn = app.add_subcommand("learn", "Build a model from a corpus");
  learn->add_option("--corpus", learn_flags.corpus, "training corpus")->required();
  learn->add_option("--out", learn_flags.out, "output model file")->required();
  learn->add_option("--dims", learn_flags.dims,
                    "projection dimensions; several values emit one model each")
      ->delimiter(',');
  learn->add_option("--history-dim", learn_flags.history_dim,
                    "history projection dimension (default: same as --dims)");
  learn->add_option("--d-prime", learn_flags.d_prime, "retained rank (0: keep everything)");
  learn->add_option("--max-test-len", learn_flags.max_test_len, "longest test tracked");
  learn->add_option("--family", learn_flags.family, "spherical | rademacher | hashed");
  learn->add_flag("--signed-hash", learn_flags.signed_hash, "signed hashed projections");
  learn->add_option("--start-mode", learn_flags.start_mode, "unique_start | dummy_column");
  learn->add_option("--sv-tol", learn_flags.sv_tol, "singular value cutoff");
  learn->add_option("--scale-constant", learn_flags.scale_constant,
                    "statistics scale (0: 1/total weight)");
  learn->add_option("--num-actions", learn_flags.num_actions,
                    "action alphabet (default: corpus header)");
  learn->add_option("--num-observations", learn_flags.num_observations,
                    "observation alphabet (default: corpus header)");
  learn->add_option("--seed", learn_flags.seed, "root seed");
  learn->add_flag("--tpsr", learn_flags.tpsr, "build the uncompressed baseline instead");
  learn->add_option("--max-history-len", learn_flags.max_history_len,
                    "history dictionary cap for --tpsr (-1: all realized prefixes)");
  learn->add_option("--memory-budget-gb", learn_flags.memory_budget_gb,
                    "dense matrix budget for --tpsr");
  learn->callback([&] { cmd_learn(learn_flags); });

  LikelihoodFlags ll_flags;
  auto* ll = app.add_subcommand("eval-likelihood",
                                "Per-horizon mean log-likelihood of a corpus under a model");
  ll->add_option("--model", ll_flags.model, "model file")->required();
  ll->add_option("--corpus", ll_flags.corpus, "evaluation corpus")->required();
  ll->add_option("--max-horizon", ll_flags.max_horizon,
                 "largest horizon (default: shortest trajectory)");
  ll->add_option("--out", ll_flags.out, "output CSV path")->required();
  ll->callback([&] { cmd_eval_likelihood(ll_flags); });

  PlanFlags plan_flags;
  auto* plan = app.add_subcommand("plan", "Fit a policy from a corpus and a model");
  plan->add_option("--model", plan_flags.model, "model file (tuples filter through it)");
  plan->add_flag("--memoryless", plan_flags.memoryless,
                 "fit on raw observation features instead of model states");
  plan->add_option("--domain", plan_flags.domain, "domain (required with --memoryless)");
  plan->add_option("--map", plan_flags.map, "map file for grid/pocman variants");
  plan->add_option("--corpus", plan_flags.corpus, "planning corpus with rewards")->required();
  plan->add_option("--out", plan_flags.out, "output policy file")->required();
  plan->add_option("--planning-episodes", plan_flags.planning_episodes,
                   "leading episodes converted to tuples (0: all)");
  plan->add_option("--seed", plan_flags.seed, "root seed");
  plan->add_option("--gamma", plan_flags.planner.gamma, "discount");
  plan->add_option("--fq-iterations", plan_flags.planner.fq_iterations, "fitted-Q rounds");
  plan->add_option("--trees", plan_flags.planner.trees, "trees per action");
  plan->add_option("--min-node-size", plan_flags.planner.min_node_size, "tree leaf threshold");
  plan->add_option("--num-candidates", plan_flags.planner.num_candidates,
                   "split candidates per node (0: all features)");
  plan->callback([&] { cmd_plan(plan_flags); });

  EvalPolicyFlags eval_flags;
  auto* eval = app.add_subcommand("eval-policy", "Roll out policies and report returns");
  eval->add_option("--domain", eval_flags.domain, "oracle | grid | pocman | spocman");
  eval->add_option("--map", eval_flags.map, "map file for grid/pocman variants");
  eval->add_option("--policy", eval_flags.policy, "policy over filtered model states");
  eval->add_option("--model", eval_flags.model, "model for state filtering (with --policy)");
  eval->add_option("--memoryless-policy", eval_flags.memoryless_policy,
                   "policy over raw observation features");
  eval->add_flag("--random", eval_flags.random, "include the uniform-random baseline");
  eval->add_option("--out", eval_flags.out, "output CSV path")->required();
  eval->add_option("--episodes", eval_flags.episodes, "evaluation episodes")->required();
  eval->add_option("--max-eval-len", eval_flags.max_eval_len, "step cap per episode");
  eval->add_option("--gamma", eval_flags.gamma, "evaluation discount in (0, 1]");
  eval->add_option("--seed", eval_flags.seed, "root seed");
  eval->callback([&] { cmd_eval_policy(eval_flags); });

  FullFlags full_flags;
  auto* full = app.add_subcommand(
      "full", "Combined pipeline: sample, learn, plan, and evaluate against baselines");
  full->add_option("--domain", full_flags.domain, "oracle | grid | pocman | spocman");
  full->add_option("--map", full_flags.map, "map file for grid/pocman variants");
  full->add_option("--out-dir", full_flags.out_dir, "output directory")->required();
  full->add_option("--seed", full_flags.seed, "root seed");
  full->add_option("--dim", full_flags.dim, "test projection dimension");
  full->add_option("--history-dim", full_flags.history_dim,
                   "history projection dimension (default: --dim)");
  full->add_option("--d-prime", full_flags.d_prime, "retained rank");
  full->add_option("--max-test-len", full_flags.max_test_len, "longest test tracked");
  full->add_option("--family", full_flags.family, "projection family");
  full->add_option("--sv-tol", full_flags.sv_tol, "singular value cutoff");
  full->add_option("--gamma", full_flags.planner.gamma, "planning discount");
  full->add_option("--fq-iterations", full_flags.planner.fq_iterations, "fitted-Q rounds");
  full->add_option("--trees", full_flags.planner.trees, "trees per action");
  full->add_option("--min-node-size", full_flags.planner.min_node_size, "tree leaf threshold");
  full->add_option("--num-candidates", full_flags.planner.num_candidates,
                   "split candidates per node (0: all features)");
  full->add_option("--model-episodes", full_flags.model_episodes, "episodes per round");
  full->add_option("--planning-episodes", full_flags.planning_episodes,
                   "episodes converted to tuples per round");
  full->add_option("--rounds", full_flags.rounds, "sample/learn/plan rounds");
  full->add_option("--max-len", full_flags.max_len, "step cap for sampled episodes");
  full->add_flag("--greedy-sampling", full_flags.greedy_sampling,
                 "sample later rounds with the epsilon-greedy current policy");
  full->add_option("--epsilon", full_flags.epsilon, "exploration rate for greedy sampling");
  full->add_option("--eval-episodes", full_flags.eval_episodes, "evaluation episodes");
  full->add_option("--max-eval-len", full_flags.max_eval_len,
                   "evaluation step cap (0: same as --max-len)");
  full->add_option("--eval-gamma", full_flags.eval_gamma,
                   "evaluation discount (0: same as --gamma)");
  full->callback([&] { cmd_full(full_flags); });

  try {
    app.parse(argc, argv);
    return 0;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const cpsr::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const cpsr::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const cpsr::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::bad_alloc&) {
    std::cerr << "error: out of memory\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
