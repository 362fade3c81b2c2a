#include "cpsr/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <utility>

#include "cpsr/errors.hpp"
#include "cpsr/rng.hpp"
#include "model_common.hpp"

namespace cpsr {

namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

std::string dump_canonical(const json& j) { return j.dump(); }

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << text;
  if (!out.good()) throw IoError("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path);
  return buffer.str();
}

json parse_json(const std::string& text, const std::string& context) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw IoError("malformed JSON in " + context);
  return j;
}

// Container plumbing shared by models and policies: the hash covers the
// format tag, version, meta, and sections, in canonical order.
json make_container(const std::string& format, const json& meta, json sections) {
  json body;
  body["format"] = format;
  body["version"] = kFormatVersion;
  body["meta"] = meta;
  body["sections"] = std::move(sections);
  body["content_hash"] = content_hash_hex(body);
  return body;
}

json open_container(const std::string& path, const std::string& format) {
  json body = parse_json(read_text_file(path), path);
  if (!body.is_object() || !body.contains("format") || !body["format"].is_string()) {
    throw UsageError("not a recognized container file: " + path);
  }
  if (body["format"] != format) {
    throw UsageError("expected a " + format + " file, found " +
                     body["format"].get<std::string>() + ": " + path);
  }
  if (!body.contains("version") || body["version"] != kFormatVersion) {
    throw UsageError("unsupported container version in " + path);
  }
  const std::string stored = body.value("content_hash", "");
  json unhashed = body;
  unhashed.erase("content_hash");
  if (stored != content_hash_hex(unhashed)) {
    throw IoError("content hash mismatch (file corrupted?): " + path);
  }
  return body;
}

json vec_to_json(const Vec& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Vec vec_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw IoError("expected an array for " + what);
  Vec v(static_cast<Eigen::Index>(j.size()));
  Eigen::Index i = 0;
  for (const json& x : j) {
    if (!x.is_number()) throw IoError("non-numeric entry in " + what);
    v(i++) = x.get<double>();
  }
  return v;
}

json mat_to_json(const Mat& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

Mat mat_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw IoError("expected an array of rows for " + what);
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return Mat(0, 0);
  if (!j[0].is_array()) throw IoError("expected nested rows in " + what);
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw IoError("ragged rows in " + what);
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const json& x = row[static_cast<std::size_t>(c)];
      if (!x.is_number()) throw IoError("non-numeric entry in " + what);
      m(r, c) = x.get<double>();
    }
  }
  return m;
}

const json& require(const json& j, const char* key, const std::string& context) {
  const auto it = j.find(key);
  if (it == j.end()) throw IoError("missing field '" + std::string(key) + "' in " + context);
  return *it;
}

std::string family_name(ProjectionFamily family) {
  switch (family) {
    case ProjectionFamily::spherical: return "spherical";
    case ProjectionFamily::rademacher: return "rademacher";
    case ProjectionFamily::hashed: return "hashed";
  }
  throw UsageError("unknown projection family");
}

ProjectionFamily family_from_name(const std::string& name) {
  if (name == "spherical") return ProjectionFamily::spherical;
  if (name == "rademacher") return ProjectionFamily::rademacher;
  if (name == "hashed") return ProjectionFamily::hashed;
  throw UsageError("unknown projection family: " + name);
}

std::string start_mode_name(StartMode mode) {
  return mode == StartMode::unique_start ? "unique_start" : "dummy_column";
}

StartMode start_mode_from_name(const std::string& name) {
  if (name == "unique_start") return StartMode::unique_start;
  if (name == "dummy_column") return StartMode::dummy_column;
  throw UsageError("unknown start mode: " + name);
}

std::string metrics_mirror_path(const std::string& csv_path) {
  const std::string suffix = ".csv";
  if (csv_path.size() > suffix.size() &&
      csv_path.compare(csv_path.size() - suffix.size(), suffix.size(), suffix) == 0) {
    return csv_path.substr(0, csv_path.size() - suffix.size()) + ".json";
  }
  return csv_path + ".json";
}

// Shortest round-trip decimal form, identical to the JSON emission.
std::string number_text(double value) { return json(value).dump(); }

}  // namespace

std::string content_hash_hex(const json& body) {
  const std::string text = dump_canonical(body);
  const std::uint64_t h = rng::fnv1a(text.data(), text.size());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

json projection_spec_to_json(const ProjectionSpec& spec) {
  json j;
  j["family"] = family_name(spec.family);
  j["dim"] = spec.dim;
  j["seed"] = spec.seed;
  j["signed_hash"] = spec.signed_hash;
  return j;
}

ProjectionSpec projection_spec_from_json(const json& j) {
  ProjectionSpec spec;
  spec.family = family_from_name(require(j, "family", "projection spec").get<std::string>());
  spec.dim = require(j, "dim", "projection spec").get<int>();
  spec.seed = require(j, "seed", "projection spec").get<std::uint64_t>();
  spec.signed_hash = require(j, "signed_hash", "projection spec").get<bool>();
  return spec;
}

json learner_config_to_json(const LearnerConfig& config) {
  json j;
  j["test_spec"] = projection_spec_to_json(config.test_spec);
  j["history_spec"] = projection_spec_to_json(config.history_spec);
  j["start_mode"] = start_mode_name(config.start_mode);
  j["max_test_len"] = config.max_test_len;
  j["d_prime"] = config.d_prime;
  j["sv_tol"] = config.sv_tol;
  j["scale_constant"] = config.scale_constant;
  j["num_actions"] = config.num_actions;
  j["num_observations"] = config.num_observations;
  j["cache_capacity"] = config.cache_capacity;
  return j;
}

LearnerConfig learner_config_from_json(const json& j) {
  LearnerConfig config;
  config.test_spec = projection_spec_from_json(require(j, "test_spec", "learner config"));
  config.history_spec = projection_spec_from_json(require(j, "history_spec", "learner config"));
  config.start_mode =
      start_mode_from_name(require(j, "start_mode", "learner config").get<std::string>());
  config.max_test_len = require(j, "max_test_len", "learner config").get<int>();
  config.d_prime = require(j, "d_prime", "learner config").get<int>();
  config.sv_tol = require(j, "sv_tol", "learner config").get<double>();
  config.scale_constant = require(j, "scale_constant", "learner config").get<double>();
  config.num_actions = require(j, "num_actions", "learner config").get<int>();
  config.num_observations = require(j, "num_observations", "learner config").get<int>();
  config.cache_capacity = require(j, "cache_capacity", "learner config").get<std::size_t>();
  return config;
}

json planner_config_to_json(const PlannerConfig& config) {
  json j;
  j["gamma"] = config.gamma;
  j["fitted_q_iterations"] = config.fitted_q_iterations;
  j["trees_per_action"] = config.trees_per_action;
  j["model_episodes"] = config.model_episodes;
  j["planning_episodes"] = config.planning_episodes;
  j["sampling_iterations"] = config.sampling_iterations;
  j["max_episode_len"] = config.max_episode_len;
  j["greedy_sampling"] = config.greedy_sampling;
  j["epsilon"] = config.epsilon;
  j["min_node_size"] = config.min_node_size;
  j["num_candidates"] = config.num_candidates;
  return j;
}

PlannerConfig planner_config_from_json(const json& j) {
  PlannerConfig config;
  config.gamma = require(j, "gamma", "planner config").get<double>();
  config.fitted_q_iterations = require(j, "fitted_q_iterations", "planner config").get<int>();
  config.trees_per_action = require(j, "trees_per_action", "planner config").get<int>();
  config.model_episodes = require(j, "model_episodes", "planner config").get<int>();
  config.planning_episodes = require(j, "planning_episodes", "planner config").get<int>();
  config.sampling_iterations = require(j, "sampling_iterations", "planner config").get<int>();
  config.max_episode_len = require(j, "max_episode_len", "planner config").get<int>();
  config.greedy_sampling = require(j, "greedy_sampling", "planner config").get<bool>();
  config.epsilon = require(j, "epsilon", "planner config").get<double>();
  config.min_node_size = require(j, "min_node_size", "planner config").get<int>();
  config.num_candidates = require(j, "num_candidates", "planner config").get<int>();
  return config;
}

void save_corpus(const std::string& path, const TrajectorySet& corpus, const json& meta) {
  std::string records;
  std::uint64_t record_hash = 0xcbf29ce484222325ULL;
  for (const Trajectory& z : corpus) {
    z.validate();
    json record;
    record["a"] = z.actions;
    record["o"] = z.observations;
    if (z.has_rewards()) record["r"] = z.rewards;
    if (!z.resets.empty()) {
      json reset_steps = json::array();
      for (std::size_t t = 0; t < z.resets.size(); ++t) {
        if (z.resets[t] != 0) reset_steps.push_back(t);
      }
      if (!reset_steps.empty()) record["reset"] = std::move(reset_steps);
    }
    if (z.terminated) record["done"] = true;
    std::string line = record.dump();
    record_hash = rng::fnv1a(line.data(), line.size(), record_hash);
    records += line;
    records += '\n';
  }

  json header;
  header["format"] = "cpsr-corpus";
  header["version"] = kFormatVersion;
  header["episodes"] = corpus.size();
  header["meta"] = meta;
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(record_hash));
  header["content_hash"] = std::string(buf);

  write_text_file(path, header.dump() + "\n" + records);
}

TrajectorySet load_corpus(const std::string& path, json* header_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty corpus file: " + path);
  json header = parse_json(line, path + " (header)");
  if (!header.is_object() || header.value("format", "") != "cpsr-corpus") {
    throw UsageError("not a corpus file: " + path);
  }
  if (header.value("version", -1) != kFormatVersion) {
    throw UsageError("unsupported corpus version in " + path);
  }
  const auto declared = require(header, "episodes", path).get<std::size_t>();

  TrajectorySet corpus;
  corpus.reserve(declared);
  std::uint64_t record_hash = 0xcbf29ce484222325ULL;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    record_hash = rng::fnv1a(line.data(), line.size(), record_hash);
    json record = parse_json(line, path + " (record)");
    Trajectory z;
    z.actions = require(record, "a", "corpus record").get<std::vector<int>>();
    z.observations = require(record, "o", "corpus record").get<std::vector<int>>();
    if (record.contains("r")) z.rewards = record["r"].get<std::vector<double>>();
    if (record.contains("reset")) {
      z.resets.assign(z.actions.size(), 0);
      for (const json& t : record["reset"]) {
        const auto step = t.get<std::size_t>();
        if (step >= z.resets.size()) throw IoError("reset step out of range in " + path);
        z.resets[step] = 1;
      }
    }
    z.terminated = record.value("done", false);
    z.validate();
    corpus.push_back(std::move(z));
  }
  if (in.bad()) throw IoError("read failed: " + path);
  if (corpus.size() != declared) {
    throw IoError("corpus record count does not match its header: " + path);
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(record_hash));
  if (header.value("content_hash", "") != std::string(buf)) {
    throw IoError("content hash mismatch (file corrupted?): " + path);
  }
  if (header_out != nullptr) *header_out = std::move(header);
  return corpus;
}

void save_model(const std::string& path, const CpsrModel& model, const json& meta) {
  json sections;
  sections["config"] = learner_config_to_json(model.config);
  sections["svd"]["u"] = mat_to_json(model.svd.u);
  sections["svd"]["s"] = vec_to_json(model.svd.s);
  sections["svd"]["v"] = mat_to_json(model.svd.v);
  sections["sigma_h"] = vec_to_json(model.sigma_h);
  sections["total_weight"] = model.total_weight;
  sections["scale"] = model.scale;
  json operators = json::object();
  for (const auto& [key, mat] : model.c_ao) {
    operators[std::to_string(key)] = mat_to_json(mat);
  }
  sections["c_ao"] = std::move(operators);
  write_text_file(path, make_container("cpsr-model", meta, std::move(sections)).dump() + "\n");
}

CpsrModel load_model(const std::string& path, json* meta) {
  const json body = open_container(path, "cpsr-model");
  const json& sections = require(body, "sections", path);

  CpsrModel model;
  model.config = learner_config_from_json(require(sections, "config", path));
  model.config.validate();
  const json& svd = require(sections, "svd", path);
  model.svd.u = mat_from_json(require(svd, "u", path), "svd.u");
  model.svd.s = vec_from_json(require(svd, "s", path), "svd.s");
  model.svd.v = mat_from_json(require(svd, "v", path), "svd.v");
  model.sigma_h = vec_from_json(require(sections, "sigma_h", path), "sigma_h");
  model.total_weight = require(sections, "total_weight", path).get<double>();
  model.scale = require(sections, "scale", path).get<double>();

  const int rank = model.svd.rank();
  if (model.svd.u.cols() != rank || model.svd.v.cols() != rank) {
    throw IoError("inconsistent SVD factor shapes in " + path);
  }
  const json& operators = require(sections, "c_ao", path);
  const int num_keys = model.config.num_actions * model.config.num_observations;
  for (const auto& [key_text, mat_json] : operators.items()) {
    int key = 0;
    try {
      key = std::stoi(key_text);
    } catch (const std::exception&) {
      throw IoError("bad operator key '" + key_text + "' in " + path);
    }
    if (key < 0 || key >= num_keys) throw IoError("operator key out of range in " + path);
    Mat op = mat_from_json(mat_json, "operator " + key_text);
    if (op.rows() != rank || op.cols() != rank) {
      throw IoError("operator shape mismatch in " + path);
    }
    model.c_ao.emplace(key, std::move(op));
  }
  detail::finalize_model(model);
  if (meta != nullptr) *meta = body.value("meta", json::object());
  return model;
}

void save_policy(const std::string& path, const Policy& policy, const json& meta) {
  json sections;
  sections["num_actions"] = policy.num_actions();
  sections["actions_without_data"] = policy.actions_without_data;
  sections["tie_break"] = "lowest-action-id";
  json ensembles = json::array();
  for (const Ensemble& ensemble : policy.q) {
    json e;
    e["seed"] = ensemble.seed;
    e["input_dim"] = ensemble.input_dim;
    e["num_trees"] = ensemble.params.num_trees;
    e["num_candidates"] = ensemble.params.num_candidates;
    e["min_node_size"] = ensemble.params.min_node_size;
    json trees = json::array();
    for (const Tree& tree : ensemble.trees) {
      json nodes = json::array();
      for (const TreeNode& node : tree.nodes) {
        nodes.push_back(json::array(
            {node.feature, node.threshold, node.left, node.right, node.value}));
      }
      trees.push_back(std::move(nodes));
    }
    e["trees"] = std::move(trees);
    ensembles.push_back(std::move(e));
  }
  sections["ensembles"] = std::move(ensembles);
  write_text_file(path, make_container("cpsr-policy", meta, std::move(sections)).dump() + "\n");
}

Policy load_policy(const std::string& path, json* meta) {
  const json body = open_container(path, "cpsr-policy");
  const json& sections = require(body, "sections", path);

  Policy policy;
  const int num_actions = require(sections, "num_actions", path).get<int>();
  policy.actions_without_data =
      require(sections, "actions_without_data", path).get<std::vector<int>>();
  const json& ensembles = require(sections, "ensembles", path);
  if (static_cast<int>(ensembles.size()) != num_actions) {
    throw IoError("ensemble count does not match the action count in " + path);
  }
  for (const json& e : ensembles) {
    Ensemble ensemble;
    ensemble.seed = require(e, "seed", path).get<std::uint64_t>();
    ensemble.input_dim = require(e, "input_dim", path).get<int>();
    ensemble.params.num_trees = require(e, "num_trees", path).get<int>();
    ensemble.params.num_candidates = require(e, "num_candidates", path).get<int>();
    ensemble.params.min_node_size = require(e, "min_node_size", path).get<int>();
    for (const json& nodes : require(e, "trees", path)) {
      Tree tree;
      for (const json& node_json : nodes) {
        if (!node_json.is_array() || node_json.size() != 5) {
          throw IoError("malformed tree node in " + path);
        }
        TreeNode node;
        node.feature = node_json[0].get<int>();
        node.threshold = node_json[1].get<double>();
        node.left = node_json[2].get<int>();
        node.right = node_json[3].get<int>();
        node.value = node_json[4].get<double>();
        const auto count = static_cast<int>(nodes.size());
        if (node.left >= count || node.right >= count) {
          throw IoError("tree child index out of range in " + path);
        }
        tree.nodes.push_back(node);
      }
      ensemble.trees.push_back(std::move(tree));
    }
    policy.q.push_back(std::move(ensemble));
  }
  if (meta != nullptr) *meta = body.value("meta", json::object());
  return policy;
}

void save_metrics(const std::string& csv_path, const MetricsTable& table, const json& meta) {
  if (table.columns.empty()) throw UsageError("metrics need at least one column");
  std::string csv;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (c > 0) csv += ',';
    csv += table.columns[c];
  }
  csv += '\n';
  json rows = json::array();
  for (const auto& row : table.rows) {
    if (row.size() != table.columns.size()) {
      throw UsageError("metrics row width does not match the column count");
    }
    json row_json = json::array();
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) csv += ',';
      csv += number_text(row[c]);
      row_json.push_back(row[c]);
    }
    csv += '\n';
    rows.push_back(std::move(row_json));
  }
  write_text_file(csv_path, csv);

  json sections;
  sections["columns"] = table.columns;
  sections["rows"] = std::move(rows);
  write_text_file(metrics_mirror_path(csv_path),
                  make_container("cpsr-metrics", meta, std::move(sections)).dump() + "\n");
}

MetricsTable load_metrics_json(const std::string& json_path, json* meta) {
  const json body = open_container(json_path, "cpsr-metrics");
  const json& sections = require(body, "sections", json_path);
  MetricsTable table;
  table.columns = require(sections, "columns", json_path).get<std::vector<std::string>>();
  for (const json& row : require(sections, "rows", json_path)) {
    table.rows.push_back(row.get<std::vector<double>>());
    if (table.rows.back().size() != table.columns.size()) {
      throw IoError("metrics row width mismatch in " + json_path);
    }
  }
  if (meta != nullptr) *meta = body.value("meta", json::object());
  return table;
}

}  // namespace cpsr
