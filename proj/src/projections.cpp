#include "cpsr/projections.hpp"

#include <cmath>

#include "cpsr/errors.hpp"
#include "cpsr/rng.hpp"

namespace cpsr {

namespace {

void append_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::string serialize_sequence(char kind, const std::vector<int>& actions,
                               const std::vector<int>& observations) {
  if (actions.size() != observations.size()) {
    throw UsageError("key has mismatched action/observation lengths");
  }
  std::string out;
  out.reserve(5 + 8 * actions.size());
  out.push_back(kind);
  append_u32(out, static_cast<std::uint32_t>(actions.size()));
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (actions[i] < 0 || observations[i] < 0) {
      throw UsageError("key ids must be non-negative");
    }
    append_u32(out, static_cast<std::uint32_t>(actions[i]));
    append_u32(out, static_cast<std::uint32_t>(observations[i]));
  }
  return out;
}

void check_spec(const ProjectionSpec& spec) {
  if (spec.dim < 1) throw UsageError("projection dimension must be at least 1");
}

Vec generate_column(const ProjectionSpec& spec, const std::string& key_bytes) {
  rng::Stream gen(rng::mix(spec.seed, rng::fnv1a(key_bytes)));
  Vec col = Vec::Zero(spec.dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(spec.dim));
  switch (spec.family) {
    case ProjectionFamily::spherical:
      for (int i = 0; i < spec.dim; ++i) col(i) = scale * gen.next_gaussian();
      break;
    case ProjectionFamily::rademacher:
      for (int i = 0; i < spec.dim; ++i) col(i) = gen.next_bool() ? scale : -scale;
      break;
    case ProjectionFamily::hashed: {
      const int row = gen.next_int(spec.dim);
      col(row) = spec.signed_hash ? (gen.next_bool() ? 1.0 : -1.0) : 1.0;
      break;
    }
  }
  return col;
}

}  // namespace

std::string serialize_key(const TestKey& key) {
  if (key.actions.empty()) throw UsageError("tests must have length at least 1");
  return serialize_sequence('T', key.actions, key.observations);
}

std::string serialize_key(const HistoryKey& key) {
  return serialize_sequence('H', key.actions, key.observations);
}

namespace {

Vec modified_history_column(const ProjectionSpec& spec, bool key_is_empty,
                            StartMode mode, const std::string& bytes) {
  Vec out = Vec::Zero(spec.dim + 1);
  if (mode == StartMode::unique_start) {
    if (key_is_empty) {
      out(0) = 1.0;
      return out;
    }
  } else {
    out(0) = 1.0;
  }
  out.tail(spec.dim) = generate_column(spec, bytes);
  return out;
}

}  // namespace

Vec phi_column(const ProjectionSpec& spec, const TestKey& key) {
  check_spec(spec);
  return generate_column(spec, serialize_key(key));
}

Vec phi_history_column(const ProjectionSpec& spec, const HistoryKey& key,
                       StartMode mode) {
  check_spec(spec);
  return modified_history_column(spec, key.empty(), mode, serialize_key(key));
}

PhiCache::PhiCache(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw UsageError("cache capacity must be positive");
}

Projector::Projector(ProjectionSpec test_spec, ProjectionSpec history_spec,
                     StartMode mode, std::size_t cache_capacity)
    : test_spec_(test_spec),
      history_spec_(history_spec),
      mode_(mode),
      test_cache_(cache_capacity),
      history_cache_(cache_capacity) {
  check_spec(test_spec_);
  check_spec(history_spec_);
}

Vec Projector::test(const TestKey& key) {
  const std::string bytes = serialize_key(key);
  return test_cache_.get_or_compute(
      bytes, [&] { return generate_column(test_spec_, bytes); });
}

Vec Projector::history(const HistoryKey& key) {
  const std::string bytes = serialize_key(key);
  return history_cache_.get_or_compute(bytes, [&] {
    return modified_history_column(history_spec_, key.empty(), mode_, bytes);
  });
}

}  // namespace cpsr
