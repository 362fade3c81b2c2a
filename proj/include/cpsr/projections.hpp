#pragma once

#include <cstdint>
#include <list>
#include <mutex>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cpsr/linalg.hpp"

namespace cpsr {

// A test: a future action-observation sequence, aligned pairwise.
struct TestKey {
  std::vector<int> actions;
  std::vector<int> observations;

  std::size_t length() const { return actions.size(); }
  bool operator==(const TestKey&) const = default;
};

// A history: the action-observation sequence seen so far. May be empty.
struct HistoryKey {
  std::vector<int> actions;
  std::vector<int> observations;

  std::size_t length() const { return actions.size(); }
  bool empty() const { return actions.empty(); }
  bool operator==(const HistoryKey&) const = default;
};

enum class ProjectionFamily { spherical, rademacher, hashed };

// Start-state convention for the history feature map. unique_start reserves
// the first coordinate for the null history; dummy_column instead prepends a
// constant 1 to every column so the start vector can be estimated as a
// feasible mixture when no unique start state exists.
enum class StartMode { unique_start, dummy_column };

// Describes one lazily-generated random projection. Columns are a pure
// function of (family, dim, seed, signed_hash, key bytes): no projection
// matrix is ever materialized.
struct ProjectionSpec {
  ProjectionFamily family = ProjectionFamily::spherical;
  int dim = 0;
  std::uint64_t seed = 0;
  bool signed_hash = false;  // hashed family only

  bool operator==(const ProjectionSpec&) const = default;
};

// Injective byte serialization of keys (kind tag, length prefix, fixed-width
// ids), hashed to seed the per-key generator stream.
std::string serialize_key(const TestKey& key);
std::string serialize_key(const HistoryKey& key);

// The projection column for one test. spherical: iid Normal(0, 1/dim).
// rademacher: iid +-1/sqrt(dim). hashed: a single 1 (or +-1 when signed) in a
// seeded pseudo-random row.
Vec phi_column(const ProjectionSpec& spec, const TestKey& key);

// The modified history map, one entry longer than spec.dim. unique_start:
// the null history maps to (1, 0, ..., 0) and any other history to
// (0, phi(h)). dummy_column: every history maps to (1, phi(h)).
Vec phi_history_column(const ProjectionSpec& spec, const HistoryKey& key,
                       StartMode mode);

// Read-through LRU cache over generated columns. Lookups are transparent:
// a cached column is identical to a freshly generated one. Safe for
// concurrent use; reads that hit still update recency under the lock.
class PhiCache {
 public:
  explicit PhiCache(std::size_t capacity);

  // Movable so owners can be returned from builders; moving a cache that
  // another thread is still using is a caller error, as with any container.
  PhiCache(PhiCache&& other) noexcept : capacity_(other.capacity_) {
    std::lock_guard<std::mutex> lock(other.mutex_);
    order_ = std::move(other.order_);
    index_ = std::move(other.index_);
    materializations_ = other.materializations_;
  }
  PhiCache(const PhiCache&) = delete;
  PhiCache& operator=(const PhiCache&) = delete;
  PhiCache& operator=(PhiCache&&) = delete;

  template <typename MakeFn>
  Vec get_or_compute(const std::string& key, MakeFn&& make) {
    std::lock_guard<std::mutex> lock(mutex_);
    if (auto it = index_.find(key); it != index_.end()) {
      order_.splice(order_.begin(), order_, it->second);
      return it->second->second;
    }
    ++materializations_;
    order_.emplace_front(key, make());
    index_[key] = order_.begin();
    if (order_.size() > capacity_) {
      index_.erase(order_.back().first);
      order_.pop_back();
    }
    return order_.front().second;
  }

  std::size_t materializations() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return materializations_;
  }
  std::size_t size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return order_.size();
  }

 private:
  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::list<std::pair<std::string, Vec>> order_;  // front = most recent
  std::unordered_map<std::string, std::list<std::pair<std::string, Vec>>::iterator>
      index_;
  std::size_t materializations_ = 0;
};

inline constexpr std::size_t kDefaultCacheCapacity = std::size_t{1} << 20;

// Cached access to the test and history feature maps used while scanning a
// corpus. One instance per model build; both caches share one capacity value.
class Projector {
 public:
  Projector(ProjectionSpec test_spec, ProjectionSpec history_spec, StartMode mode,
            std::size_t cache_capacity = kDefaultCacheCapacity);

  Vec test(const TestKey& key);
  Vec history(const HistoryKey& key);

  const ProjectionSpec& test_spec() const { return test_spec_; }
  const ProjectionSpec& history_spec() const { return history_spec_; }
  StartMode start_mode() const { return mode_; }
  std::size_t test_materializations() const { return test_cache_.materializations(); }
  std::size_t history_materializations() const {
    return history_cache_.materializations();
  }

 private:
  ProjectionSpec test_spec_;
  ProjectionSpec history_spec_;
  StartMode mode_;
  PhiCache test_cache_;
  PhiCache history_cache_;
};

}  // namespace cpsr
