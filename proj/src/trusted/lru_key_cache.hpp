#pragma once

#include <cstdint>
#include <list>
#include <optional>
#include <unordered_map>
#include <utility>

#include "mqttz/crypto.hpp"
#include "mqttz/protocol.hpp"

namespace mqttz::trusted {

// In-memory LRU map ClientId -> SymmetricKey. Storage policy (write-through,
// write-back on eviction) is applied by TrustedCore, not here.
class LruKeyCache {
 public:
  using Entry = std::pair<ClientId, crypto::SymmetricKey>;

  // Throws Error(InvalidArgument) for capacity 0.
  explicit LruKeyCache(std::size_t capacity);

  // Counts a hit or a miss. A hit promotes the entry to most-recent.
  const crypto::SymmetricKey* lookup(const ClientId& id);

  bool contains(const ClientId& id) const { return index_.count(id) != 0; }

  // The entry insert(id, ...) would evict, if any.
  const Entry* victim_for(const ClientId& id) const;

  // Inserts or overwrites `id` as most-recent. Returns the evicted id, if the
  // insert pushed the cache over capacity.
  std::optional<ClientId> insert(const ClientId& id, crypto::SymmetricKey key);

  // Most-recent first.
  const std::list<Entry>& entries() const noexcept { return order_; }

  std::size_t size() const noexcept { return order_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  std::uint64_t hits() const noexcept { return hits_; }
  std::uint64_t misses() const noexcept { return misses_; }
  std::uint64_t evictions() const noexcept { return evictions_; }

 private:
  std::size_t capacity_;
  std::list<Entry> order_;
  std::unordered_map<ClientId, std::list<Entry>::iterator> index_;
  std::uint64_t hits_ = 0;
  std::uint64_t misses_ = 0;
  std::uint64_t evictions_ = 0;
};

}  // namespace mqttz::trusted
