#include "lru_key_cache.hpp"

#include "mqttz/error.hpp"

namespace mqttz::trusted {

LruKeyCache::LruKeyCache(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw Error(Errc::InvalidArgument, "cache capacity must be positive");
}

const crypto::SymmetricKey* LruKeyCache::lookup(const ClientId& id) {
  auto it = index_.find(id);
  if (it == index_.end()) {
    ++misses_;
    return nullptr;
  }
  ++hits_;
  order_.splice(order_.begin(), order_, it->second);
  return &it->second->second;
}

const LruKeyCache::Entry* LruKeyCache::victim_for(const ClientId& id) const {
  if (contains(id) || order_.size() < capacity_) return nullptr;
  return &order_.back();
}

std::optional<ClientId> LruKeyCache::insert(const ClientId& id, crypto::SymmetricKey key) {
  if (auto it = index_.find(id); it != index_.end()) {
    it->second->second = std::move(key);
    order_.splice(order_.begin(), order_, it->second);
    return std::nullopt;
  }
  order_.emplace_front(id, std::move(key));
  index_.emplace(id, order_.begin());
  if (order_.size() <= capacity_) return std::nullopt;

  ClientId victim = order_.back().first;
  index_.erase(victim);
  order_.pop_back();
  ++evictions_;
  return victim;
}

}  // namespace mqttz::trusted
