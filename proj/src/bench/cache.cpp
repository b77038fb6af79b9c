#include <cstdio>
#include <random>

#include "mqttz/bench.hpp"

namespace mqttz::bench {
namespace fs = std::filesystem;

namespace {

std::string key_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sensor-%04zu", i);
  return buf;
}

trusted::TrustedConfig core_config(const fs::path& store, std::size_t capacity) {
  trusted::TrustedConfig cfg;
  cfg.store_dir = store;
  cfg.huk_seed = crypto::HukSeed::from_hex(kBenchSeedHex);
  cfg.cache_capacity = capacity;
  return cfg;
}

}  // namespace

std::vector<CacheRun> run_cache_bench(const CacheOptions& options) {
  // Provision every key once; each run starts from a copy of this store.
  ScratchDir templ("mqttz-cache-template");
  std::vector<ClientId> ids;
  {
    trusted::TrustedGateway gw(core_config(templ.path(), options.total_keys));
    auto pub = crypto::PublicKey::from_pem(gw.public_key_pem());
    for (std::size_t i = 0; i < options.total_keys; ++i) {
      ids.push_back(ClientId::parse(key_id(i)));
      gw.provision_key(ids.back(), crypto::wrap_client_key(pub, crypto::SymmetricKey::random()));
    }
  }

  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<std::size_t> pick(0, options.total_keys - 1);
  std::vector<CacheRun> out;
  for (auto capacity : options.capacities) {
    for (int run = 0; run < options.runs; ++run) {
      ScratchDir store("mqttz-cache-run");
      fs::copy(templ.path(), store.path(), fs::copy_options::recursive);
      trusted::TrustedGateway gw(core_config(store.path(), capacity));
      for (const auto& id : ids) (void)gw.probe_key(id);

      CacheRun r{capacity, run, {}, {}, 0, 0};
      r.lookup_us.reserve(options.queries);
      for (std::size_t q = 0; q < options.queries; ++q) {
        auto probe = gw.probe_key(ids[pick(rng)]);
        r.lookup_us.push_back(probe.lookup_us);
        r.hit.push_back(probe.hit);
        probe.hit ? ++r.hits : ++r.misses;
      }
      out.push_back(std::move(r));
    }
  }
  return out;
}

void write_cache_csv(std::ostream& os, const std::vector<CacheRun>& runs) {
  os << "scenario,run,query,hit,value_us\n";
  for (const auto& r : runs)
    for (std::size_t q = 0; q < r.lookup_us.size(); ++q)
      os << "cache-" << r.capacity << ',' << r.run << ',' << q << ',' << (r.hit[q] ? 1 : 0) << ','
         << r.lookup_us[q] << '\n';
}

}  // namespace mqttz::bench
