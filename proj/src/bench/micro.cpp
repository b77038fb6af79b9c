#include <random>

#include "mqttz/bench.hpp"
#include "mqttz/error.hpp"

namespace mqttz::bench {

std::string_view micro_mode_name(MicroMode mode) noexcept {
  switch (mode) {
    case MicroMode::Ree: return "ree";
    case MicroMode::TeeMem: return "tee-mem";
    case MicroMode::TeeStore: return "tee-store";
  }
  return "unknown";
}

namespace {

std::unique_ptr<KeyService> make_service(MicroMode mode, const std::filesystem::path& store) {
  if (mode == MicroMode::Ree) return std::make_unique<ReeKeyService>();
  trusted::TrustedConfig cfg;
  cfg.store_dir = store;
  cfg.huk_seed = crypto::HukSeed::from_hex(kBenchSeedHex);
  // With room for a single key every lookup of the pair goes to secure storage.
  cfg.cache_capacity = mode == MicroMode::TeeStore ? 1 : trusted::kDefaultCacheCapacity;
  return std::make_unique<TrustedKeyService>(std::move(cfg));
}

}  // namespace

std::vector<MicroSample> run_reencrypt_micro(const MicroOptions& options) {
  std::vector<MicroSample> samples;
  samples.reserve(options.modes.size() * options.block_sizes.size() *
                  static_cast<std::size_t>(options.runs));
  std::mt19937_64 rng(options.seed);

  for (auto mode : options.modes) {
    ScratchDir scratch("mqttz-micro");
    auto service = make_service(mode, scratch.path() / "store");
    auto pub = crypto::PublicKey::from_pem(service->public_key_pem());
    auto origin = ClientId::parse("micro-origin");
    auto dest = ClientId::parse("micro-dest");
    auto k_origin = crypto::SymmetricKey::random();
    auto k_dest = crypto::SymmetricKey::random();
    service->provision_key(origin, crypto::wrap_client_key(pub, k_origin));
    service->provision_key(dest, crypto::wrap_client_key(pub, k_dest));

    Bytes warm(64, 0x5a);
    service->reencrypt(origin, dest, crypto::encrypt_payload(k_origin, warm));

    for (auto size : options.block_sizes) {
      Bytes plain(size);
      for (int run = 0; run < options.runs; ++run) {
        for (auto& b : plain) b = static_cast<std::uint8_t>(rng());
        auto env = crypto::encrypt_payload(k_origin, plain);
        auto result = service->reencrypt(origin, dest, env);
        if (crypto::decrypt_payload(k_dest, result.envelope) != plain)
          throw Error(Errc::Internal, "re-encryption produced a wrong plaintext");
        samples.push_back(MicroSample{mode, run, size, result.timing});
      }
    }
  }
  return samples;
}

void write_micro_csv(std::ostream& os, const std::vector<MicroSample>& samples) {
  os << "scenario,run,phase,block_size,value_us\n";
  for (const auto& s : samples) {
    auto row = [&](std::string_view phase, double v) {
      os << micro_mode_name(s.mode) << ',' << s.run << ',' << phase << ',' << s.block_size << ','
         << v << '\n';
    };
    row("retrieve_dec_key", s.timing.retrieve_dec_key_us);
    row("retrieve_enc_key", s.timing.retrieve_enc_key_us);
    row("decrypt", s.timing.decrypt_us);
    row("encrypt", s.timing.encrypt_us);
    row("total", s.timing.total_us);
  }
}

}  // namespace mqttz::bench
