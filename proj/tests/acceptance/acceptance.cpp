// Runs every acceptance criterion and prints one PASS/FAIL line for each.
// Usage: acceptance [criterion numbers...]

#include <openssl/evp.h>
#include <signal.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "../support/reference_lru.hpp"
#include "mqttz/bench.hpp"
#include "mqttz/crypto_testing.hpp"
#include "mqttz/error.hpp"
#include "secure_store.hpp"
#include "trusted_core.hpp"

using namespace mqttz;
using namespace mqttz::bench;
using namespace std::chrono_literals;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Failure : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw Failure(what);
}

std::string fmt(double v, int precision = 1) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

Bytes random_bytes(std::mt19937_64& rng, std::size_t n) {
  Bytes b(n);
  for (auto& x : b) x = static_cast<std::uint8_t>(rng());
  return b;
}

const crypto::HukSeed& seed() {
  static const auto s = crypto::HukSeed::from_hex(kBenchSeedHex);
  return s;
}

EnvironmentOptions env_options(std::string acl, BrokerMode mode = BrokerMode::Tee) {
  EnvironmentOptions o;
  o.mode = mode;
  o.acl_text = std::move(acl);
  return o;
}

// ---- 1 -----------------------------------------------------------------------

Outcome end_to_end_round_trip() {
  auto start = Clock::now();
  Environment env(env_options(make_acl({"alice", "bob"}, {"ward/#"})));
  auto alice = env.connect("alice");
  auto bob = env.connect("bob");
  require(!(alice->key() == bob->key()), "clients must hold distinct keys");
  bob->subscribe("ward/bed-1/ecg");

  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> len(0, 20 * 1024);
  std::vector<Bytes> sent(1000);
  for (auto& p : sent) p = random_bytes(rng, len(rng));

  std::thread publisher([&] {
    for (const auto& p : sent) alice->publish("ward/bed-1/ecg", p);
  });
  std::size_t got = 0, mismatched = 0;
  while (got < sent.size()) {
    auto d = bob->next_delivery(10s);
    if (!d) break;
    if (d->plaintext != sent[got]) ++mismatched;
    ++got;
  }
  publisher.join();
  double secs = std::chrono::duration<double>(Clock::now() - start).count();
  std::size_t lost = sent.size() - got;
  return {lost == 0 && mismatched == 0 && bob->bad_padding_count() == 0 && secs < 60,
          std::to_string(got) + "/1000 delivered, " + std::to_string(mismatched) +
              " mismatched, " + std::to_string(lost) + " lost, " + fmt(secs, 2) + " s"};
}

// ---- 2 -----------------------------------------------------------------------

// Straight EVP calls, independent of the project's crypto wrappers.
Bytes evp_cbc(bool encrypt, ByteView key, ByteView iv, ByteView in) {
  std::unique_ptr<EVP_CIPHER_CTX, decltype(&EVP_CIPHER_CTX_free)> ctx(EVP_CIPHER_CTX_new(),
                                                                     EVP_CIPHER_CTX_free);
  Bytes out(in.size() + 32);
  int n1 = 0, n2 = 0;
  bool ok = EVP_CipherInit_ex(ctx.get(), EVP_aes_256_cbc(), nullptr, key.data(), iv.data(),
                              encrypt ? 1 : 0) == 1 &&
            EVP_CipherUpdate(ctx.get(), out.data(), &n1, in.data(), static_cast<int>(in.size())) == 1 &&
            EVP_CipherFinal_ex(ctx.get(), out.data() + n1, &n2) == 1;
  if (!ok) throw Failure("oracle cipher failed");
  out.resize(static_cast<std::size_t>(n1 + n2));
  return out;
}

Outcome reencryption_oracle() {
  ScratchDir dir("mqttz-acc-oracle");
  trusted::TrustedGateway gw({dir.path(), seed(), 64, {}});
  auto pub = crypto::PublicKey::from_pem(gw.public_key_pem());
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<std::size_t> len(0, 4096);
  std::size_t equal = 0;
  for (int i = 0; i < 200; ++i) {
    auto k1 = crypto::SymmetricKey::random();
    auto k2 = crypto::SymmetricKey::random();
    auto origin = ClientId::parse("origin-" + std::to_string(i));
    auto dest = ClientId::parse("dest-" + std::to_string(i));
    gw.provision_key(origin, crypto::wrap_client_key(pub, k1));
    gw.provision_key(dest, crypto::wrap_client_key(pub, k2));
    auto plain = random_bytes(rng, len(rng));
    auto in = crypto::encrypt_payload(k1, plain);

    auto out = gw.reencrypt(origin, dest, in).envelope;

    auto oracle_plain = evp_cbc(false, k1.bytes(), in.iv, in.ciphertext);
    auto oracle_cipher = evp_cbc(true, k2.bytes(), out.iv, oracle_plain);
    bool ok = oracle_plain == plain && oracle_cipher == out.ciphertext &&
              evp_cbc(false, k2.bytes(), out.iv, out.ciphertext) == plain && out.iv != in.iv;
    if (ok) ++equal;
  }
  return {equal == 200, std::to_string(equal) + "/200 triples equal to the two-step oracle"};
}

// ---- 3 -----------------------------------------------------------------------

Outcome plaintext_isolation() {
  std::mt19937_64 rng(31337);
  auto marker = random_bytes(rng, 256);
  std::mutex mu;
  std::size_t buffers = 0, leaks = 0, trusted_hits = 0;
  std::map<std::string, std::size_t> stages;
  std::ostringstream events;

  auto opts = env_options(make_acl({"alice", "bob", "carol"}));
  opts.events = &events;
  opts.hooks.dispatch_tap = [&](std::string_view stage, ByteView data) {
    std::lock_guard lock(mu);
    ++buffers;
    ++stages[std::string(stage)];
    if (contains_subsequence(data, marker)) ++leaks;
  };
  opts.hooks.trusted_plaintext_probe = [&](ByteView data) {
    std::lock_guard lock(mu);
    if (contains_subsequence(data, marker)) ++trusted_hits;
  };
  std::size_t delivered = 0;
  {
    Environment env(opts);
    auto alice = env.connect("alice");
    auto bob = env.connect("bob");
    auto carol = env.connect("carol");
    bob->subscribe("vitals");
    carol->subscribe("vitals");
    for (int i = 0; i < 5; ++i) alice->publish("vitals", marker);
    for (auto* c : {bob.get(), carol.get()})
      for (int i = 0; i < 5; ++i)
        if (auto d = c->next_delivery(5s); d && d->plaintext == marker) ++delivered;
  }
  auto log = events.str();
  bool log_leak = contains_subsequence(as_bytes(log), marker) ||
                  log.find(to_hex(marker)) != std::string::npos;
  std::lock_guard lock(mu);
  bool ok = delivered == 10 && buffers > 0 && leaks == 0 && !log_leak && trusted_hits == 10;
  return {ok, std::to_string(buffers) + " dispatch buffers captured, " + std::to_string(leaks) +
                  " contain the marker; trusted core saw it " + std::to_string(trusted_hits) +
                  "x; " + std::to_string(delivered) + "/10 delivered"};
}

// ---- 4 -----------------------------------------------------------------------

Outcome lru_oracle() {
  ScratchDir templ("mqttz-acc-lru-template");
  { trusted::TrustedCore core({templ.path(), seed(), 1, {}}); }

  std::string detail;
  bool all = true;
  for (std::size_t capacity : {1, 2, 12, 64, 128}) {
    ScratchDir dir("mqttz-acc-lru");
    fs::copy_file(templ.path() / std::string(trusted::kKeypairRecord),
                  dir.path() / std::string(trusted::kKeypairRecord));
    trusted::TrustedCore core({dir.path(), seed(), capacity, {}});
    test::ReferenceLru model(capacity);
    std::mt19937_64 rng(capacity * 104729);
    std::uniform_int_distribution<int> pick(0, 127);
    std::bernoulli_distribution is_put(0.3);
    bool agree = true;
    for (int op = 0; op < 10000; ++op) {
      auto name = "id" + std::to_string(pick(rng));
      auto id = ClientId::parse(name);
      if (is_put(rng)) {
        core.cache_put(id, crypto::SymmetricKey::random());
        model.put(name);
      } else {
        bool found = true;
        try {
          (void)core.cache_get(id);
        } catch (const Error& e) {
          if (e.code() != Errc::NoKey) throw;
          found = false;
        }
        if (found != model.get(name)) agree = false;
      }
    }
    auto s = core.stats();
    bool ok = agree && s.hits == model.hits && s.misses == model.misses &&
              s.evictions == model.evictions && s.size == model.size();
    all = all && ok;
    detail += "c=" + std::to_string(capacity) + " h/m/e " + std::to_string(s.hits) + "/" +
              std::to_string(s.misses) + "/" + std::to_string(s.evictions) +
              (ok ? " match" : " MISMATCH") + "; ";
  }
  return {all, detail};
}

// ---- 5 -----------------------------------------------------------------------

Outcome cache_shape() {
  CacheOptions opt;  // 128 keys, capacities 12/64/128, 128 queries, 100 runs
  auto runs = run_cache_bench(opt);
  std::map<std::size_t, std::vector<double>> lat;
  std::map<std::size_t, std::size_t> misses;
  for (const auto& r : runs) {
    auto& v = lat[r.capacity];
    v.insert(v.end(), r.lookup_us.begin(), r.lookup_us.end());
    misses[r.capacity] += r.misses;
  }
  double m12 = summarize(lat[12]).mean, m64 = summarize(lat[64]).mean,
         m128 = summarize(lat[128]).mean;
  bool ok = m12 > m64 && m64 > m128 && misses[128] == 0;
  return {ok, "mean lookup us: c12=" + fmt(m12, 2) + " c64=" + fmt(m64, 2) +
                  " c128=" + fmt(m128, 2) + "; medians " + fmt(summarize(lat[12]).p50, 2) + "/" +
                  fmt(summarize(lat[64]).p50, 2) + "/" + fmt(summarize(lat[128]).p50, 2) +
                  "; c128 misses after warm-up=" + std::to_string(misses[128])};
}

// ---- 6 -----------------------------------------------------------------------

Outcome overhead_direction() {
  std::map<BrokerMode, double> median;
  std::size_t lost = 0;
  for (auto mode : {BrokerMode::Vanilla, BrokerMode::Ree, BrokerMode::Tee}) {
    LatencyOptions opt;
    opt.mode = mode;
    opt.messages = 500;
    auto r = run_latency_macro(opt);
    lost += r.lost;
    median[mode] = r.delay_us.empty() ? 0 : summarize(r.delay_us).p50;
  }
  double v = median[BrokerMode::Vanilla], r = median[BrokerMode::Ree], t = median[BrokerMode::Tee];
  bool ok = lost == 0 && v < r && r < t;
  return {ok, "median delay us: vanilla=" + fmt(v) + " ree=" + fmt(r) + " tee=" + fmt(t) +
                  "; tee/vanilla=" + fmt(v > 0 ? t / v : 0, 2) + "x; lost=" + std::to_string(lost)};
}

// ---- 7 -----------------------------------------------------------------------

Outcome subscriber_scaling() {
  auto res = run_subscriber_scaling(BrokerMode::Tee, {1, 2, 4, 8, 16}, 300);
  bool monotone = std::is_sorted(res.medians_us.begin(), res.medians_us.end());
  bool calls = true;
  std::size_t lost = 0;
  std::string medians;
  for (std::size_t i = 0; i < res.runs.size(); ++i) {
    const auto& r = res.runs[i];
    if (r.reencrypt_calls != r.publishes * r.subscribers) calls = false;
    lost += r.lost;
    medians += std::to_string(r.subscribers) + ":" + fmt(res.medians_us[i]) + " ";
  }
  bool ok = monotone && res.fit.r2 >= 0.9 && calls && lost == 0;
  return {ok, "medians us " + medians + "; R^2=" + fmt(res.fit.r2, 4) + "; slope=" +
                  fmt(res.fit.slope) + " us/sub; calls per publish exact=" + (calls ? "yes" : "no") +
                  "; lost=" + std::to_string(lost)};
}

// ---- 8 -----------------------------------------------------------------------

Outcome store_fetch_dominance() {
  MicroOptions opt;
  opt.modes = {MicroMode::TeeMem, MicroMode::TeeStore};
  auto samples = run_reencrypt_micro(opt);
  std::map<std::pair<MicroMode, std::size_t>, std::vector<double>> dec;
  for (const auto& s : samples) dec[{s.mode, s.block_size}].push_back(s.timing.retrieve_dec_key_us);
  bool ok = true;
  std::string detail;
  for (auto b : opt.block_sizes) {
    double mem = summarize(dec[{MicroMode::TeeMem, b}]).mean;
    double store = summarize(dec[{MicroMode::TeeStore, b}]).mean;
    if (!(store > mem)) ok = false;
    detail += std::to_string(b) + "B: " + fmt(store, 2) + " vs " + fmt(mem, 2) + "; ";
  }
  return {ok, "mean retrieve_dec_key us store vs mem " + detail};
}

// ---- 9 -----------------------------------------------------------------------

Outcome medtech() {
  MedtechOptions opt;
  opt.broker_binary = MQTTZ_BROKER_BIN;
  auto rep = run_medtech_workload(opt);
  double cpu = rep.broker_cpu_percent.empty() ? 0 : summarize(rep.broker_cpu_percent).mean;
  double agg = summarize(rep.aggregate_bps).p50;
  bool ok = rep.max_window_bytes <= opt.max_rate_bps && rep.in_band_fraction >= 0.8 &&
            rep.lost == 0;
  return {ok, "median aggregate " + fmt(agg, 0) + " B/s, in band " +
                  fmt(100 * rep.in_band_fraction) + "% of " + std::to_string(rep.seconds) +
                  " s, max 1 s window " + fmt(rep.max_window_bytes, 0) + " B, sent " +
                  std::to_string(rep.sent) + " lost " + std::to_string(rep.lost) +
                  ", broker CPU mean " + fmt(cpu, 2) + "%"};
}

// ---- 10 ----------------------------------------------------------------------

Outcome crypto_known_answers() {
  // AES-256-CBC, NIST SP 800-38A F.2.5, plus the PKCS#7 padding block.
  auto key = crypto::SymmetricKey::from_hex(
      "603deb1015ca71be2b73aef0857d77811f352c073b6108d72d9810a30914dff4");
  std::array<std::uint8_t, kIvSize> iv{};
  auto iv_raw = from_hex("000102030405060708090a0b0c0d0e0f");
  std::copy(iv_raw.begin(), iv_raw.end(), iv.begin());
  auto plain = from_hex(
      "6bc1bee22e409f96e93d7e117393172aae2d8a571e03ac9c9eb76fac45af8e51"
      "30c81c46a35ce411e5fbc1191a0a52eff69f2445df4f9b17ad2b417be66c3710");
  auto env = crypto::testing::encrypt_payload_with_iv(key, iv, plain);
  bool aes = to_hex(env.ciphertext) ==
                 "f58c4c04d6e5f1ba779eabfb5f7bfbd69cfc4e967edb808d679f777bc6702c7d"
                 "39f23369a9d9bacfa530e26304231461b2eb05e2c39be9fcda6c19078c6a9d1b"
                 "3f461796d6b0d6b2e0c2a72b4d80e644" &&
             crypto::decrypt_payload(key, env) == plain;

  // HKDF-SHA-256, RFC 5869 test cases 1 and 3.
  Bytes ikm(22, 0x0b);
  bool hkdf =
      to_hex(crypto::hkdf_sha256(ikm, from_hex("000102030405060708090a0b0c"),
                                 from_hex("f0f1f2f3f4f5f6f7f8f9"), 42)) ==
          "3cb25f25faacd57a90434f64d0362f2a2d2d0a90cf1a5a4c5db02d56ecc4c5bf34007208d5b887185865" &&
      to_hex(crypto::hkdf_sha256(ikm, {}, {}, 42)) ==
          "8da4e775a563c18f715f802a063c5a31b8a11f5c5ee1879ec3454e5f3c738d2d9d201395faa4b61a96c8";

  // Single-byte tampering at 50 distinct positions of a sealed record.
  ScratchDir dir("mqttz-acc-tamper");
  trusted::SecureStore store(dir.path(), crypto::derive_storage_key(seed()));
  auto id = ClientId::parse("ecg-7");
  auto k = crypto::SymmetricKey::random();
  store.seal(id, k);
  auto path = store.record_path(id);
  std::ifstream in(path, std::ios::binary);
  Bytes record((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  std::vector<std::size_t> positions(record.size());
  std::iota(positions.begin(), positions.end(), 0);
  std::mt19937_64 rng(50);
  std::shuffle(positions.begin(), positions.end(), rng);
  positions.resize(std::min<std::size_t>(50, positions.size()));
  std::size_t detected = 0;
  for (auto pos : positions) {
    auto tampered = record;
    tampered[pos] ^= static_cast<std::uint8_t>(1 + rng() % 255);
    std::ofstream(path, std::ios::binary | std::ios::trunc)
        .write(reinterpret_cast<const char*>(tampered.data()), static_cast<std::streamsize>(tampered.size()));
    try {
      (void)store.unseal(id);
    } catch (const Error& e) {
      if (e.code() == Errc::UnsealFailed) ++detected;
    }
  }
  bool ok = aes && hkdf && detected == 50;
  return {ok, std::string("AES-256-CBC ") + (aes ? "ok" : "WRONG") + ", HKDF " +
                  (hkdf ? "ok" : "WRONG") + ", tamper detected " + std::to_string(detected) + "/50"};
}

// ---- 11 ----------------------------------------------------------------------

bool wrong_pubkey_rejected() {
  Environment env(env_options(make_acl({"alice"})));
  auto wrong = env.dir() / "wrong_pub.pem";
  std::ofstream(wrong) << crypto::BrokerKeyPair::generate().public_pem();
  auto cfg = env.client_config("alice");
  cfg.broker_pubkey = wrong;
  client::Client alice(cfg);
  alice.connect();
  bool rejected = false;
  try {
    alice.perform_handshake();
  } catch (const Error& e) {
    rejected = e.code() == Errc::HandshakeRejected;
  }
  alice.publish("a", to_bytes("x"));
  alice.next_delivery(500ms);
  auto errors = alice.take_errors();
  return rejected && !alice.handshake_complete() && errors.size() == 1 &&
         errors[0] == ErrorCode::Unauthorized && env.broker().counters().publishes_accepted == 0;
}

bool empty_acl_denies_all() {
  Environment env(env_options(""));
  bool handshake_denied = false;
  client::Client alice(env.client_config("alice"));
  alice.connect();
  try {
    alice.perform_handshake();
  } catch (const Error& e) {
    handshake_denied = e.code() == Errc::HandshakeRejected;
  }
  bool subscribe_denied = false;
  try {
    alice.subscribe("a", 2000ms);
  } catch (const Error& e) {
    subscribe_denied = e.code() == Errc::Unauthorized;
  }
  alice.publish("a", to_bytes("x"));
  alice.next_delivery(500ms);
  auto errors = alice.take_errors();
  auto c = env.broker().counters();
  return handshake_denied && subscribe_denied && errors.size() == 1 &&
         errors[0] == ErrorCode::Unauthorized && c.handshakes_ok == 0 &&
         c.publishes_accepted == 0 && c.subscribes_accepted == 0;
}

bool ack_bound_to_wrong_client() {
  ScratchDir dir("mqttz-acc-fake");
  net::generate_dev_certificate(dir.path() / "c.pem", dir.path() / "k.pem");
  std::ofstream(dir.path() / "pub.pem") << crypto::BrokerKeyPair::generate().public_pem();
  net::TlsServerContext tls(dir.path() / "c.pem", dir.path() / "k.pem");
  net::Listener listener(net::Endpoint{"127.0.0.1", 0});
  auto key = crypto::SymmetricKey::random();

  std::thread fake([&] {
    int fd = -1;
    for (int i = 0; i < 100 && fd < 0; ++i) fd = listener.accept(100ms);
    if (fd < 0) return;
    net::PacketStream s(net::accept_tls(fd, tls));
    try {
      while (auto p = s.receive(5s)) {
        if (std::holds_alternative<ConnectPacket>(*p)) s.send(ConnAckPacket{});
        if (std::holds_alternative<HandshakeReqPacket>(*p))
          s.send(HandshakeAckPacket{crypto::encrypt_payload(key, to_bytes("MQTTZ-ACK:mallory"))});
      }
    } catch (const Error&) {
    }
  });
  client::ClientConfig cfg;
  cfg.broker = net::Endpoint{"127.0.0.1", listener.port()};
  cfg.broker_pubkey = dir.path() / "pub.pem";
  cfg.client_id = "alice";
  cfg.trust_root = dir.path() / "c.pem";
  bool mismatch = false;
  {
    client::Client alice(cfg, key);
    try {
      alice.establish();
    } catch (const Error& e) {
      mismatch = e.code() == Errc::AckMismatch;
    }
    mismatch = mismatch && !alice.handshake_complete();
  }
  fake.join();
  return mismatch;
}

Outcome handshake_negatives() {
  bool a = wrong_pubkey_rejected();
  bool b = empty_acl_denies_all();
  bool c = ack_bound_to_wrong_client();
  auto word = [](bool ok) { return ok ? "ok" : "WRONG"; };
  return {a && b && c, std::string("wrong-key wrap ") + word(a) + ", empty ACL " + word(b) +
                           ", foreign ACK " + word(c)};
}

// ---- 12 ----------------------------------------------------------------------

Outcome crash_durability() {
  constexpr std::size_t kClients = 12;
  ScratchDir dir("mqttz-acc-crash");
  auto d = dir.path();
  net::generate_dev_certificate(d / "c.pem", d / "k.pem");
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < kClients; ++i) ids.push_back("patient-" + std::to_string(i));
  std::ofstream(d / "acl") << make_acl(ids);

  net::Endpoint ep{"127.0.0.1", free_port()};
  std::vector<std::string> args{"--listen", ep.to_string(), "--cert", (d / "c.pem").string(),
                                "--key", (d / "k.pem").string(), "--acl", (d / "acl").string(),
                                "--store-dir", (d / "store").string(), "--cache-capacity", "4",
                                "--export-pubkey", (d / "pub.pem").string()};
  std::map<std::string, std::string> env{{"MQTTZ_HUK_SEED", std::string(kBenchSeedHex)}};
  auto read_text = [](const fs::path& p) {
    std::ifstream in(p);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  };

  std::vector<crypto::SymmetricKey> keys;
  std::string pem_before;
  {
    BrokerProcess broker(MQTTZ_BROKER_BIN, args, env, d / "broker.log", d / "pub.pem", ep);
    pem_before = read_text(d / "pub.pem");
    for (const auto& id : ids) {
      client::ClientConfig cfg;
      cfg.broker = ep;
      cfg.broker_pubkey = d / "pub.pem";
      cfg.client_id = id;
      cfg.trust_root = d / "c.pem";
      client::Client c(cfg);
      c.establish();
      keys.push_back(c.key());
    }
    broker.signal(SIGKILL);
    int status = broker.wait();
    require(WIFSIGNALED(status) && WTERMSIG(status) == SIGKILL, "broker was not killed");
  }

  std::string pem_after;
  {
    BrokerProcess broker(MQTTZ_BROKER_BIN, args, env, d / "broker.log", d / "pub.pem", ep);
    pem_after = read_text(d / "pub.pem");
    broker.signal(SIGTERM);
    broker.wait();
  }

  // Every key must come back out of secure storage under the same seed.
  trusted::TrustedGateway gw({d / "store", seed(), 2, {}});
  std::mt19937_64 rng(12);
  std::size_t usable = 0;
  for (std::size_t i = 0; i < kClients; ++i) {
    std::size_t j = (i + 1) % kClients;
    auto plain = random_bytes(rng, 64 + i);
    try {
      auto out = gw.reencrypt(ClientId::parse(ids[i]), ClientId::parse(ids[j]),
                              crypto::encrypt_payload(keys[i], plain));
      if (crypto::decrypt_payload(keys[j], out.envelope) == plain) ++usable;
    } catch (const Error&) {
    }
  }
  bool same_key = !pem_before.empty() && pem_before == pem_after;
  return {usable == kClients && same_key,
          std::to_string(usable) + "/" + std::to_string(kClients) +
              " keys usable after SIGKILL and restart; broker public key " +
              (same_key ? "unchanged" : "CHANGED")};
}

struct Criterion {
  int number;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<Criterion> all{
      {1, "end-to-end confidentiality round trip", end_to_end_round_trip},
      {2, "re-encryption equals two-step oracle", reencryption_oracle},
      {3, "plaintext isolation from broker dispatch", plaintext_isolation},
      {4, "LRU cache matches reference model", lru_oracle},
      {5, "cache experiment ordering", cache_shape},
      {6, "security overhead direction", overhead_direction},
      {7, "subscriber scaling", subscriber_scaling},
      {8, "secure-store key fetch dominance", store_fetch_dominance},
      {9, "hospital-floor workload", medtech},
      {10, "crypto known answers and tamper detection", crypto_known_answers},
      {11, "handshake negatives", handshake_negatives},
      {12, "crash durability", crash_durability},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.number)) continue;
    auto start = Clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("error: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(Clock::now() - start).count();
    if (!out.pass) ++failed;
    std::cout << (out.pass ? "PASS" : "FAIL") << "  [" << std::setw(2) << c.number << "] "
              << c.name << ": " << out.detail << " (" << fmt(secs, 1) << " s)" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
