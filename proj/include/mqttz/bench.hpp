#pragma once

#include <sys/types.h>

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "mqttz/broker.hpp"
#include "mqttz/client.hpp"
#include "mqttz/trusted.hpp"

namespace mqttz::bench {

// ---- statistics -----------------------------------------------------------

struct Summary {
  std::size_t count = 0;
  double min = 0, p25 = 0, p50 = 0, p75 = 0, p90 = 0, p99 = 0, max = 0;
  double mean = 0;
  double stddev = 0;  // sample standard deviation, 0 for a single sample
};

// Nearest-rank percentiles. Throws Error(Empty) on no samples.
Summary summarize(std::span<const double> samples);

// Nearest-rank percentile of an ascending sequence, p in [0, 100].
double nearest_rank(std::span<const double> sorted, double p);

struct LinearFit {
  double slope = 0;
  double intercept = 0;
  double r2 = 0;
};

// Ordinary least squares. Throws Error(InvalidArgument) for fewer than two
// points or mismatched sizes.
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

std::ostream& operator<<(std::ostream& os, const Summary& s);

// ---- environment ----------------------------------------------------------

// Fresh directory, removed on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& prefix = "mqttz-bench");
  ~ScratchDir();
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

// Grants every listed client read and write on `patterns`.
std::string make_acl(const std::vector<std::string>& clients,
                     const std::vector<std::string>& patterns = {"#"});

inline constexpr std::string_view kBenchSeedHex =
    "6d7174747a2d62656e63682d68756b2d736565642d2d2d2d2d2d2d2d2d2d2d01";

struct EnvironmentOptions {
  BrokerMode mode = BrokerMode::Tee;
  std::size_t cache_capacity = trusted::kDefaultCacheCapacity;
  std::string acl_text;
  BrokerHooks hooks;
  std::ostream* events = nullptr;
  // Reuse an existing store directory instead of a fresh one.
  std::filesystem::path store_dir;
};

// A broker on an ephemeral local port with its own certificate, ACL, store
// and exported public key.
class Environment {
 public:
  explicit Environment(EnvironmentOptions options);
  ~Environment();

  Broker& broker() noexcept { return *broker_; }
  BrokerMode mode() const noexcept { return options_.mode; }
  const std::filesystem::path& dir() const noexcept { return scratch_.path(); }
  std::filesystem::path cert() const { return dir() / "broker.crt"; }
  std::filesystem::path key() const { return dir() / "broker.key"; }
  std::filesystem::path acl() const { return dir() / "acl.conf"; }
  std::filesystem::path pubkey() const { return dir() / "broker_pub.pem"; }
  const std::filesystem::path& store() const noexcept { return store_; }

  // Rewrites the ACL file and reloads it.
  void set_acl(const std::string& text);

  client::ClientConfig client_config(const std::string& id) const;
  // Connected and handshaken client, with a fresh key unless one is given.
  std::unique_ptr<client::Client> connect(
      const std::string& id, std::optional<crypto::SymmetricKey> key = std::nullopt) const;

 private:
  EnvironmentOptions options_;
  ScratchDir scratch_;
  std::filesystem::path store_;
  std::unique_ptr<Broker> broker_;
};

// The broker executable in a child process.
class BrokerProcess {
 public:
  // stdout and stderr go to `log_path`. Waits until the public key has been
  // exported and the port accepts connections. Throws Error(Io) on failure.
  BrokerProcess(const std::filesystem::path& binary, const std::vector<std::string>& args,
                const std::map<std::string, std::string>& env,
                const std::filesystem::path& log_path, const std::filesystem::path& ready_file,
                const net::Endpoint& endpoint);
  ~BrokerProcess();
  BrokerProcess(const BrokerProcess&) = delete;
  BrokerProcess& operator=(const BrokerProcess&) = delete;

  pid_t pid() const noexcept { return pid_; }
  void signal(int sig);
  // Returns the raw wait status.
  int wait();
  // utime + stime in seconds from /proc/<pid>/stat.
  double cpu_seconds() const;

 private:
  pid_t pid_ = -1;
};

// Unused TCP port on 127.0.0.1.
std::uint16_t free_port();

// ---- re-encryption micro benchmark ---------------------------------------

enum class MicroMode { Ree, TeeMem, TeeStore };
std::string_view micro_mode_name(MicroMode mode) noexcept;

struct MicroOptions {
  std::vector<std::size_t> block_sizes{20, 200, 2048, 4096, 20480};
  std::vector<MicroMode> modes{MicroMode::Ree, MicroMode::TeeMem, MicroMode::TeeStore};
  int runs = 100;
  std::uint64_t seed = 1;
};

struct MicroSample {
  MicroMode mode;
  int run;
  std::size_t block_size;
  trusted::ReencryptTiming timing;
};

std::vector<MicroSample> run_reencrypt_micro(const MicroOptions& options);
// scenario,run,phase,block_size,value_us with five phase rows per sample.
void write_micro_csv(std::ostream& os, const std::vector<MicroSample>& samples);

// ---- cache experiment -----------------------------------------------------

struct CacheOptions {
  std::size_t total_keys = 128;
  std::vector<std::size_t> capacities{12, 64, 128};
  std::size_t queries = 128;
  int runs = 100;
  std::uint64_t seed = 1;
};

struct CacheRun {
  std::size_t capacity;
  int run;
  std::vector<double> lookup_us;
  std::vector<bool> hit;
  std::size_t hits = 0;
  std::size_t misses = 0;
};

// Per run: a fresh trusted core over a store preloaded with `total_keys`
// sealed keys, one sequential warm-up pass over all keys, then `queries`
// uniform random lookups that are recorded.
std::vector<CacheRun> run_cache_bench(const CacheOptions& options);
// scenario,run,query,hit,value_us
void write_cache_csv(std::ostream& os, const std::vector<CacheRun>& runs);

// ---- dissemination delay --------------------------------------------------

struct LatencyOptions {
  BrokerMode mode = BrokerMode::Tee;
  std::size_t messages = 500;
  std::size_t payload_size = 4096;
  std::size_t subscribers = 1;
  net::Millis loss_timeout{5000};
  std::uint64_t seed = 1;
};

struct LatencyResult {
  BrokerMode mode;
  std::size_t subscribers = 0;
  // Per message: receive time at the last subscriber to get it minus send time.
  std::vector<double> delay_us;
  std::size_t lost = 0;
  std::uint64_t reencrypt_calls = 0;
  std::size_t publishes = 0;
};

// One publisher, `subscribers` subscribers on one topic. Closed loop: the
// next message is published once every subscriber has the previous one.
LatencyResult run_latency_macro(const LatencyOptions& options);
// scenario,msg_seq,delay_us
void write_latency_csv(std::ostream& os, const std::vector<LatencyResult>& results);

struct ScalingResult {
  std::vector<LatencyResult> runs;
  std::vector<double> counts;
  std::vector<double> medians_us;
  LinearFit fit;
};

ScalingResult run_subscriber_scaling(BrokerMode mode, const std::vector<std::size_t>& counts,
                                     std::size_t messages_per_count, std::uint64_t seed = 1);

// ---- hospital-floor workload ----------------------------------------------

struct MedtechOptions {
  std::filesystem::path broker_binary;
  BrokerMode mode = BrokerMode::Tee;
  std::size_t publishers = 50;
  double max_rate_bps = 350;
  // Plaintext bytes per ECG chunk; 112 gives a 166-byte PUBLISH frame.
  std::size_t chunk_size = 112;
  double duty_cycle = 0.5;
  double duration_s = 60;
  std::uint64_t seed = 1;
};

struct MedtechReport {
  std::size_t seconds = 0;
  // [second][publisher] frame bytes sent.
  std::vector<std::vector<std::size_t>> bytes;
  std::vector<double> aggregate_bps;
  // Largest byte count any publisher put in a 1 s sliding window.
  double max_window_bytes = 0;
  std::size_t sent = 0;
  std::size_t received = 0;
  std::size_t lost = 0;
  // Broker CPU utilization per second, percent of one core.
  std::vector<double> broker_cpu_percent;
  // Fraction of seconds whose aggregate is within [2400, 6000] B/s.
  double in_band_fraction = 0;
};

MedtechReport run_medtech_workload(const MedtechOptions& options);
// second,publisher,bytes
void write_medtech_csv(std::ostream& os, const MedtechReport& report);

}  // namespace mqttz::bench
