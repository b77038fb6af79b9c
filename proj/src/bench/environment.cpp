#include <fcntl.h>
#include <netinet/in.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "mqttz/bench.hpp"
#include "mqttz/error.hpp"

extern char** environ;

namespace mqttz::bench {
namespace fs = std::filesystem;

ScratchDir::ScratchDir(const std::string& prefix) {
  std::random_device rd;
  auto base = fs::temp_directory_path();
  for (;;) {
    path_ = base / (prefix + "-" + std::to_string(rd()));
    if (fs::create_directory(path_)) break;
  }
}

ScratchDir::~ScratchDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::string make_acl(const std::vector<std::string>& clients,
                     const std::vector<std::string>& patterns) {
  std::string out;
  for (const auto& c : clients) {
    out += "user " + c + "\n";
    for (const auto& p : patterns) out += "topic readwrite " + p + "\n";
  }
  return out;
}

namespace {

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
}

}  // namespace

Environment::Environment(EnvironmentOptions options)
    : options_(std::move(options)), scratch_("mqttz-env") {
  net::generate_dev_certificate(cert(), key());
  write_file(acl(), options_.acl_text);
  store_ = options_.store_dir.empty() ? dir() / "store" : options_.store_dir;

  BrokerConfig cfg;
  cfg.listen = net::Endpoint{"127.0.0.1", 0};
  cfg.cert = cert();
  cfg.key = key();
  cfg.acl = acl();
  cfg.store_dir = store_;
  cfg.cache_capacity = options_.cache_capacity;
  cfg.export_pubkey = pubkey();
  cfg.mode = options_.mode;
  cfg.huk_seed = crypto::HukSeed::from_hex(kBenchSeedHex);
  cfg.event_sink = options_.events;
  broker_ = std::make_unique<Broker>(std::move(cfg), options_.hooks);
  broker_->start();
}

Environment::~Environment() { broker_->stop(); }

void Environment::set_acl(const std::string& text) {
  write_file(acl(), text);
  broker_->reload_acl();
}

client::ClientConfig Environment::client_config(const std::string& id) const {
  client::ClientConfig cfg;
  cfg.broker = net::Endpoint{"127.0.0.1", broker_->port()};
  cfg.broker_pubkey = pubkey();
  cfg.client_id = id;
  cfg.trust_root = cert();
  cfg.plaintext_transport = options_.mode == BrokerMode::Vanilla;
  return cfg;
}

std::unique_ptr<client::Client> Environment::connect(
    const std::string& id, std::optional<crypto::SymmetricKey> key) const {
  auto c = key ? std::make_unique<client::Client>(client_config(id), std::move(*key))
               : std::make_unique<client::Client>(client_config(id));
  c->establish();
  return c;
}

std::uint16_t free_port() {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw Error(Errc::Io, "socket failed");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  socklen_t len = sizeof addr;
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
    ::close(fd);
    throw Error(Errc::Io, "cannot reserve a port");
  }
  ::close(fd);
  return ntohs(addr.sin_port);
}

namespace {

bool port_open(const net::Endpoint& ep) {
  try {
    auto conn = net::connect_plain(ep);
    conn->shutdown();
    return true;
  } catch (const Error&) {
    return false;
  }
}

}  // namespace

BrokerProcess::BrokerProcess(const fs::path& binary, const std::vector<std::string>& args,
                             const std::map<std::string, std::string>& env,
                             const fs::path& log_path, const fs::path& ready_file,
                             const net::Endpoint& endpoint) {
  std::error_code ec;
  fs::remove(ready_file, ec);

  std::vector<std::string> argv_s{binary.string()};
  argv_s.insert(argv_s.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_s) argv.push_back(a.data());
  argv.push_back(nullptr);

  std::map<std::string, std::string> merged;
  for (char** e = environ; *e; ++e) {
    std::string kv(*e);
    auto eq = kv.find('=');
    if (eq != std::string::npos) merged[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  for (const auto& [k, v] : env) merged[k] = v;
  std::vector<std::string> env_s;
  for (const auto& [k, v] : merged) env_s.push_back(k + "=" + v);
  std::vector<char*> envp;
  for (auto& e : env_s) envp.push_back(e.data());
  envp.push_back(nullptr);

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  auto log = log_path.string();
  posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, log.c_str(),
                                   O_WRONLY | O_CREAT | O_APPEND, 0644);
  posix_spawn_file_actions_adddup2(&actions, STDOUT_FILENO, STDERR_FILENO);
  int rc = posix_spawn(&pid_, argv[0], &actions, nullptr, argv.data(), envp.data());
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0) throw Error(Errc::Io, "cannot spawn " + binary.string());

  auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(30);
  while (std::chrono::steady_clock::now() < deadline) {
    int status = 0;
    if (::waitpid(pid_, &status, WNOHANG) == pid_) {
      pid_ = -1;
      throw Error(Errc::Io, "broker exited during startup, see " + log);
    }
    if (fs::exists(ready_file) && port_open(endpoint)) return;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  signal(SIGKILL);
  wait();
  throw Error(Errc::Timeout, "broker did not become ready, see " + log);
}

BrokerProcess::~BrokerProcess() {
  if (pid_ > 0) {
    ::kill(pid_, SIGKILL);
    wait();
  }
}

void BrokerProcess::signal(int sig) {
  if (pid_ > 0) ::kill(pid_, sig);
}

int BrokerProcess::wait() {
  int status = 0;
  if (pid_ > 0) {
    ::waitpid(pid_, &status, 0);
    pid_ = -1;
  }
  return status;
}

double BrokerProcess::cpu_seconds() const {
  std::ifstream in("/proc/" + std::to_string(pid_) + "/stat");
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::Io, "cannot read broker stat");
  auto close = line.rfind(')');
  std::istringstream fields(line.substr(close + 2));
  std::string f;
  unsigned long long utime = 0, stime = 0;
  // fields after the command name start at "state" (field 3)
  for (int i = 3; i <= 15 && fields >> f; ++i) {
    if (i == 14) utime = std::stoull(f);
    if (i == 15) stime = std::stoull(f);
  }
  return static_cast<double>(utime + stime) / static_cast<double>(::sysconf(_SC_CLK_TCK));
}

}  // namespace mqttz::bench
