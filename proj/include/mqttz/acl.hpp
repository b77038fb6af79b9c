#pragma once

// Access control lists in a mosquitto-style subset:
//
//   # comment
//   user <client_id>
//   topic [read|write|readwrite] <pattern>
//
// `topic` lines attach to the most recent `user` stanza; the permission
// defaults to readwrite. A pattern is a topic name, optionally ending in a
// "#" segment that matches the parent and any suffix. Anything not granted is
// denied.

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace mqttz {

enum class Action { Read, Write };

enum class Permission { Read, Write, ReadWrite };

struct AclEntry {
  std::string pattern;
  Permission permission = Permission::ReadWrite;
};

class AclTable {
 public:
  bool has_entries(std::string_view client_id) const;
  bool authorize(std::string_view client_id, std::string_view topic, Action action) const;
  void add(std::string client_id, AclEntry entry);

  const std::map<std::string, std::vector<AclEntry>, std::less<>>& entries() const noexcept {
    return entries_;
  }

 private:
  std::map<std::string, std::vector<AclEntry>, std::less<>> entries_;
};

bool topic_matches(std::string_view pattern, std::string_view topic);

// Throws Error(ParseError) with the offending line number.
AclTable parse_acl(std::string_view text);
AclTable load_acl(const std::filesystem::path& path);

}  // namespace mqttz
