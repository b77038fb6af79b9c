#include "mqttz/acl.hpp"

#include <fstream>
#include <optional>
#include <sstream>

#include "mqttz/error.hpp"
#include "mqttz/protocol.hpp"

namespace mqttz {
namespace {

std::string_view trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string_view next_token(std::string_view& s) {
  s = trim(s);
  auto end = s.find_first_of(" \t");
  auto tok = s.substr(0, end);
  s = end == std::string_view::npos ? std::string_view{} : trim(s.substr(end));
  return tok;
}

[[noreturn]] void parse_error(std::size_t line, const std::string& what) {
  throw Error(Errc::ParseError, "line " + std::to_string(line) + ": " + what);
}

bool valid_pattern(std::string_view p) {
  if (p == "#") return true;
  std::string_view base = p;
  if (p.size() >= 2 && p.substr(p.size() - 2) == "/#") base = p.substr(0, p.size() - 2);
  try {
    (void)validate_topic(base);
  } catch (const Error&) {
    return false;
  }
  return true;
}

bool covers(Permission p, Action a) {
  switch (p) {
    case Permission::ReadWrite: return true;
    case Permission::Read: return a == Action::Read;
    case Permission::Write: return a == Action::Write;
  }
  return false;
}

}  // namespace

bool topic_matches(std::string_view pattern, std::string_view topic) {
  if (pattern == "#") return true;
  if (pattern.size() >= 2 && pattern.substr(pattern.size() - 2) == "/#") {
    auto prefix = pattern.substr(0, pattern.size() - 2);
    if (topic == prefix) return true;
    return topic.size() > prefix.size() && topic.substr(0, prefix.size()) == prefix &&
           topic[prefix.size()] == '/';
  }
  return pattern == topic;
}

bool AclTable::has_entries(std::string_view client_id) const {
  auto it = entries_.find(client_id);
  return it != entries_.end() && !it->second.empty();
}

bool AclTable::authorize(std::string_view client_id, std::string_view topic, Action action) const {
  auto it = entries_.find(client_id);
  if (it == entries_.end()) return false;
  for (const auto& e : it->second)
    if (covers(e.permission, action) && topic_matches(e.pattern, topic)) return true;
  return false;
}

void AclTable::add(std::string client_id, AclEntry entry) {
  entries_[std::move(client_id)].push_back(std::move(entry));
}

AclTable parse_acl(std::string_view text) {
  AclTable table;
  std::optional<std::string> user;
  std::size_t line_no = 0;
  while (!text.empty() || line_no == 0) {
    ++line_no;
    auto nl = text.find('\n');
    auto line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (line.empty() || line.front() == '#') {
      if (text.empty()) break;
      continue;
    }

    auto rest = line;
    auto keyword = next_token(rest);
    if (keyword == "user") {
      auto id = next_token(rest);
      if (id.empty() || !rest.empty()) parse_error(line_no, "expected 'user <client_id>'");
      try {
        user = ClientId::parse(id).str();
      } catch (const Error&) {
        parse_error(line_no, "invalid client id '" + std::string(id) + "'");
      }
    } else if (keyword == "topic") {
      if (!user) parse_error(line_no, "'topic' before any 'user' line");
      Permission perm = Permission::ReadWrite;
      auto probe = rest;
      auto tok = next_token(probe);
      if (tok == "read" || tok == "write" || tok == "readwrite") {
        perm = tok == "read" ? Permission::Read
               : tok == "write" ? Permission::Write
                                : Permission::ReadWrite;
        rest = probe;
      }
      auto pattern = trim(rest);
      if (pattern.empty()) parse_error(line_no, "missing topic pattern");
      if (!valid_pattern(pattern))
        parse_error(line_no, "invalid topic pattern '" + std::string(pattern) + "'");
      table.add(*user, AclEntry{std::string(pattern), perm});
    } else {
      parse_error(line_no, "unknown keyword '" + std::string(keyword) + "'");
    }
    if (text.empty()) break;
  }
  return table;
}

AclTable load_acl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ParseError, "cannot open ACL file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_acl(ss.str());
}

}  // namespace mqttz
