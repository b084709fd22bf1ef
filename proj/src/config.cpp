#include "reid/config.hpp"

#include <fstream>
#include <sstream>

#include "reid/error.hpp"
#include "reid/hash.hpp"

namespace reid {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

Config Config::from_string(const std::string& text) {
  Config cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const size_t hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    check(eq != std::string::npos,
          "config: malformed line " + std::to_string(lineno) + ": '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    check(!key.empty(), "config: empty key on line " + std::to_string(lineno));
    cfg.kv_[key] = value;
  }
  return cfg;
}

Config Config::from_file(const std::string& path) {
  std::ifstream is(path);
  check(static_cast<bool>(is), "cannot open config file: " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return from_string(buf.str());
}

std::string Config::get_string(const std::string& key, const std::string& def) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? def : it->second;
}

int Config::get_int(const std::string& key, int def) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  try {
    size_t pos = 0;
    int v = std::stoi(it->second, &pos);
    check(pos == it->second.size(), "");
    return v;
  } catch (...) {
    fail("config: key '" + key + "' expects an integer, got '" + it->second + "'");
  }
}

uint64_t Config::get_u64(const std::string& key, uint64_t def) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  try {
    size_t pos = 0;
    uint64_t v = std::stoull(it->second, &pos);
    check(pos == it->second.size(), "");
    return v;
  } catch (...) {
    fail("config: key '" + key + "' expects an unsigned integer, got '" + it->second + "'");
  }
}

double Config::get_double(const std::string& key, double def) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  try {
    size_t pos = 0;
    double v = std::stod(it->second, &pos);
    check(pos == it->second.size(), "");
    return v;
  } catch (...) {
    fail("config: key '" + key + "' expects a number, got '" + it->second + "'");
  }
}

bool Config::get_bool(const std::string& key, bool def) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  const std::string& v = it->second;
  if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "off" || v == "0" || v == "no") return false;
  fail("config: key '" + key + "' expects a boolean, got '" + v + "'");
}

namespace {
std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) {
    // allow comma separators too
    std::string cur;
    for (char c : tok) {
      if (c == ',') {
        if (!cur.empty()) out.push_back(cur);
        cur.clear();
      } else cur.push_back(c);
    }
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}
}  // namespace

std::vector<int> Config::get_int_list(const std::string& key, std::vector<int> def) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  std::vector<int> out;
  for (const std::string& tok : split_ws(it->second)) {
    try {
      out.push_back(std::stoi(tok));
    } catch (...) {
      fail("config: key '" + key + "' expects integers, got '" + tok + "'");
    }
  }
  return out;
}

std::vector<double> Config::get_double_list(const std::string& key,
                                            std::vector<double> def) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  std::vector<double> out;
  for (const std::string& tok : split_ws(it->second)) {
    try {
      out.push_back(std::stod(tok));
    } catch (...) {
      fail("config: key '" + key + "' expects numbers, got '" + tok + "'");
    }
  }
  return out;
}

std::vector<uint64_t> Config::get_u64_list(const std::string& key,
                                           std::vector<uint64_t> def) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  std::vector<uint64_t> out;
  for (const std::string& tok : split_ws(it->second)) {
    try {
      out.push_back(std::stoull(tok));
    } catch (...) {
      fail("config: key '" + key + "' expects unsigned integers, got '" + tok + "'");
    }
  }
  return out;
}

std::string Config::canonical() const {
  std::ostringstream os;
  for (const auto& [k, v] : kv_) os << k << " = " << v << "\n";
  return os.str();
}

uint64_t Config::hash() const {
  const std::string c = canonical();
  return fnv1a64(c.data(), c.size());
}

}  // namespace reid
