#ifndef REID_CONFIG_HPP_
#define REID_CONFIG_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace reid {

// Flat dotted-key configuration ("train.lr = 0.02"), '#' comments. Values
// are stored verbatim; typed getters validate on access.
class Config {
 public:
  Config() = default;
  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text);

  bool has(const std::string& key) const { return kv_.count(key) > 0; }
  void set(const std::string& key, const std::string& value) { kv_[key] = value; }

  std::string get_string(const std::string& key, const std::string& def) const;
  int get_int(const std::string& key, int def) const;
  uint64_t get_u64(const std::string& key, uint64_t def) const;
  double get_double(const std::string& key, double def) const;
  bool get_bool(const std::string& key, bool def) const;
  std::vector<int> get_int_list(const std::string& key, std::vector<int> def) const;
  std::vector<double> get_double_list(const std::string& key, std::vector<double> def) const;
  std::vector<uint64_t> get_u64_list(const std::string& key, std::vector<uint64_t> def) const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

  // sorted key=value lines; the basis for config snapshots and hashing
  std::string canonical() const;
  uint64_t hash() const;

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace reid

#endif  // REID_CONFIG_HPP_
