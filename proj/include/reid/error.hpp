#ifndef REID_ERROR_HPP_
#define REID_ERROR_HPP_

#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace reid {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

inline std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

inline void check(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

[[noreturn]] inline void fail_shape(const std::string& op,
                                    const std::vector<int>& a,
                                    const std::vector<int>& b) {
  fail(op + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

}  // namespace reid

#endif  // REID_ERROR_HPP_
