#ifndef REID_CHECKPOINT_HPP_
#define REID_CHECKPOINT_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "reid/tensor.hpp"

namespace reid {

// Versioned checkpoint file: magic + version header, string metadata
// entries, then named parameter blocks (name, shape, raw float64 payload).
// Round-trips are bit-exact.
struct CheckpointData {
  std::map<std::string, std::string> meta;
  std::vector<Tensor> tensors;  // names carried on the tensors
};

void save_checkpoint(const std::string& path, const std::vector<Tensor>& tensors,
                     const std::map<std::string, std::string>& meta);

CheckpointData load_checkpoint(const std::string& path);

// hash over the parameter payload (names, shapes, raw doubles)
uint64_t tensors_hash(const std::vector<Tensor>& tensors);

}  // namespace reid

#endif  // REID_CHECKPOINT_HPP_
