#include "reid/checkpoint.hpp"

#include <fstream>

#include "reid/binio.hpp"
#include "reid/error.hpp"
#include "reid/hash.hpp"

namespace reid {

namespace {
constexpr uint32_t kMagic = 0x52494443;  // "RIDC"
constexpr uint32_t kVersion = 1;
}  // namespace

void save_checkpoint(const std::string& path, const std::vector<Tensor>& tensors,
                     const std::map<std::string, std::string>& meta) {
  std::ofstream os(path, std::ios::binary);
  check(static_cast<bool>(os), "cannot open checkpoint for writing: " + path);
  binio::write_u32(os, kMagic);
  binio::write_u32(os, kVersion);
  binio::write_u32(os, static_cast<uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    binio::write_string(os, k);
    binio::write_string(os, v);
  }
  binio::write_u32(os, static_cast<uint32_t>(tensors.size()));
  for (const Tensor& t : tensors) {
    check(t.defined(), "cannot checkpoint an undefined tensor");
    binio::write_string(os, t.name());
    binio::write_u32(os, static_cast<uint32_t>(t.shape().size()));
    for (int d : t.shape()) binio::write_u32(os, static_cast<uint32_t>(d));
    binio::write_f64(os, t.data().data(), t.data().size());
  }
  check(static_cast<bool>(os), "short write for checkpoint: " + path);
}

CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  check(static_cast<bool>(is), "cannot open checkpoint: " + path);
  check(binio::read_u32(is, path) == kMagic,
        "not a checkpoint file (bad magic): " + path);
  const uint32_t version = binio::read_u32(is, path);
  check(version == kVersion, "checkpoint version mismatch in " + path + ": got " +
                                 std::to_string(version) + ", expected " +
                                 std::to_string(kVersion));
  CheckpointData out;
  const uint32_t nmeta = binio::read_u32(is, path);
  for (uint32_t i = 0; i < nmeta; ++i) {
    std::string k = binio::read_string(is, path);
    out.meta[k] = binio::read_string(is, path);
  }
  const uint32_t ntensors = binio::read_u32(is, path);
  for (uint32_t i = 0; i < ntensors; ++i) {
    std::string name = binio::read_string(is, path);
    const uint32_t ndim = binio::read_u32(is, path);
    check(ndim >= 1 && ndim <= 8, "corrupt tensor rank in " + path);
    std::vector<int> shape;
    size_t numel = 1;
    for (uint32_t d = 0; d < ndim; ++d) {
      uint32_t dim = binio::read_u32(is, path);
      check(dim >= 1 && dim <= (1u << 24), "corrupt tensor shape in " + path);
      shape.push_back(static_cast<int>(dim));
      numel *= dim;
    }
    std::vector<double> data(numel);
    binio::read_f64(is, data.data(), numel, path);
    Tensor t = Tensor::from_data(std::move(shape), std::move(data));
    t.set_name(name);
    out.tensors.push_back(std::move(t));
  }
  return out;
}

uint64_t tensors_hash(const std::vector<Tensor>& tensors) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const Tensor& t : tensors) {
    h = fnv1a64(t.name().data(), t.name().size(), h);
    for (int d : t.shape()) h = fnv1a64(&d, sizeof(d), h);
    h = fnv1a64(t.data().data(), t.data().size() * sizeof(double), h);
  }
  return h;
}

}  // namespace reid
