#ifndef REID_ALIGNEDNET_HPP_
#define REID_ALIGNEDNET_HPP_

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "reid/matrix.hpp"
#include "reid/synthgen.hpp"
#include "reid/tensor.hpp"

namespace reid {

struct NetConfig {
  int in_h = 64;
  int in_w = 32;
  std::array<int, 3> channels = {16, 32, 64};
  int num_classes = 0;  // 0: no identity head
  double stripe_eps = 1e-12;

  int embed_dim() const { return channels[2]; }
  int feat_h() const { return in_h / 8; }  // three 2x2 poolings
  int feat_w() const { return in_w / 8; }
};

// Output of the two-branch head: a pooled global vector, L2-normalized
// horizontal stripe rows, and (during training) identity logits.
struct Embedding {
  Tensor global;   // {C}
  Tensor stripes;  // {H, C}
  Tensor logits;   // {num_classes}, undefined when the head is off
};

// Small convolutional backbone feeding a global branch (average pooling)
// and a local branch (per-row horizontal max pooling -> stripes).
class AlignedNet {
 public:
  AlignedNet(const NetConfig& cfg, uint64_t seed);

  Tensor backbone(const Tensor& image) const;  // {3,H,W} -> {C, H/8, W/8}
  Embedding forward(const Tensor& image, bool with_logits = false) const;

  // branch heads, exposed separately so their pooling contracts are testable
  static Tensor global_branch(const Tensor& feature_map);
  static Tensor local_branch(const Tensor& feature_map, double eps);

  std::vector<Tensor>& parameters() { return params_; }
  const std::vector<Tensor>& parameters() const { return params_; }
  const NetConfig& config() const { return cfg_; }

  // copies every parameter whose name and shape match (backbone survives a
  // change of identity-head size)
  void warm_start_from(const AlignedNet& other);

  uint64_t parameter_hash() const;

  void save(const std::string& path,
            const std::map<std::string, std::string>& meta = {}) const;
  static AlignedNet load(const std::string& path);

 private:
  AlignedNet() = default;
  Tensor find_param(const std::string& name) const;

  NetConfig cfg_;
  std::vector<Tensor> params_;
};

// HWC pixel buffer -> {3,H,W} channel-major tensor
Tensor image_to_tensor(const ImageSample& sample, int height, int width);

// frozen-model global features for a whole dataset, one row per sample
Matrix embed_dataset(const AlignedNet& model, const Dataset& ds);

}  // namespace reid

#endif  // REID_ALIGNEDNET_HPP_
