#ifndef REID_CYCLEMAP_HPP_
#define REID_CYCLEMAP_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "reid/synthgen.hpp"
#include "reid/tensor.hpp"

namespace reid {

struct GanConfig {
  int in_h = 64;
  int in_w = 32;
  int gen_channels = 8;   // doubled after the second downsample
  int disc_channels = 8;
  int res_blocks = 2;
  double lambda_cyc = 10.0;
  bool least_squares = true;  // least-squares objective; false: cross-entropy
  int steps = 2000;
  int batch_per_domain = 1;
  double learning_rate = 0.02;
  double momentum = 0.5;
  int log_every = 50;
};

// image-to-image mapping: 2 strided downsamples, residual blocks, 2
// nearest-neighbor upsamples, tanh output rescaled into [0,1]
class GeneratorNet {
 public:
  GeneratorNet(const GanConfig& cfg, uint64_t seed, std::string name);

  Tensor forward(const Tensor& image) const;  // {3,H,W} -> {3,H,W}
  std::vector<Tensor>& parameters() { return params_; }
  const std::vector<Tensor>& parameters() const { return params_; }
  const std::string& name() const { return name_; }
  const GanConfig& config() const { return cfg_; }

 private:
  friend struct GeneratorPairIO;
  GeneratorNet() = default;
  Tensor find_param(const std::string& suffix) const;
  GanConfig cfg_;
  std::string name_;
  std::vector<Tensor> params_;
};

// 3-layer strided patch scorer; one realness score per spatial patch
class PatchDiscriminator {
 public:
  PatchDiscriminator(const GanConfig& cfg, uint64_t seed, std::string name);

  Tensor forward(const Tensor& image) const;  // {3,H,W} -> {1,H/4,W/4}
  std::vector<Tensor>& parameters() { return params_; }
  const std::vector<Tensor>& parameters() const { return params_; }

 private:
  Tensor find_param(const std::string& suffix) const;
  GanConfig cfg_;
  std::string name_;
  std::vector<Tensor> params_;
};

struct GanLossPair {
  Tensor d_loss;  // drives D(real) -> 1, D(fake) -> 0
  Tensor g_loss;  // drives D(fake) -> 1
};

// Both adversarial losses for one discriminator over the given batches; the
// discriminator forward on each fake is shared between the two losses.
using ScoreMap = std::function<Tensor(const Tensor&)>;
GanLossPair gan_losses(const ScoreMap& disc, const std::vector<Tensor>& real,
                       const std::vector<Tensor>& fake, bool least_squares);
GanLossPair gan_losses(const PatchDiscriminator& disc, const std::vector<Tensor>& real,
                       const std::vector<Tensor>& fake, bool least_squares);

// mean L1( F(G(x_s)), x_s ) + mean L1( G(F(x_t)), x_t )
using ImageMap = std::function<Tensor(const Tensor&)>;
Tensor cycle_loss(const ImageMap& g, const ImageMap& f,
                  const std::vector<Tensor>& batch_s, const std::vector<Tensor>& batch_t);
Tensor cycle_loss(const GeneratorNet& g, const GeneratorNet& f,
                  const std::vector<Tensor>& batch_s, const std::vector<Tensor>& batch_t);

struct CycleLossBreakdown {
  double gan_s_to_t = 0.0;
  double gan_t_to_s = 0.0;
  double cycle = 0.0;
  double lambda = 0.0;
  double total = 0.0;
};

struct CycleGanTraceRow {
  int step;
  double d_source, d_target;
  CycleLossBreakdown gen;
};

struct CycleGanResult {
  GeneratorNet source_to_target;  // G
  GeneratorNet target_to_source;  // F
  std::vector<CycleGanTraceRow> trace;
};

// Alternates one discriminator step and one generator step per iteration.
// Never touches labels of either dataset.
CycleGanResult train_cyclegan(const Dataset& source, const Dataset& target,
                              const GanConfig& cfg, uint64_t seed);

// applies G to every source image; outputs keep identity and camera, pixels
// clamped to [0,1], domain tag set to adapted
Dataset translate_dataset(const GeneratorNet& g, const Dataset& source);

void save_generator_pair(const std::string& path, const GeneratorNet& g,
                         const GeneratorNet& f);
struct GeneratorPair {
  GeneratorNet g;
  GeneratorNet f;
};
GeneratorPair load_generator_pair(const std::string& path);

}  // namespace reid

#endif  // REID_CYCLEMAP_HPP_
