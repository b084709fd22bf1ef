#ifndef REID_SCHEDULER_HPP_
#define REID_SCHEDULER_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "reid/rng.hpp"
#include "reid/synthgen.hpp"

namespace reid {

// Dataset bound to training labels (class indices 0..num_classes-1). For
// source/adapted data the labels come from the visible person ids; pseudo
// labels are supplied explicitly.
struct LabeledDataset {
  const Dataset* data = nullptr;
  std::vector<int> labels;
  std::vector<std::vector<int>> by_class;  // class -> sample indices
  int num_classes = 0;
};

LabeledDataset bind_labels(const Dataset& ds);
LabeledDataset bind_labels(const Dataset& ds, const std::vector<int>& raw_labels);

struct PkBatch {
  std::vector<int> indices;  // P*K sample indices
  std::vector<int> labels;   // parallel class indices
};

// P = batch_size / k identities drawn without replacement, k instances each
// (with replacement when an identity has fewer than k images).
PkBatch pk_sample(const LabeledDataset& ds, int batch_size, int k, Rng& rng);
PkBatch pk_sample(const LabeledDataset& ds, int batch_size, int k, uint64_t seed);

// Batch-size doubling schedule: start at 2 identities per batch, double
// whenever the epoch's mean triplet loss drops under 0.8 * margin, never
// exceed the cap.
struct ScheduleState {
  int batch_size = 0;
  int n_instances = 4;
  double margin = 0.3;
  int max_batch_size = 88;
  int epoch = 0;
  std::vector<double> loss_history;
};

ScheduleState make_schedule(int n_instances, double margin, int max_batch_size,
                            int initial_identities = 2);

ScheduleState schedule_step(ScheduleState state, double epoch_mean_loss);

// g = eps * (N/B - 1), the stochastic-gradient noise scale
double noise_scale(double dataset_size, double batch_size, double learning_rate);

// Margin-collapse signal: the last `window` epoch losses all sit within
// `band` of the margin while embeddings have shrunk to near-zero norm.
bool collapse_detector(std::span<const double> loss_history,
                       std::span<const double> embed_norm_history, double margin,
                       int window, double band = 0.005,
                       double norm_threshold = 0.01);

}  // namespace reid

#endif  // REID_SCHEDULER_HPP_
