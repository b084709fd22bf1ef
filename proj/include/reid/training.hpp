#ifndef REID_TRAINING_HPP_
#define REID_TRAINING_HPP_

#include <cstdint>
#include <vector>

#include "reid/alignednet.hpp"
#include "reid/scheduler.hpp"

namespace reid {

struct TrainOptions {
  int epochs = 30;
  double learning_rate = 0.02;
  double momentum = 0.9;
  double margin = 0.3;
  int n_instances = 4;
  int initial_identities = 2;  // starting batch = initial_identities * n_instances
  bool scheduler_enabled = true;
  int max_batch_size = 88;
  bool use_id_loss = true;     // Eq.-1 composition; off for margin-collapse studies
  bool use_local_loss = true;
  bool lr_decay = false;       // classical per-epoch decay, the comparison arm
  double lr_decay_factor = 0.95;
  bool stop_on_collapse = true;
  int collapse_window = 5;
  double collapse_band = 0.005;
  double collapse_norm_threshold = 0.01;
  uint64_t seed = 1;
};

struct EpochStats {
  int epoch = 0;
  int batch_size = 0;
  double mean_global_triplet = 0.0;  // the quantity Alg.-1 thresholds
  double mean_total = 0.0;
  double mean_embed_norm = 0.0;
  double noise = 0.0;  // g at this epoch's batch size
};

struct TrainResult {
  std::vector<EpochStats> trace;
  bool collapsed = false;
  int collapse_epoch = -1;
};

// PK-sampled mini-batch training of the two-branch net with the combined
// loss (configurable composition) and optional batch-size schedule.
TrainResult train_reid(AlignedNet& model, const LabeledDataset& data,
                       const TrainOptions& opt);

}  // namespace reid

#endif  // REID_TRAINING_HPP_
