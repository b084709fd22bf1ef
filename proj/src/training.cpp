#include "reid/training.hpp"

#include <algorithm>
#include <cmath>

#include "reid/error.hpp"
#include "reid/metriclearn.hpp"

namespace reid {

TrainResult train_reid(AlignedNet& model, const LabeledDataset& data,
                       const TrainOptions& opt) {
  check(data.data != nullptr, "train: dataset not bound");
  check(opt.epochs >= 1, "train: epochs must be >= 1");
  const int n = static_cast<int>(data.data->samples.size());
  const int k = opt.n_instances;
  if (opt.use_id_loss)
    check(model.config().num_classes == data.num_classes,
          "train: model identity head has " + std::to_string(model.config().num_classes) +
              " classes but the dataset has " + std::to_string(data.num_classes));

  // the schedule can never ask for more identities than exist, nor more
  // images than the dataset holds
  const int hard_cap = std::min(opt.max_batch_size, std::min(n, data.num_classes * k));
  ScheduleState sched = make_schedule(k, opt.margin, hard_cap, opt.initial_identities);

  // pre-convert images once; samples index into this table
  std::vector<Tensor> images;
  images.reserve(static_cast<size_t>(n));
  for (const ImageSample& s : data.data->samples)
    images.push_back(image_to_tensor(s, data.data->height, data.data->width));

  Rng rng(mix_seed(opt.seed, 0x7EA1ULL));
  SgdOptimizer optimizer(opt.learning_rate, opt.momentum);
  GradTape tape;

  TrainResult result;
  std::vector<double> loss_series;
  std::vector<double> norm_series;

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    if (opt.lr_decay)
      optimizer.set_learning_rate(opt.learning_rate * std::pow(opt.lr_decay_factor, epoch));
    const int batch_size = sched.batch_size;
    const int batches = std::max(1, n / batch_size);

    double sum_global = 0.0, sum_total = 0.0, sum_norm = 0.0;
    for (int b = 0; b < batches; ++b) {
      PkBatch pk = pk_sample(data, batch_size, k, rng);
      TapeScope scope(tape);

      TripletBatch batch;
      batch.margin = opt.margin;
      batch.person_ids = pk.labels;
      batch.embeddings.reserve(pk.indices.size());
      double norm_acc = 0.0;
      for (int idx : pk.indices) {
        Embedding e = model.forward(images[static_cast<size_t>(idx)], opt.use_id_loss);
        double sq = 0.0;
        for (double v : e.global.data()) sq += v * v;
        norm_acc += std::sqrt(sq);
        batch.embeddings.push_back(std::move(e));
      }

      BatchHardResult global = batch_hard_loss(batch, DistanceKind::global_euclidean);
      Tensor total = global.loss;
      if (opt.use_local_loss)
        total = add(total, batch_hard_loss(batch, DistanceKind::local_dmli).loss);
      if (opt.use_id_loss) {
        Tensor ce;
        for (size_t i = 0; i < batch.embeddings.size(); ++i) {
          Tensor c = softmax_cross_entropy(batch.embeddings[i].logits,
                                           batch.person_ids[i]);
          ce = ce.defined() ? add(ce, c) : c;
        }
        total = add(total, mul_scalar(ce, 1.0 / static_cast<double>(batch.embeddings.size())));
      }

      sum_global += global.loss.value();
      sum_total += total.value();
      sum_norm += norm_acc / static_cast<double>(pk.indices.size());

      backward(total);
      optimizer.step(model.parameters());
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.batch_size = batch_size;
    stats.mean_global_triplet = sum_global / batches;
    stats.mean_total = sum_total / batches;
    stats.mean_embed_norm = sum_norm / batches;
    stats.noise = noise_scale(n, batch_size, optimizer.learning_rate());
    result.trace.push_back(stats);

    loss_series.push_back(stats.mean_global_triplet);
    norm_series.push_back(stats.mean_embed_norm);
    if (!result.collapsed &&
        collapse_detector(loss_series, norm_series, opt.margin, opt.collapse_window,
                          opt.collapse_band, opt.collapse_norm_threshold)) {
      result.collapsed = true;
      result.collapse_epoch = epoch;
      if (opt.stop_on_collapse) break;
    }

    if (opt.scheduler_enabled) {
      sched = schedule_step(sched, stats.mean_global_triplet);
    } else {
      sched.epoch += 1;
      sched.loss_history.push_back(stats.mean_global_triplet);
    }
  }
  return result;
}

}  // namespace reid
