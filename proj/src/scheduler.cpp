#include "reid/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "reid/error.hpp"

namespace reid {

namespace {

LabeledDataset bind_impl(const Dataset& ds, const std::vector<int>& raw) {
  check(raw.size() == ds.samples.size(), "bind_labels: label count does not match dataset");
  std::map<int, int> remap;
  for (int r : raw) remap.emplace(r, 0);
  int next = 0;
  for (auto& [key, idx] : remap) idx = next++;
  LabeledDataset out;
  out.data = &ds;
  out.num_classes = next;
  out.labels.reserve(raw.size());
  out.by_class.assign(static_cast<size_t>(next), {});
  for (size_t i = 0; i < raw.size(); ++i) {
    const int cls = remap[raw[i]];
    out.labels.push_back(cls);
    out.by_class[static_cast<size_t>(cls)].push_back(static_cast<int>(i));
  }
  return out;
}

}  // namespace

LabeledDataset bind_labels(const Dataset& ds) {
  check(!ds.labels_hidden(),
        "bind_labels: refusing to train on a dataset with hidden labels");
  std::vector<int> raw;
  raw.reserve(ds.samples.size());
  for (const ImageSample& s : ds.samples) {
    check(s.person_id >= 0, "bind_labels: sample " + std::to_string(s.sample_id) +
                                " has no visible identity");
    raw.push_back(s.person_id);
  }
  return bind_impl(ds, raw);
}

LabeledDataset bind_labels(const Dataset& ds, const std::vector<int>& raw_labels) {
  return bind_impl(ds, raw_labels);
}

PkBatch pk_sample(const LabeledDataset& ds, int batch_size, int k, Rng& rng) {
  check(k >= 2, "pk_sample: n_instances must be >= 2");
  check(batch_size % k == 0, "pk_sample: batch_size " + std::to_string(batch_size) +
                                 " is not a multiple of n_instances " + std::to_string(k));
  const int p = batch_size / k;
  check(p >= 2, "pk_sample: batch needs at least 2 identities");
  check(p <= ds.num_classes,
        "pk_sample: batch wants " + std::to_string(p) + " identities but the dataset has only " +
            std::to_string(ds.num_classes));

  std::vector<int> classes(static_cast<size_t>(ds.num_classes));
  for (int i = 0; i < ds.num_classes; ++i) classes[static_cast<size_t>(i)] = i;
  rng.shuffle(classes);
  classes.resize(static_cast<size_t>(p));

  PkBatch batch;
  batch.indices.reserve(static_cast<size_t>(batch_size));
  for (int cls : classes) {
    const auto& pool = ds.by_class[static_cast<size_t>(cls)];
    const int n = static_cast<int>(pool.size());
    std::vector<int> chosen;
    if (n >= k) {
      std::vector<int> order(pool);
      rng.shuffle(order);
      chosen.assign(order.begin(), order.begin() + k);
    } else {
      // repeat whole pool, then fill the remainder at random
      for (int rep = 0; rep < k / n; ++rep) chosen.insert(chosen.end(), pool.begin(), pool.end());
      for (int t = static_cast<int>(chosen.size()); t < k; ++t)
        chosen.push_back(pool[static_cast<size_t>(rng.below(n))]);
    }
    for (int idx : chosen) {
      batch.indices.push_back(idx);
      batch.labels.push_back(cls);
    }
  }
  return batch;
}

PkBatch pk_sample(const LabeledDataset& ds, int batch_size, int k, uint64_t seed) {
  Rng rng(mix_seed(seed, 0x9B5AULL));
  return pk_sample(ds, batch_size, k, rng);
}

ScheduleState make_schedule(int n_instances, double margin, int max_batch_size,
                            int initial_identities) {
  check(n_instances >= 2, "schedule: n_instances must be >= 2");
  check(margin > 0.0, "schedule: margin must be positive");
  check(initial_identities >= 2, "schedule: need at least 2 identities per batch");
  ScheduleState s;
  s.n_instances = n_instances;
  s.margin = margin;
  s.max_batch_size = max_batch_size;
  s.batch_size = initial_identities * n_instances;
  check(s.batch_size <= max_batch_size,
        "schedule: initial batch " + std::to_string(s.batch_size) + " exceeds cap " +
            std::to_string(max_batch_size));
  return s;
}

ScheduleState schedule_step(ScheduleState state, double epoch_mean_loss) {
  if (epoch_mean_loss < 0.8 * state.margin &&
      state.batch_size * 2 <= state.max_batch_size) {
    state.batch_size *= 2;
  }
  state.epoch += 1;
  state.loss_history.push_back(epoch_mean_loss);
  return state;
}

double noise_scale(double dataset_size, double batch_size, double learning_rate) {
  check(batch_size >= 1.0, "noise_scale: batch size must be >= 1");
  check(dataset_size >= batch_size, "noise_scale: batch larger than dataset");
  check(learning_rate > 0.0, "noise_scale: learning rate must be positive");
  return learning_rate * (dataset_size / batch_size - 1.0);
}

bool collapse_detector(std::span<const double> loss_history,
                       std::span<const double> embed_norm_history, double margin,
                       int window, double band, double norm_threshold) {
  check(window >= 1, "collapse_detector: window must be >= 1");
  if (static_cast<int>(loss_history.size()) < window) return false;
  for (size_t i = loss_history.size() - static_cast<size_t>(window);
       i < loss_history.size(); ++i) {
    if (std::fabs(loss_history[i] - margin) >= band) return false;
  }
  if (embed_norm_history.empty()) return false;
  return embed_norm_history.back() < norm_threshold;
}

}  // namespace reid
