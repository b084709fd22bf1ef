#ifndef REID_PSEUDOLABEL_HPP_
#define REID_PSEUDOLABEL_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "reid/alignednet.hpp"
#include "reid/matrix.hpp"
#include "reid/rng.hpp"
#include "reid/scheduler.hpp"
#include "reid/synthgen.hpp"

namespace reid {

struct ClusterConfig {
  int k_per_camera = 0;     // 0: derive as round(samples_per_camera / k_divisor)
  int k_divisor = 4;        // matches the K of PK sampling
  int max_kmeans_iters = 100;
  uint64_t seed = 1;
};

struct KmeansRun {
  Matrix centroids;                         // k x dim
  std::vector<int> assignment;              // point -> cluster
  std::vector<double> distortion_history;   // after each Lloyd iteration
  int iterations = 0;
};

// Lloyd's iterations from distance-weighted seeding of k distinct points;
// empty clusters are re-seeded at the globally farthest point.
KmeansRun kmeans(const Matrix& points, int k, int max_iters, Rng& rng);

struct CameraClusters {
  int camera_id = 0;
  std::vector<int> sample_indices;  // rows of the feature matrix, this camera
  KmeansRun run;
};

// model features for all samples (row i = global embedding of sample i)
Matrix extract_features(const AlignedNet& model, const Dataset& ds);

std::vector<CameraClusters> per_camera_kmeans(const Matrix& features,
                                              const std::vector<int>& camera_ids,
                                              const ClusterConfig& cfg);

struct PseudoLabelMap {
  std::vector<int> assignments;             // sample index -> pseudo identity
  std::vector<int> camera_order;            // cameras in merge order (ref first)
  std::vector<std::vector<int>> merge_table;  // [pseudo id][camera pos] = cluster id
  std::vector<Matrix> per_camera_centroids;   // parallel to camera_order
};

// Greedy nearest-centroid grouping anchored at the first camera; every
// pseudo identity takes exactly one cluster per camera.
PseudoLabelMap cross_view_merge(const std::vector<CameraClusters>& clusters);

// checks the structural invariants (full camera span, clusters used once)
void validate_map(const PseudoLabelMap& map, int num_samples);

// target images paired with pseudo identities, ready for the PK sampler
LabeledDataset build_pseudo_dataset(const Dataset& target, const PseudoLabelMap& map);

struct PseudoNoise {
  double pair_precision = 0.0;  // same-pseudo pairs that are truly same identity
  double pair_recall = 0.0;     // truly same-identity pairs sharing a pseudo label
};

// evaluation-only diagnostic against the quarantined ground truth
PseudoNoise pseudo_label_noise(const Dataset& target, const PseudoLabelMap& map);

// line-oriented export: sample id, camera id, per-camera cluster, pseudo id
void save_pseudo_map(const std::string& path, const PseudoLabelMap& map,
                     const Dataset& target,
                     const std::vector<CameraClusters>& clusters);
PseudoLabelMap load_pseudo_map(const std::string& path, int num_samples);

}  // namespace reid

#endif  // REID_PSEUDOLABEL_HPP_
