#include "reid/pseudolabel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "reid/error.hpp"
#include "reid/kernels.hpp"

namespace reid {

// ---------------------------------------------------------------- kmeans --

namespace {

double sqdist(const double* a, const double* b, int dim) {
  double acc = 0.0;
  for (int i = 0; i < dim; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

// nearest centroid per point, ties to the lowest cluster index
void assign_points(const Matrix& points, const Matrix& centroids,
                   std::vector<int>& assignment) {
  const int n = points.rows, k = centroids.rows;
  Matrix dist(n, k);
  kernels::pairwise_sqdist(points.v.data(), n, centroids.v.data(), k, points.cols,
                           dist.v.data());
  for (int i = 0; i < n; ++i) {
    int best = 0;
    for (int c = 1; c < k; ++c)
      if (dist.at(i, c) < dist.at(i, best)) best = c;
    assignment[static_cast<size_t>(i)] = best;
  }
}

double distortion_of(const Matrix& points, const Matrix& centroids,
                     const std::vector<int>& assignment) {
  double acc = 0.0;
  for (int i = 0; i < points.rows; ++i)
    acc += sqdist(points.row(i), centroids.row(assignment[static_cast<size_t>(i)]),
                  points.cols);
  return acc;
}

// means of members; empty clusters re-seeded at the farthest point
void update_centroids(const Matrix& points, const std::vector<int>& assignment,
                      Matrix& centroids) {
  const int k = centroids.rows, dim = points.cols;
  std::vector<int> counts(static_cast<size_t>(k), 0);
  std::fill(centroids.v.begin(), centroids.v.end(), 0.0);
  for (int i = 0; i < points.rows; ++i) {
    const int c = assignment[static_cast<size_t>(i)];
    counts[static_cast<size_t>(c)] += 1;
    for (int d = 0; d < dim; ++d) centroids.at(c, d) += points.at(i, d);
  }
  std::vector<bool> reseeded(static_cast<size_t>(points.rows), false);
  for (int c = 0; c < k; ++c) {
    if (counts[static_cast<size_t>(c)] > 0) {
      for (int d = 0; d < dim; ++d) centroids.at(c, d) /= counts[static_cast<size_t>(c)];
    }
  }
  for (int c = 0; c < k; ++c) {
    if (counts[static_cast<size_t>(c)] > 0) continue;
    int far_point = -1;
    double far_dist = -1.0;
    for (int i = 0; i < points.rows; ++i) {
      if (reseeded[static_cast<size_t>(i)]) continue;
      const int ci = assignment[static_cast<size_t>(i)];
      if (counts[static_cast<size_t>(ci)] <= 1) continue;  // keep singletons alive
      const double d = sqdist(points.row(i), centroids.row(ci), dim);
      if (d > far_dist) { far_dist = d; far_point = i; }
    }
    check(far_point >= 0, "kmeans: cannot re-seed empty cluster");
    reseeded[static_cast<size_t>(far_point)] = true;
    for (int d = 0; d < dim; ++d) centroids.at(c, d) = points.at(far_point, d);
  }
}

bool has_empty(const std::vector<int>& assignment, int k) {
  std::vector<bool> used(static_cast<size_t>(k), false);
  for (int a : assignment) used[static_cast<size_t>(a)] = true;
  for (bool u : used)
    if (!u) return true;
  return false;
}

}  // namespace

KmeansRun kmeans(const Matrix& points, int k, int max_iters, Rng& rng) {
  const int n = points.rows, dim = points.cols;
  check(k >= 1, "kmeans: k must be >= 1");
  check(k <= n, "kmeans: k (" + std::to_string(k) + ") exceeds population (" +
                    std::to_string(n) + ")");
  check(max_iters >= 1, "kmeans: max_iters must be >= 1");

  KmeansRun run;
  run.centroids = Matrix(k, dim);
  run.assignment.assign(static_cast<size_t>(n), 0);

  // distance-weighted seeding of k distinct points
  std::vector<int> chosen;
  std::vector<bool> is_chosen(static_cast<size_t>(n), false);
  {
    const int first = rng.below(n);
    chosen.push_back(first);
    is_chosen[static_cast<size_t>(first)] = true;
    std::vector<double> d2(static_cast<size_t>(n));
    while (static_cast<int>(chosen.size()) < k) {
      double total = 0.0;
      for (int i = 0; i < n; ++i) {
        if (is_chosen[static_cast<size_t>(i)]) { d2[static_cast<size_t>(i)] = 0.0; continue; }
        double best = std::numeric_limits<double>::infinity();
        for (int c : chosen) best = std::min(best, sqdist(points.row(i), points.row(c), dim));
        d2[static_cast<size_t>(i)] = best;
        total += best;
      }
      int pick = -1;
      if (total > 0.0) {
        const double r = rng.uniform() * total;
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
          if (is_chosen[static_cast<size_t>(i)]) continue;
          acc += d2[static_cast<size_t>(i)];
          if (acc >= r) { pick = i; break; }
        }
      }
      if (pick < 0) {  // all remaining points coincide with chosen ones
        for (int i = 0; i < n; ++i)
          if (!is_chosen[static_cast<size_t>(i)]) { pick = i; break; }
      }
      chosen.push_back(pick);
      is_chosen[static_cast<size_t>(pick)] = true;
    }
    for (int c = 0; c < k; ++c)
      for (int d = 0; d < dim; ++d)
        run.centroids.at(c, d) = points.at(chosen[static_cast<size_t>(c)], d);
  }

  std::vector<int> prev(static_cast<size_t>(n), -1);
  for (int iter = 0; iter < max_iters; ++iter) {
    assign_points(points, run.centroids, run.assignment);
    const bool stable = run.assignment == prev;
    if (stable) break;
    prev = run.assignment;
    update_centroids(points, run.assignment, run.centroids);
    run.distortion_history.push_back(distortion_of(points, run.centroids, run.assignment));
    run.iterations += 1;
  }
  // a re-seed on the last iteration can leave a cluster empty under the
  // current assignment; settle it
  int guard = 0;
  while (has_empty(run.assignment, k) && guard++ <= k) {
    update_centroids(points, run.assignment, run.centroids);
    assign_points(points, run.centroids, run.assignment);
  }
  return run;
}

// ------------------------------------------------------------ per camera --

Matrix extract_features(const AlignedNet& model, const Dataset& ds) {
  return embed_dataset(model, ds);
}

std::vector<CameraClusters> per_camera_kmeans(const Matrix& features,
                                              const std::vector<int>& camera_ids,
                                              const ClusterConfig& cfg) {
  check(features.rows == static_cast<int>(camera_ids.size()),
        "per_camera_kmeans: one camera id per feature row required");
  check(cfg.k_divisor >= 1, "cluster config: k_divisor must be >= 1");
  std::map<int, std::vector<int>> by_camera;
  for (int i = 0; i < features.rows; ++i)
    by_camera[camera_ids[static_cast<size_t>(i)]].push_back(i);
  check(by_camera.size() >= 2, "per_camera_kmeans: need at least 2 cameras");

  int k = cfg.k_per_camera;
  if (k <= 0) {
    k = -1;
    for (const auto& [cam, rows] : by_camera) {
      const int kc = std::max(
          2, static_cast<int>(std::lround(static_cast<double>(rows.size()) / cfg.k_divisor)));
      if (k < 0) k = kc;
      check(k == kc, "per_camera_kmeans: derived k differs across cameras (" +
                         std::to_string(k) + " vs " + std::to_string(kc) +
                         "); set k_per_camera explicitly");
    }
  }

  std::vector<CameraClusters> out;
  for (const auto& [cam, rows] : by_camera) {
    check(k <= static_cast<int>(rows.size()),
          "per_camera_kmeans: k (" + std::to_string(k) + ") exceeds camera " +
              std::to_string(cam) + " population (" + std::to_string(rows.size()) + ")");
    Matrix sub(static_cast<int>(rows.size()), features.cols);
    for (size_t r = 0; r < rows.size(); ++r)
      std::copy(features.row(rows[r]), features.row(rows[r]) + features.cols, sub.row(static_cast<int>(r)));
    Rng rng(mix_seed(cfg.seed, 0xC1u + static_cast<uint64_t>(cam)));
    CameraClusters cc;
    cc.camera_id = cam;
    cc.sample_indices = rows;
    cc.run = kmeans(sub, k, cfg.max_kmeans_iters, rng);
    out.push_back(std::move(cc));
  }
  return out;
}

// ----------------------------------------------------------------- merge --

PseudoLabelMap cross_view_merge(const std::vector<CameraClusters>& clusters) {
  check(clusters.size() >= 2, "cross_view_merge: need at least 2 cameras");
  std::vector<const CameraClusters*> order;
  for (const auto& c : clusters) order.push_back(&c);
  std::sort(order.begin(), order.end(), [](const CameraClusters* a, const CameraClusters* b) {
    return a->camera_id < b->camera_id;
  });
  const int k = order[0]->run.centroids.rows;
  for (const auto* c : order)
    check(c->run.centroids.rows == k,
          "cross_view_merge: cameras have unequal k (" + std::to_string(k) + " vs " +
              std::to_string(c->run.centroids.rows) + " in camera " +
              std::to_string(c->camera_id) + ")");
  const int dim = order[0]->run.centroids.cols;

  PseudoLabelMap map;
  for (const auto* c : order) {
    map.camera_order.push_back(c->camera_id);
    map.per_camera_centroids.push_back(c->run.centroids);
  }
  map.merge_table.assign(static_cast<size_t>(k), std::vector<int>(order.size(), -1));

  // reference clusters in index order, greedily taking the nearest unmatched
  // centroid in every other camera; ties break to the lowest cluster index
  for (int p = 0; p < k; ++p) map.merge_table[static_cast<size_t>(p)][0] = p;
  for (size_t cam_pos = 1; cam_pos < order.size(); ++cam_pos) {
    const Matrix& ref = order[0]->run.centroids;
    const Matrix& other = order[cam_pos]->run.centroids;
    std::vector<bool> taken(static_cast<size_t>(k), false);
    for (int p = 0; p < k; ++p) {
      int best = -1;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        if (taken[static_cast<size_t>(c)]) continue;
        const double d = std::sqrt(sqdist(ref.row(p), other.row(c), dim));
        if (d < best_d) { best_d = d; best = c; }
      }
      taken[static_cast<size_t>(best)] = true;
      map.merge_table[static_cast<size_t>(p)][cam_pos] = best;
    }
  }

  // pseudo identity of a sample = pseudo id owning its per-camera cluster
  int total = 0;
  for (const auto* c : order) total += static_cast<int>(c->sample_indices.size());
  map.assignments.assign(static_cast<size_t>(total), -1);
  for (size_t cam_pos = 0; cam_pos < order.size(); ++cam_pos) {
    std::vector<int> cluster_to_pseudo(static_cast<size_t>(k), -1);
    for (int p = 0; p < k; ++p)
      cluster_to_pseudo[static_cast<size_t>(map.merge_table[static_cast<size_t>(p)][cam_pos])] = p;
    const auto& cc = *order[cam_pos];
    for (size_t i = 0; i < cc.sample_indices.size(); ++i) {
      const int sample = cc.sample_indices[i];
      check(sample >= 0 && sample < total, "cross_view_merge: sample index out of range");
      map.assignments[static_cast<size_t>(sample)] =
          cluster_to_pseudo[static_cast<size_t>(cc.run.assignment[i])];
    }
  }
  validate_map(map, total);
  return map;
}

void validate_map(const PseudoLabelMap& map, int num_samples) {
  check(static_cast<int>(map.assignments.size()) == num_samples,
        "pseudo map covers " + std::to_string(map.assignments.size()) + " samples, expected " +
            std::to_string(num_samples));
  for (size_t i = 0; i < map.assignments.size(); ++i)
    check(map.assignments[i] >= 0,
          "pseudo map leaves sample " + std::to_string(i) + " uncovered");
  const size_t cams = map.camera_order.size();
  if (cams == 0) return;  // loaded maps carry assignments only
  for (size_t p = 0; p < map.merge_table.size(); ++p)
    check(map.merge_table[p].size() == cams,
          "pseudo identity " + std::to_string(p) + " does not span all cameras");
  for (size_t cam = 0; cam < cams; ++cam) {
    std::vector<bool> used(map.merge_table.size(), false);
    for (size_t p = 0; p < map.merge_table.size(); ++p) {
      const int c = map.merge_table[p][cam];
      check(c >= 0 && c < static_cast<int>(map.merge_table.size()),
            "merge table entry out of range");
      check(!used[static_cast<size_t>(c)],
            "cluster " + std::to_string(c) + " of camera position " + std::to_string(cam) +
                " is used by more than one pseudo identity");
      used[static_cast<size_t>(c)] = true;
    }
  }
}

// --------------------------------------------------------------- dataset --

LabeledDataset build_pseudo_dataset(const Dataset& target, const PseudoLabelMap& map) {
  validate_map(map, static_cast<int>(target.samples.size()));
  return bind_labels(target, map.assignments);
}

PseudoNoise pseudo_label_noise(const Dataset& target, const PseudoLabelMap& map) {
  validate_map(map, static_cast<int>(target.samples.size()));
  labelaudit::EvalScope scope;
  const int n = static_cast<int>(target.samples.size());
  std::vector<int> truth(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) truth[static_cast<size_t>(i)] = eval_person_id(target, i);
  long same_pseudo = 0, same_true = 0, both = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const bool sp = map.assignments[static_cast<size_t>(i)] == map.assignments[static_cast<size_t>(j)];
      const bool st = truth[static_cast<size_t>(i)] == truth[static_cast<size_t>(j)];
      same_pseudo += sp;
      same_true += st;
      both += sp && st;
    }
  }
  PseudoNoise out;
  out.pair_precision = same_pseudo > 0 ? static_cast<double>(both) / same_pseudo : 1.0;
  out.pair_recall = same_true > 0 ? static_cast<double>(both) / same_true : 1.0;
  return out;
}

// ------------------------------------------------------------------- IO ---

void save_pseudo_map(const std::string& path, const PseudoLabelMap& map,
                     const Dataset& target,
                     const std::vector<CameraClusters>& clusters) {
  std::ofstream os(path);
  check(static_cast<bool>(os), "cannot write pseudo-label map: " + path);
  os << "# reid-pseudo v1 samples=" << map.assignments.size() << "\n";
  std::vector<int> cluster_of(map.assignments.size(), -1);
  for (const auto& cc : clusters)
    for (size_t i = 0; i < cc.sample_indices.size(); ++i)
      cluster_of[static_cast<size_t>(cc.sample_indices[i])] = cc.run.assignment[i];
  for (size_t i = 0; i < map.assignments.size(); ++i) {
    os << target.samples[i].sample_id << "\t" << target.samples[i].camera_id << "\t"
       << cluster_of[i] << "\t" << map.assignments[i] << "\n";
  }
  check(static_cast<bool>(os), "short write for pseudo-label map: " + path);
}

PseudoLabelMap load_pseudo_map(const std::string& path, int num_samples) {
  std::ifstream is(path);
  check(static_cast<bool>(is), "cannot open pseudo-label map: " + path);
  std::string header;
  std::getline(is, header);
  check(header.rfind("# reid-pseudo v1", 0) == 0,
        "unrecognized pseudo-label map header in " + path);
  PseudoLabelMap map;
  map.assignments.assign(static_cast<size_t>(num_samples), -1);
  std::string line;
  int row = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    int sample_id, cam, cluster, pseudo;
    check(static_cast<bool>(ls >> sample_id >> cam >> cluster >> pseudo),
          "malformed pseudo-label line: " + line);
    check(row < num_samples, "pseudo-label map has more rows than samples");
    map.assignments[static_cast<size_t>(row)] = pseudo;
    ++row;
  }
  validate_map(map, num_samples);
  return map;
}

}  // namespace reid
