#include "reid/metriclearn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "reid/error.hpp"
#include "reid/kernels.hpp"

namespace reid {

double euclidean_distance(std::span<const double> u, std::span<const double> v) {
  check(u.size() == v.size(),
        "euclidean_distance: length mismatch " + std::to_string(u.size()) + " vs " +
            std::to_string(v.size()));
  double acc = 0.0;
  for (size_t i = 0; i < u.size(); ++i) {
    const double d = u[i] - v[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

Tensor euclidean_distance_t(const Tensor& u, const Tensor& v) {
  if (u.shape() != v.shape()) fail_shape("euclidean_distance", u.shape(), v.shape());
  Tensor diff = sub(u, v);
  return sqrt_t(sum_all(mul(diff, diff)));
}

double triplet_loss(std::span<const double> f_a, std::span<const double> f_p,
                    std::span<const double> f_n, double margin) {
  const double dp = euclidean_distance(f_a, f_p);
  const double dn = euclidean_distance(f_a, f_n);
  return std::max(0.0, margin + dp - dn);
}

// ----------------------------------------------------------------- DMLI ---

double stripe_cell_distance(std::span<const double> row_a, std::span<const double> row_b) {
  return std::tanh(0.5 * euclidean_distance(row_a, row_b));
}

Matrix stripe_cost_matrix(const Matrix& stripes_a, const Matrix& stripes_b) {
  check(stripes_a.rows == stripes_b.rows && stripes_a.cols == stripes_b.cols,
        "dmli: stripe shape mismatch " + std::to_string(stripes_a.rows) + "x" +
            std::to_string(stripes_a.cols) + " vs " + std::to_string(stripes_b.rows) +
            "x" + std::to_string(stripes_b.cols));
  const int h = stripes_a.rows, c = stripes_a.cols;
  Matrix cells(h, h);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < h; ++j)
      cells.at(i, j) = stripe_cell_distance(
          std::span<const double>(stripes_a.row(i), static_cast<size_t>(c)),
          std::span<const double>(stripes_b.row(j), static_cast<size_t>(c)));
  return cells;
}

std::vector<std::pair<int, int>> dmli_path(const Matrix& cell_costs) {
  check(cell_costs.rows == cell_costs.cols && cell_costs.rows >= 1,
        "dmli: cost matrix must be square and non-empty");
  const int h = cell_costs.rows;
  Matrix total(h, h);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < h; ++j) {
      double best;
      if (i == 0 && j == 0) best = 0.0;
      else if (i == 0) best = total.at(0, j - 1);
      else if (j == 0) best = total.at(i - 1, 0);
      else best = std::min(total.at(i - 1, j), total.at(i, j - 1));
      total.at(i, j) = cell_costs.at(i, j) + best;
    }
  }
  std::vector<std::pair<int, int>> path;
  int i = h - 1, j = h - 1;
  while (true) {
    path.emplace_back(i, j);
    if (i == 0 && j == 0) break;
    if (i == 0) --j;
    else if (j == 0) --i;
    else if (total.at(i - 1, j) <= total.at(i, j - 1)) --i;
    else --j;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

double dmli_path_cost(const Matrix& cell_costs) {
  double acc = 0.0;
  for (const auto& [i, j] : dmli_path(cell_costs)) acc += cell_costs.at(i, j);
  return acc;
}

double dmli_distance(const Matrix& stripes_a, const Matrix& stripes_b) {
  return dmli_path_cost(stripe_cost_matrix(stripes_a, stripes_b));
}

namespace {

Matrix stripes_as_matrix(const Tensor& stripes) {
  check(stripes.shape().size() == 2,
        "dmli: stripes must be 2-D, got " + shape_str(stripes.shape()));
  Matrix m(stripes.dim(0), stripes.dim(1));
  std::copy(stripes.data().begin(), stripes.data().end(), m.v.begin());
  return m;
}

Tensor stripe_cell_t(const Tensor& stripes_a, const Tensor& stripes_b, int i, int j) {
  Tensor diff = sub(row_slice(stripes_a, i), row_slice(stripes_b, j));
  Tensor dist = sqrt_t(sum_all(mul(diff, diff)));
  return tanh_t(mul_scalar(dist, 0.5));
}

}  // namespace

Tensor dmli_distance_t(const Tensor& stripes_a, const Tensor& stripes_b) {
  if (stripes_a.shape() != stripes_b.shape())
    fail_shape("dmli_distance", stripes_a.shape(), stripes_b.shape());
  Matrix cells = stripe_cost_matrix(stripes_as_matrix(stripes_a), stripes_as_matrix(stripes_b));
  const auto path = dmli_path(cells);
  Tensor acc;
  for (const auto& [i, j] : path) {
    Tensor cell = stripe_cell_t(stripes_a, stripes_b, i, j);
    acc = acc.defined() ? add(acc, cell) : cell;
  }
  return acc;
}

// -------------------------------------------------------------- batches ---

void validate_batch(const TripletBatch& batch) {
  const size_t n = batch.embeddings.size();
  check(n == batch.person_ids.size(), "triplet batch: embeddings and ids differ in length");
  check(n >= 4, "triplet batch: needs at least 4 samples");
  check(batch.margin > 0.0, "triplet batch: margin must be positive");
  for (size_t a = 0; a < n; ++a) {
    bool has_positive = false, has_negative = false;
    for (size_t b = 0; b < n; ++b) {
      if (b == a) continue;
      if (batch.person_ids[b] == batch.person_ids[a]) has_positive = true;
      else has_negative = true;
    }
    check(has_positive, "triplet batch: anchor " + std::to_string(a) +
                            " (identity " + std::to_string(batch.person_ids[a]) +
                            ") has no positive");
    check(has_negative, "triplet batch: anchor " + std::to_string(a) +
                            " (identity " + std::to_string(batch.person_ids[a]) +
                            ") has no negative");
  }
}

Matrix pairwise_distances(const TripletBatch& batch, DistanceKind kind) {
  const int n = static_cast<int>(batch.embeddings.size());
  Matrix dist(n, n);
  if (kind == DistanceKind::global_euclidean) {
    const int dim = batch.embeddings[0].global.numel();
    Matrix feats(n, dim);
    for (int i = 0; i < n; ++i) {
      const auto& g = batch.embeddings[static_cast<size_t>(i)].global;
      check(g.numel() == dim, "triplet batch: inconsistent embedding sizes");
      std::copy(g.data().begin(), g.data().end(), feats.row(i));
    }
    kernels::pairwise_sqdist(feats.v.data(), n, feats.v.data(), n, dim, dist.v.data());
    for (double& d : dist.v) d = std::sqrt(std::max(0.0, d));
  } else {
    std::vector<Matrix> stripes;
    stripes.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
      stripes.push_back(stripes_as_matrix(batch.embeddings[static_cast<size_t>(i)].stripes));
#pragma omp parallel for schedule(static) if (kernels::parallel_enabled())
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const double d = dmli_distance(stripes[static_cast<size_t>(i)],
                                       stripes[static_cast<size_t>(j)]);
        dist.at(i, j) = d;
      }
    }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < i; ++j) dist.at(i, j) = dist.at(j, i);
  }
  return dist;
}

BatchHardResult batch_hard_loss(const TripletBatch& batch, DistanceKind kind) {
  validate_batch(batch);
  const int n = static_cast<int>(batch.embeddings.size());
  const Matrix dist = pairwise_distances(batch, kind);

  BatchHardResult out;
  out.hardest_positive.resize(static_cast<size_t>(n));
  out.hardest_negative.resize(static_cast<size_t>(n));
  out.per_anchor_loss.resize(static_cast<size_t>(n));

  Tensor sum_loss;
  for (int a = 0; a < n; ++a) {
    int best_p = -1, best_n = -1;
    double worst_pos = -1.0, best_neg = std::numeric_limits<double>::infinity();
    for (int b = 0; b < n; ++b) {
      if (b == a) continue;
      if (batch.person_ids[static_cast<size_t>(b)] == batch.person_ids[static_cast<size_t>(a)]) {
        if (dist.at(a, b) > worst_pos) { worst_pos = dist.at(a, b); best_p = b; }
      } else {
        if (dist.at(a, b) < best_neg) { best_neg = dist.at(a, b); best_n = b; }
      }
    }
    out.hardest_positive[static_cast<size_t>(a)] = best_p;
    out.hardest_negative[static_cast<size_t>(a)] = best_n;

    const Embedding& ea = batch.embeddings[static_cast<size_t>(a)];
    const Embedding& ep = batch.embeddings[static_cast<size_t>(best_p)];
    const Embedding& en = batch.embeddings[static_cast<size_t>(best_n)];
    Tensor dp, dn;
    if (kind == DistanceKind::global_euclidean) {
      dp = euclidean_distance_t(ea.global, ep.global);
      dn = euclidean_distance_t(ea.global, en.global);
    } else {
      dp = dmli_distance_t(ea.stripes, ep.stripes);
      dn = dmli_distance_t(ea.stripes, en.stripes);
    }
    Tensor hinge = relu(add_scalar(sub(dp, dn), batch.margin));
    out.per_anchor_loss[static_cast<size_t>(a)] = hinge.value();
    sum_loss = sum_loss.defined() ? add(sum_loss, hinge) : hinge;
  }
  out.loss = mul_scalar(sum_loss, 1.0 / n);
  return out;
}

LossBreakdown combined_loss(const TripletBatch& batch) {
  validate_batch(batch);
  const int n = static_cast<int>(batch.embeddings.size());
  Tensor ce_sum;
  for (int i = 0; i < n; ++i) {
    const Embedding& e = batch.embeddings[static_cast<size_t>(i)];
    check(e.logits.defined(), "combined_loss: embedding " + std::to_string(i) +
                                  " is missing logits (identity head off?)");
    Tensor ce = softmax_cross_entropy(e.logits, batch.person_ids[static_cast<size_t>(i)]);
    ce_sum = ce_sum.defined() ? add(ce_sum, ce) : ce;
  }
  Tensor id_loss = mul_scalar(ce_sum, 1.0 / n);

  BatchHardResult global = batch_hard_loss(batch, DistanceKind::global_euclidean);
  BatchHardResult local = batch_hard_loss(batch, DistanceKind::local_dmli);

  LossBreakdown out;
  out.total_t = add(add(id_loss, global.loss), local.loss);
  out.id_loss = id_loss.value();
  out.global_triplet = global.loss.value();
  out.local_triplet = local.loss.value();
  out.total = out.total_t.value();
  return out;
}

}  // namespace reid
