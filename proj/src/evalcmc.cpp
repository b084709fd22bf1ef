#include "reid/evalcmc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "reid/error.hpp"
#include "reid/kernels.hpp"
#include "reid/metriclearn.hpp"

namespace reid {

double CmcCurve::at_rank(int rank) const {
  check(rank >= 1, "cmc: rank is 1-based");
  if (accuracy_at_rank.empty()) return 0.0;
  const size_t idx = std::min(static_cast<size_t>(rank) - 1, accuracy_at_rank.size() - 1);
  return accuracy_at_rank[idx];
}

CmcCurve cmc_from_distances(const Matrix& dist, const std::vector<int>& query_ids,
                            const std::vector<int>& query_cams,
                            const std::vector<int>& gallery_ids,
                            const std::vector<int>& gallery_cams) {
  const int q = dist.rows, g = dist.cols;
  check(q == static_cast<int>(query_ids.size()) && q == static_cast<int>(query_cams.size()),
        "cmc: query metadata does not match distance rows");
  check(g == static_cast<int>(gallery_ids.size()) && g == static_cast<int>(gallery_cams.size()),
        "cmc: gallery metadata does not match distance columns");
  check(q >= 1 && g >= 1, "cmc: empty query or gallery");

  std::vector<long> first_match(static_cast<size_t>(g), 0);
  for (int i = 0; i < q; ++i) {
    std::vector<int> candidates;
    candidates.reserve(static_cast<size_t>(g));
    bool has_positive = false;
    for (int j = 0; j < g; ++j) {
      // single-shot cross-view: drop same-camera images of the query identity
      if (gallery_ids[static_cast<size_t>(j)] == query_ids[static_cast<size_t>(i)] &&
          gallery_cams[static_cast<size_t>(j)] == query_cams[static_cast<size_t>(i)])
        continue;
      candidates.push_back(j);
      has_positive |= gallery_ids[static_cast<size_t>(j)] == query_ids[static_cast<size_t>(i)];
    }
    check(has_positive, "cmc: query " + std::to_string(i) + " (identity " +
                            std::to_string(query_ids[static_cast<size_t>(i)]) +
                            ") has no cross-camera positive in the gallery");
    std::stable_sort(candidates.begin(), candidates.end(), [&](int a, int b) {
      return dist.at(i, a) < dist.at(i, b);
    });
    for (size_t r = 0; r < candidates.size(); ++r) {
      if (gallery_ids[static_cast<size_t>(candidates[r])] == query_ids[static_cast<size_t>(i)]) {
        first_match[r] += 1;
        break;
      }
    }
  }

  CmcCurve curve;
  curve.num_queries = q;
  curve.accuracy_at_rank.resize(static_cast<size_t>(g));
  long cum = 0;
  for (int r = 0; r < g; ++r) {
    cum += first_match[static_cast<size_t>(r)];
    curve.accuracy_at_rank[static_cast<size_t>(r)] = static_cast<double>(cum) / q;
  }
  return curve;
}

CmcCurve cmc_evaluate(const AlignedNet& model, const Dataset& ds,
                      const QueryGallerySplit& split, EvalDistance kind) {
  check(!split.query.empty() && !split.gallery.empty(), "cmc: empty split");
  labelaudit::EvalScope scope;

  const int dim = model.config().embed_dim();
  const int nq = static_cast<int>(split.query.size());
  const int ng = static_cast<int>(split.gallery.size());

  Matrix qf(nq, dim), gf(ng, dim);
  std::vector<Matrix> q_stripes, g_stripes;
  const bool local = kind == EvalDistance::global_plus_dmli;

  auto embed = [&](int sample_idx, Matrix& feats, int row, std::vector<Matrix>* stripes) {
    Tensor img = image_to_tensor(ds.samples[static_cast<size_t>(sample_idx)], ds.height, ds.width);
    Embedding e = model.forward(img);
    std::copy(e.global.data().begin(), e.global.data().end(), feats.row(row));
    if (stripes) {
      Matrix m(e.stripes.dim(0), e.stripes.dim(1));
      std::copy(e.stripes.data().begin(), e.stripes.data().end(), m.v.begin());
      stripes->push_back(std::move(m));
    }
  };
  for (int i = 0; i < nq; ++i) embed(split.query[static_cast<size_t>(i)], qf, i, local ? &q_stripes : nullptr);
  for (int j = 0; j < ng; ++j) embed(split.gallery[static_cast<size_t>(j)], gf, j, local ? &g_stripes : nullptr);

  Matrix dist(nq, ng);
  kernels::pairwise_sqdist(qf.v.data(), nq, gf.v.data(), ng, dim, dist.v.data());
  for (double& d : dist.v) d = std::sqrt(std::max(0.0, d));
  if (local) {
#pragma omp parallel for schedule(static) if (kernels::parallel_enabled())
    for (int i = 0; i < nq; ++i)
      for (int j = 0; j < ng; ++j)
        dist.at(i, j) += dmli_distance(q_stripes[static_cast<size_t>(i)],
                                       g_stripes[static_cast<size_t>(j)]);
  }

  std::vector<int> q_ids, q_cams, g_ids, g_cams;
  for (int idx : split.query) {
    q_ids.push_back(eval_person_id(ds, idx));
    q_cams.push_back(ds.samples[static_cast<size_t>(idx)].camera_id);
  }
  for (int idx : split.gallery) {
    g_ids.push_back(eval_person_id(ds, idx));
    g_cams.push_back(ds.samples[static_cast<size_t>(idx)].camera_id);
  }
  return cmc_from_distances(dist, q_ids, q_cams, g_ids, g_cams);
}

std::string format_result_row(const ResultRow& row) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%s\t%s\t%s\t%.2f\t%.2f\t%.2f", row.method.c_str(),
                row.source.c_str(), row.target.c_str(), row.rank1, row.rank5, row.rank10);
  return std::string(buf);
}

ResultRow parse_result_row(const std::string& line) {
  std::istringstream is(line);
  ResultRow row;
  check(static_cast<bool>(is >> row.method >> row.source >> row.target >> row.rank1 >>
                          row.rank5 >> row.rank10),
        "malformed result row: " + line);
  return row;
}

}  // namespace reid
