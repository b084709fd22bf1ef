#include <doctest.h>

#include <algorithm>

#include "reid/error.hpp"
#include "reid/evalcmc.hpp"
#include "reid/rng.hpp"

using namespace reid;

namespace {

// independent ranking oracle: for one query, sort candidate gallery indices
// by distance (stable) and report the 1-based rank of the first positive
int oracle_rank(const Matrix& dist, int q, int query_id, int query_cam,
                const std::vector<int>& g_ids, const std::vector<int>& g_cams) {
  std::vector<std::pair<double, int>> order;
  for (int j = 0; j < dist.cols; ++j) {
    if (g_ids[static_cast<size_t>(j)] == query_id && g_cams[static_cast<size_t>(j)] == query_cam)
      continue;
    order.emplace_back(dist.at(q, j), j);
  }
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  for (size_t r = 0; r < order.size(); ++r)
    if (g_ids[static_cast<size_t>(order[r].second)] == query_id) return static_cast<int>(r) + 1;
  return -1;
}

CmcCurve curve_from_ranks(const std::vector<int>& ranks, int gallery) {
  CmcCurve c;
  c.num_queries = static_cast<int>(ranks.size());
  c.accuracy_at_rank.assign(static_cast<size_t>(gallery), 0.0);
  for (int r : ranks)
    for (int i = r - 1; i < gallery; ++i) c.accuracy_at_rank[static_cast<size_t>(i)] += 1.0;
  for (double& v : c.accuracy_at_rank) v /= ranks.size();
  return c;
}

}  // namespace

TEST_SUITE("evalcmc") {

TEST_CASE("perfect distances give perfect rank-1") {
  const int q = 4, g = 8;
  Matrix dist(q, g, 10.0);
  std::vector<int> q_ids = {0, 1, 2, 3}, q_cams(4, 0);
  std::vector<int> g_ids = {0, 1, 2, 3, 4, 5, 6, 7}, g_cams(8, 1);
  for (int i = 0; i < q; ++i) dist.at(i, i) = 0.0;
  CmcCurve curve = cmc_from_distances(dist, q_ids, q_cams, g_ids, g_cams);
  CHECK(curve.at_rank(1) == doctest::Approx(1.0));
  CHECK(curve.accuracy_at_rank.back() == doctest::Approx(1.0));
}

TEST_CASE("hand-built distance tables match the sort oracle exactly") {
  // three queries over a five-image gallery with cross-view exclusions
  std::vector<int> q_ids = {0, 1, 0};
  std::vector<int> q_cams = {0, 0, 1};
  std::vector<int> g_ids = {0, 0, 1, 1, 2};
  std::vector<int> g_cams = {1, 0, 1, 0, 1};
  Matrix dist(3, 5);
  const double table[3][5] = {{0.9, 0.05, 0.3, 0.4, 0.2},
                              {0.7, 0.6, 0.5, 0.1, 0.3},
                              {0.25, 0.8, 0.6, 0.7, 0.1}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 5; ++j) dist.at(i, j) = table[i][j];

  CmcCurve curve = cmc_from_distances(dist, q_ids, q_cams, g_ids, g_cams);
  std::vector<int> ranks;
  for (int i = 0; i < 3; ++i)
    ranks.push_back(oracle_rank(dist, i, q_ids[static_cast<size_t>(i)],
                                q_cams[static_cast<size_t>(i)], g_ids, g_cams));
  CmcCurve expected = curve_from_ranks(ranks, 5);
  REQUIRE(curve.accuracy_at_rank.size() == expected.accuracy_at_rank.size());
  for (size_t i = 0; i < curve.accuracy_at_rank.size(); ++i)
    CHECK(curve.accuracy_at_rank[i] == doctest::Approx(expected.accuracy_at_rank[i]));
  // spot-check the first query: the 0.05 match is its own camera, so the
  // cross-camera positive at 0.9 lands last among the four candidates
  CHECK(ranks[0] == 4);
}

TEST_CASE("curve equals the oracle on random instances and stays monotone") {
  Rng rng(5);
  for (int trial = 0; trial < 25; ++trial) {
    const int q = 2 + rng.below(6);
    const int ids = 2 + rng.below(4);
    const int g = ids * 2 + rng.below(5);
    std::vector<int> q_ids, q_cams, g_ids, g_cams;
    for (int i = 0; i < q; ++i) {
      q_ids.push_back(rng.below(ids));
      q_cams.push_back(0);
    }
    for (int j = 0; j < g; ++j) {
      g_ids.push_back(j < ids ? j : rng.below(ids));  // every identity present
      g_cams.push_back(1);
    }
    Matrix dist(q, g);
    for (double& v : dist.v) v = rng.uniform(0.0, 1.0);

    CmcCurve curve = cmc_from_distances(dist, q_ids, q_cams, g_ids, g_cams);
    std::vector<int> ranks;
    for (int i = 0; i < q; ++i)
      ranks.push_back(oracle_rank(dist, i, q_ids[static_cast<size_t>(i)],
                                  q_cams[static_cast<size_t>(i)], g_ids, g_cams));
    CmcCurve expected = curve_from_ranks(ranks, g);
    for (size_t i = 0; i < curve.accuracy_at_rank.size(); ++i)
      CHECK(curve.accuracy_at_rank[i] == doctest::Approx(expected.accuracy_at_rank[i]));

    for (size_t i = 1; i < curve.accuracy_at_rank.size(); ++i)
      CHECK(curve.accuracy_at_rank[i] >= curve.accuracy_at_rank[i - 1]);
    CHECK(curve.accuracy_at_rank.back() == doctest::Approx(1.0));
  }
}

TEST_CASE("gallery permutation leaves the curve unchanged") {
  Rng rng(7);
  const int q = 5, g = 9;
  std::vector<int> q_ids = {0, 1, 2, 3, 4}, q_cams(5, 0);
  std::vector<int> g_ids = {0, 1, 2, 3, 4, 0, 1, 2, 3}, g_cams(9, 1);
  Matrix dist(q, g);
  for (double& v : dist.v) v = rng.uniform(0.0, 1.0);  // distinct with prob 1
  CmcCurve base = cmc_from_distances(dist, q_ids, q_cams, g_ids, g_cams);

  std::vector<int> perm(g);
  for (int j = 0; j < g; ++j) perm[static_cast<size_t>(j)] = (j + 4) % g;
  Matrix dist2(q, g);
  std::vector<int> g_ids2(g), g_cams2(g);
  for (int j = 0; j < g; ++j) {
    g_ids2[static_cast<size_t>(perm[static_cast<size_t>(j)])] = g_ids[static_cast<size_t>(j)];
    g_cams2[static_cast<size_t>(perm[static_cast<size_t>(j)])] = g_cams[static_cast<size_t>(j)];
    for (int i = 0; i < q; ++i) dist2.at(i, perm[static_cast<size_t>(j)]) = dist.at(i, j);
  }
  CmcCurve shuffled = cmc_from_distances(dist2, q_ids, q_cams, g_ids2, g_cams2);
  for (size_t i = 0; i < base.accuracy_at_rank.size(); ++i)
    CHECK(base.accuracy_at_rank[i] == doctest::Approx(shuffled.accuracy_at_rank[i]));
}

TEST_CASE("a query with no positive is rejected") {
  Matrix dist(1, 2, 1.0);
  std::vector<int> q_ids = {5}, q_cams = {0};
  std::vector<int> g_ids = {1, 2}, g_cams = {1, 1};
  CHECK_THROWS_WITH_AS(cmc_from_distances(dist, q_ids, q_cams, g_ids, g_cams),
                       doctest::Contains("no cross-camera positive"), Error);
}

TEST_CASE("result rows round-trip through their text format") {
  ResultRow row{"Direct", "source", "target", 22.50, 45.00, 58.00};
  ResultRow parsed = parse_result_row(format_result_row(row));
  CHECK(parsed.method == "Direct");
  CHECK(parsed.rank1 == doctest::Approx(22.5));
  CHECK(parsed.rank10 == doctest::Approx(58.0));
}

}  // TEST_SUITE
