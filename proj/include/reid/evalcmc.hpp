#ifndef REID_EVALCMC_HPP_
#define REID_EVALCMC_HPP_

#include <string>
#include <vector>

#include "reid/alignednet.hpp"
#include "reid/matrix.hpp"
#include "reid/synthgen.hpp"

namespace reid {

struct CmcCurve {
  std::vector<double> accuracy_at_rank;  // index r: first match within rank r+1
  int num_queries = 0;

  double at_rank(int rank) const;  // 1-based; clamps to the last entry
};

// Core ranking: dist is Q x G; same-camera same-identity gallery entries are
// excluded per query; ties order by gallery index. Every query must keep at
// least one cross-camera positive.
CmcCurve cmc_from_distances(const Matrix& dist, const std::vector<int>& query_ids,
                            const std::vector<int>& query_cams,
                            const std::vector<int>& gallery_ids,
                            const std::vector<int>& gallery_cams);

enum class EvalDistance { global_only, global_plus_dmli };

// Full single-shot protocol over a query/gallery split of one dataset.
// Opens an evaluation scope for quarantined target labels.
CmcCurve cmc_evaluate(const AlignedNet& model, const Dataset& ds,
                      const QueryGallerySplit& split, EvalDistance kind);

// Table-row shaped result record (method, source, target, rank-1/5/10 in %)
struct ResultRow {
  std::string method;
  std::string source;
  std::string target;
  double rank1 = 0.0, rank5 = 0.0, rank10 = 0.0;
};

std::string format_result_row(const ResultRow& row);
ResultRow parse_result_row(const std::string& line);

}  // namespace reid

#endif  // REID_EVALCMC_HPP_
