#ifndef REID_METRICLEARN_HPP_
#define REID_METRICLEARN_HPP_

#include <span>
#include <utility>
#include <vector>

#include "reid/alignednet.hpp"
#include "reid/matrix.hpp"
#include "reid/tensor.hpp"

namespace reid {

// ------------------------------------------------------------ distances ---

double euclidean_distance(std::span<const double> u, std::span<const double> v);

// taped variant over 1-D tensors
Tensor euclidean_distance_t(const Tensor& u, const Tensor& v);

double triplet_loss(std::span<const double> f_a, std::span<const double> f_p,
                    std::span<const double> f_n, double margin);

// Elementwise stripe distance: Euclidean between stripe rows squashed into
// (0,1) by (e^d - 1)/(e^d + 1), which equals tanh(d/2). Rows are expected
// to be L2-normalized upstream.
double stripe_cell_distance(std::span<const double> row_a, std::span<const double> row_b);

// H x H squashed stripe-distance matrix between two stripe sets
Matrix stripe_cost_matrix(const Matrix& stripes_a, const Matrix& stripes_b);

// Monotone lattice path (right/down moves) of minimal summed cost from
// (0,0) to (H-1,H-1); ties prefer the vertical predecessor.
std::vector<std::pair<int, int>> dmli_path(const Matrix& cell_costs);

// cost of the optimal path, summed in path order
double dmli_path_cost(const Matrix& cell_costs);

// full DMLI local distance between two stripe matrices
double dmli_distance(const Matrix& stripes_a, const Matrix& stripes_b);

// taped DMLI: the optimal path is found on the current values and the cost
// is rebuilt as a differentiable sum through the selected cells
Tensor dmli_distance_t(const Tensor& stripes_a, const Tensor& stripes_b);

// --------------------------------------------------------------- batches --

enum class DistanceKind { global_euclidean, local_dmli };

struct TripletBatch {
  std::vector<Embedding> embeddings;
  std::vector<int> person_ids;  // class indices during training
  double margin = 0.3;
};

// every identity present with >= 2 instances and >= 2 distinct identities
void validate_batch(const TripletBatch& batch);

struct BatchHardResult {
  Tensor loss;  // mean over anchors; taped when a tape scope is active
  std::vector<int> hardest_positive;  // per anchor, batch index
  std::vector<int> hardest_negative;
  std::vector<double> per_anchor_loss;
};

// For each anchor selects the farthest same-identity and nearest
// different-identity sample, then averages the per-anchor hinge losses.
// Ties break to the lowest batch index.
BatchHardResult batch_hard_loss(const TripletBatch& batch, DistanceKind kind);

struct LossBreakdown {
  double id_loss = 0.0;
  double global_triplet = 0.0;
  double local_triplet = 0.0;
  double total = 0.0;
  Tensor total_t;  // taped combined loss
};

// total = mean softmax cross-entropy + global batch-hard + DMLI batch-hard
LossBreakdown combined_loss(const TripletBatch& batch);

// raw pairwise distance table used for mining (and reusable by tests)
Matrix pairwise_distances(const TripletBatch& batch, DistanceKind kind);

}  // namespace reid

#endif  // REID_METRICLEARN_HPP_
