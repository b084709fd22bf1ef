#ifndef REID_TESTS_TESTUTIL_HPP_
#define REID_TESTS_TESTUTIL_HPP_

#include <cmath>
#include <functional>
#include <vector>

#include "reid/rng.hpp"
#include "reid/tensor.hpp"

namespace reidtest {

inline reid::Tensor random_tensor(std::vector<int> shape, reid::Rng& rng,
                                  double lo = -2.0, double hi = 2.0,
                                  bool requires_grad = true) {
  int n = 1;
  for (int d : shape) n *= d;
  std::vector<double> data(static_cast<size_t>(n));
  for (double& v : data) v = rng.uniform(lo, hi);
  return reid::Tensor::from_data(std::move(shape), std::move(data), requires_grad);
}

// Independent oracle for backward(): central finite differences over every
// element of every parameter. build_loss must recompute the loss from the
// parameters' current values. Returns the max relative error.
inline double gradcheck(const std::function<reid::Tensor()>& build_loss,
                        std::vector<reid::Tensor> params, double step = 1e-4) {
  reid::GradTape tape;
  std::vector<std::vector<double>> analytic;
  {
    reid::TapeScope scope(tape);
    reid::Tensor loss = build_loss();
    reid::backward(loss);
  }
  for (auto& p : params) {
    analytic.emplace_back(p.grad().begin(), p.grad().end());
    p.zero_grad();
  }

  double worst = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    reid::Tensor& p = params[pi];
    for (int i = 0; i < p.numel(); ++i) {
      double* x = p.mutable_data() + i;
      const double saved = *x;
      *x = saved + step;
      const double up = build_loss().value();
      *x = saved - step;
      const double down = build_loss().value();
      *x = saved;
      const double fd = (up - down) / (2.0 * step);
      const double a = analytic[pi][static_cast<size_t>(i)];
      const double rel = std::fabs(a - fd) / std::max({std::fabs(a), std::fabs(fd), 1e-6});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace reidtest

#endif  // REID_TESTS_TESTUTIL_HPP_
