#include <doctest.h>

#include <cmath>

#include "reid/error.hpp"
#include "reid/tensor.hpp"
#include "testutil.hpp"

using namespace reid;
using reidtest::gradcheck;
using reidtest::random_tensor;

TEST_SUITE("diffcore") {

TEST_CASE("relu definition") {
  Tensor x = Tensor::from_data({3}, {-1.0, 0.0, 2.0});
  Tensor y = relu(x);
  CHECK(y.at(0) == 0.0);
  CHECK(y.at(1) == 0.0);
  CHECK(y.at(2) == 2.0);
}

TEST_CASE("matmul identity returns the operand") {
  Rng rng(7);
  Tensor a = random_tensor({3, 3}, rng, -2, 2, false);
  Tensor eye = Tensor::from_data({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tensor r = matmul(eye, a);
  for (int i = 0; i < 9; ++i) CHECK(r.at(i) == a.at(i));
}

TEST_CASE("uniform softmax cross-entropy is ln 2") {
  Tensor logits = Tensor::from_data({2}, {0.0, 0.0});
  CHECK(softmax_cross_entropy(logits, 0).value() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("backward of sum of squares") {
  Tensor x = Tensor::from_data({2}, {1.0, 2.0}, true);
  GradTape tape;
  TapeScope scope(tape);
  Tensor loss = sum_all(mul(x, x));
  backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(2.0));
  CHECK(x.grad()[1] == doctest::Approx(4.0));
}

TEST_CASE("euclidean distance gradient at (3,0)-(0,4)") {
  Tensor u = Tensor::from_data({2}, {3.0, 0.0}, true);
  Tensor v = Tensor::from_data({2}, {0.0, 4.0});
  auto loss_fn = [&]() {
    Tensor d = sub(u, v);
    return sqrt_t(sum_all(mul(d, d)));
  };
  GradTape tape;
  {
    TapeScope scope(tape);
    backward(loss_fn());
  }
  CHECK(u.grad()[0] == doctest::Approx(0.6).epsilon(1e-9));
  CHECK(u.grad()[1] == doctest::Approx(-0.8).epsilon(1e-9));
  CHECK(gradcheck(loss_fn, {u}) < 1e-3);
}

TEST_CASE("loss constant w.r.t. a tensor leaves zero grads") {
  Tensor x = Tensor::from_data({3}, {1.0, 2.0, 3.0}, true);
  Tensor z = Tensor::from_data({2}, {1.0, 1.0}, true);
  GradTape tape;
  TapeScope scope(tape);
  Tensor unused = mul(x, x);  // on the tape, unreachable from the loss
  Tensor loss = sum_all(mul(z, z));
  backward(loss);
  REQUIRE(x.has_grad());
  for (double g : x.grad()) CHECK(g == 0.0);
}

TEST_CASE("sgd single step and zero learning rate") {
  Tensor p = Tensor::scalar(1.0, true);
  p.set_name("p");
  GradTape tape;
  {
    TapeScope scope(tape);
    backward(mul_scalar(mul(p, p), 1.0));  // dL/dp = 2
  }
  SgdOptimizer opt(0.1, 0.0);
  opt.step({p});
  CHECK(p.value() == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(p.grad()[0] == 0.0);

  Tensor q = Tensor::scalar(1.0, true);
  {
    TapeScope scope(tape);
    backward(mul(q, q));
  }
  SgdOptimizer frozen(0.0, 0.0);
  frozen.step({q});
  CHECK(q.value() == 1.0);
}

TEST_CASE("two momentum steps with constant unit gradient") {
  // v <- 0.9 v + g with g = 1, lr = 0.1, p0 = 0: p2 = -0.29
  Tensor p = Tensor::scalar(0.0, true);
  SgdOptimizer opt(0.1, 0.9);
  GradTape tape;
  for (int step = 0; step < 2; ++step) {
    TapeScope scope(tape);
    backward(p);  // dL/dp = 1
    opt.step({p});
  }
  CHECK(p.value() == doctest::Approx(-0.29).epsilon(1e-12));
}

TEST_CASE("sgd missing grad names the parameter") {
  Tensor p = Tensor::scalar(1.0, true);
  p.set_name("conv9.w");
  SgdOptimizer opt(0.1, 0.0);
  CHECK_THROWS_WITH_AS(opt.step({p}), doctest::Contains("conv9.w"), Error);
}

TEST_CASE("shape mismatch errors name both shapes") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({3, 3});
  CHECK_THROWS_WITH_AS(add(a, b), doctest::Contains("[2x3]"), Error);
  CHECK_THROWS_WITH_AS(add(a, b), doctest::Contains("[3x3]"), Error);
}

TEST_CASE("backward rejects non-scalar losses") {
  Tensor x = Tensor::from_data({2}, {1.0, 2.0}, true);
  GradTape tape;
  TapeScope scope(tape);
  Tensor y = mul(x, x);
  CHECK_THROWS_WITH_AS(backward(y), doctest::Contains("scalar"), Error);
}

TEST_CASE("non-finite outputs raise") {
  Tensor big = Tensor::from_data({1}, {1000.0});
  CHECK_THROWS_WITH_AS(exp_t(big), doctest::Contains("non-finite"), Error);
  Tensor neg = Tensor::from_data({1}, {-1.0});
  CHECK_THROWS_AS(sqrt_t(neg), Error);
  CHECK_THROWS_AS(log_t(neg), Error);
}

TEST_CASE("sum of two losses equals sum of separate gradients") {
  Rng rng(11);
  Tensor x = random_tensor({4}, rng);
  GradTape tape;
  {
    TapeScope scope(tape);
    Tensor l1 = sum_all(mul(x, x));
    Tensor l2 = sum_all(exp_t(mul_scalar(x, 0.3)));
    backward(add(l1, l2));
  }
  std::vector<double> combined(x.grad().begin(), x.grad().end());
  x.zero_grad();
  {
    TapeScope scope(tape);
    backward(sum_all(mul(x, x)));
  }
  std::vector<double> g1(x.grad().begin(), x.grad().end());
  x.zero_grad();
  {
    TapeScope scope(tape);
    backward(sum_all(exp_t(mul_scalar(x, 0.3))));
  }
  for (int i = 0; i < 4; ++i)
    CHECK(combined[static_cast<size_t>(i)] ==
          doctest::Approx(g1[static_cast<size_t>(i)] + x.grad()[static_cast<size_t>(i)]).epsilon(1e-12));
}

TEST_CASE("gradients accumulate when a tensor feeds multiple ops") {
  Tensor x = Tensor::scalar(3.0, true);
  GradTape tape;
  TapeScope scope(tape);
  backward(add(mul(x, x), x));  // d/dx (x^2 + x) = 2x + 1 = 7
  CHECK(x.grad()[0] == doctest::Approx(7.0).epsilon(1e-12));
}

TEST_CASE("finite differences pass for every primitive op") {
  Rng rng(13);
  const double tol = 1e-3;

  SUBCASE("elementwise and reductions") {
    Tensor a = random_tensor({3, 4}, rng);
    Tensor b = random_tensor({3, 4}, rng);
    CHECK(gradcheck([&] { return sum_all(mul(add(a, b), sub(a, b))); }, {a, b}) < tol);
    CHECK(gradcheck([&] { return mean_all(mul(a, a)); }, {a}) < tol);
    CHECK(gradcheck([&] { return sum_all(tanh_t(a)); }, {a}) < tol);
    CHECK(gradcheck([&] { return sum_all(exp_t(mul_scalar(a, 0.5))); }, {a}) < tol);
    CHECK(gradcheck([&] { return sum_all(softplus(a)); }, {a}) < tol);
    CHECK(gradcheck([&] { return sum_all(relu(a)); }, {a}) < tol);
    CHECK(gradcheck([&] { return sum_all(leaky_relu(a, 0.2)); }, {a}) < tol);
    CHECK(gradcheck([&] { return sum_all(abs_t(a)); }, {a}) < tol);
    CHECK(gradcheck([&] { return mean_axis(mean_axis(mul(a, a), 1), 0); }, {a}) < tol);
    CHECK(gradcheck([&] { return sum_all(max_axis(a, 1)); }, {a}) < tol);
  }

  SUBCASE("positive-domain ops") {
    Tensor p = random_tensor({5}, rng, 0.5, 2.0);
    CHECK(gradcheck([&] { return sum_all(sqrt_t(p)); }, {p}) < tol);
    CHECK(gradcheck([&] { return sum_all(log_t(p)); }, {p}) < tol);
  }

  SUBCASE("structure ops") {
    Tensor a = random_tensor({4, 3}, rng);
    Tensor s = random_tensor({1}, rng, 0.7, 1.8);
    CHECK(gradcheck([&] { return sum_all(mul(transpose(a), transpose(a))); }, {a}) < tol);
    CHECK(gradcheck([&] { return sum_all(row_slice(mul(a, a), 2)); }, {a}) < tol);
    CHECK(gradcheck([&] { return sum_all(div_scalar_t(a, s)); }, {a, s}) < tol);
    CHECK(gradcheck([&] { return sum_all(l2_normalize_rows(a, 1e-12)); }, {a}) < tol);
    CHECK(gradcheck([&] { return sum_all(reshape(mul(a, a), {2, 6})); }, {a}) < tol);
  }

  SUBCASE("matmul conv pool upsample") {
    Tensor a = random_tensor({3, 4}, rng);
    Tensor b = random_tensor({4, 2}, rng);
    CHECK(gradcheck([&] { return sum_all(matmul(a, b)); }, {a, b}) < tol);

    Tensor img = random_tensor({2, 6, 4}, rng);
    Tensor w = random_tensor({3, 2, 3, 3}, rng, -0.5, 0.5);
    Tensor bias = random_tensor({3}, rng, -0.5, 0.5);
    CHECK(gradcheck([&] { return sum_all(mul(conv2d(img, w, bias, 1, Padding::same),
                                             conv2d(img, w, bias, 1, Padding::same))); },
                    {img, w, bias}) < tol);
    CHECK(gradcheck([&] { return sum_all(conv2d(img, w, bias, 2, Padding::same)); },
                    {img, w, bias}) < tol);
    CHECK(gradcheck([&] { return sum_all(conv2d(img, w, bias, 1, Padding::valid)); },
                    {img, w, bias}) < tol);
    CHECK(gradcheck([&] { return sum_all(mul(maxpool2x2(img), maxpool2x2(img))); }, {img}) < tol);
    CHECK(gradcheck([&] { return sum_all(mul(upsample2x(img), upsample2x(img))); }, {img}) < tol);
  }

  SUBCASE("softmax cross entropy") {
    Tensor logits = random_tensor({6}, rng);
    CHECK(gradcheck([&] { return softmax_cross_entropy(logits, 2); }, {logits}) < tol);
  }
}

TEST_CASE("tape is cleared by backward and reusable") {
  Tensor x = Tensor::scalar(2.0, true);
  GradTape tape;
  {
    TapeScope scope(tape);
    backward(mul(x, x));
    CHECK(tape.size() == 0);
  }
  {
    TapeScope scope(tape);
    backward(mul(x, x));
  }
  CHECK(x.grad()[0] == doctest::Approx(8.0));  // two accumulated passes, 4 + 4
}

TEST_CASE("ops outside a tape scope do not record") {
  Tensor x = Tensor::scalar(2.0, true);
  Tensor y = mul(x, x);
  CHECK_FALSE(y.requires_grad());
}

}  // TEST_SUITE
