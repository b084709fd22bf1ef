#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "reid/alignednet.hpp"
#include "reid/error.hpp"
#include "reid/metriclearn.hpp"
#include "reid/rng.hpp"
#include "testutil.hpp"

using namespace reid;
namespace fs = std::filesystem;

namespace {

NetConfig tiny_config(int num_classes = 0) {
  NetConfig cfg;
  cfg.in_h = 32;
  cfg.in_w = 16;
  cfg.channels = {4, 8, 16};
  cfg.num_classes = num_classes;
  return cfg;
}

Tensor random_image(const NetConfig& cfg, Rng& rng) {
  return reidtest::random_tensor({3, cfg.in_h, cfg.in_w}, rng, 0.0, 1.0, false);
}

}  // namespace

TEST_SUITE("alignednet") {

TEST_CASE("embedding shapes follow the configuration") {
  NetConfig cfg;  // defaults: 64x32 input, C=64
  AlignedNet net(cfg, 1);
  Rng rng(2);
  Embedding e = net.forward(reidtest::random_tensor({3, 64, 32}, rng, 0.0, 1.0, false));
  CHECK(e.global.shape() == std::vector<int>({64}));
  CHECK(e.stripes.shape() == std::vector<int>({8, 64}));
  CHECK_FALSE(e.logits.defined());
}

TEST_CASE("constant-zero image gives equal stripe rows") {
  AlignedNet net(tiny_config(), 3);
  Tensor zero = Tensor::zeros({3, 32, 16});
  Embedding e = net.forward(zero);
  const int h = e.stripes.dim(0), c = e.stripes.dim(1);
  for (int i = 1; i < h; ++i)
    for (int j = 0; j < c; ++j)
      CHECK(e.stripes.at(i * c + j) == doctest::Approx(e.stripes.at(j)).epsilon(1e-12));
}

TEST_CASE("branch pooling on a hand-built feature map") {
  // fmap[c][i][j] = i: global mean is 3.5, stripe row i is i before norm
  const int c = 5, h = 8, w = 4;
  std::vector<double> data(static_cast<size_t>(c) * h * w);
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j)
        data[(static_cast<size_t>(ch) * h + i) * w + j] = i;
  Tensor fmap = Tensor::from_data({c, h, w}, data);

  Tensor global = AlignedNet::global_branch(fmap);
  REQUIRE(global.shape() == std::vector<int>({c}));
  for (int ch = 0; ch < c; ++ch) CHECK(global.at(ch) == doctest::Approx(3.5).epsilon(1e-12));

  Tensor rows = transpose(max_axis(fmap, 2));  // pre-normalization stripes
  REQUIRE(rows.shape() == std::vector<int>({h, c}));
  for (int i = 0; i < h; ++i)
    for (int ch = 0; ch < c; ++ch)
      CHECK(rows.at(i * c + ch) == doctest::Approx(static_cast<double>(i)).epsilon(1e-12));
}

TEST_CASE("global branch is invariant to spatial permutation") {
  Rng rng(5);
  Tensor fmap = reidtest::random_tensor({6, 4, 4}, rng, -1.0, 1.0, false);
  Tensor g1 = AlignedNet::global_branch(fmap);

  // rotate all spatial positions by one
  const int c = 6, hw = 16;
  std::vector<double> rotated(fmap.data().begin(), fmap.data().end());
  for (int ch = 0; ch < c; ++ch)
    for (int t = 0; t < hw; ++t)
      rotated[static_cast<size_t>(ch) * hw + (t + 1) % hw] = fmap.at(ch * hw + t);
  Tensor g2 = AlignedNet::global_branch(Tensor::from_data({6, 4, 4}, rotated));
  for (int ch = 0; ch < c; ++ch) CHECK(g1.at(ch) == doctest::Approx(g2.at(ch)).epsilon(1e-12));
}

TEST_CASE("stripe i depends only on feature-map row i") {
  Rng rng(6);
  Tensor fmap = reidtest::random_tensor({6, 4, 4}, rng, -1.0, 1.0, false);
  Tensor s1 = AlignedNet::local_branch(fmap, 1e-12);

  std::vector<double> tweaked(fmap.data().begin(), fmap.data().end());
  // perturb row 2 of every channel
  for (int ch = 0; ch < 6; ++ch)
    for (int j = 0; j < 4; ++j) tweaked[(static_cast<size_t>(ch) * 4 + 2) * 4 + j] += 3.0;
  Tensor s2 = AlignedNet::local_branch(Tensor::from_data({6, 4, 4}, tweaked), 1e-12);

  for (int i = 0; i < 4; ++i) {
    bool row_equal = true;
    for (int ch = 0; ch < 6; ++ch)
      if (s1.at(i * 6 + ch) != s2.at(i * 6 + ch)) row_equal = false;
    CHECK(row_equal == (i != 2));
  }
}

TEST_CASE("checkpoint round-trip reproduces forward outputs bit-exactly") {
  const fs::path path = fs::temp_directory_path() / "reid_net.ckpt";
  AlignedNet net(tiny_config(7), 11);
  net.save(path.string(), {{"note", "test"}});
  AlignedNet loaded = AlignedNet::load(path.string());
  Rng rng(12);
  for (int i = 0; i < 10; ++i) {
    Tensor img = random_image(net.config(), rng);
    Embedding a = net.forward(img, true);
    Embedding b = loaded.forward(img, true);
    for (int j = 0; j < a.global.numel(); ++j) CHECK(a.global.at(j) == b.global.at(j));
    for (int j = 0; j < a.stripes.numel(); ++j) CHECK(a.stripes.at(j) == b.stripes.at(j));
    for (int j = 0; j < a.logits.numel(); ++j) CHECK(a.logits.at(j) == b.logits.at(j));
  }
  fs::remove(path);
}

TEST_CASE("truncated checkpoint is rejected") {
  const fs::path path = fs::temp_directory_path() / "reid_trunc.ckpt";
  AlignedNet net(tiny_config(), 13);
  net.save(path.string());
  const auto size = fs::file_size(path);
  fs::resize_file(path, size / 2);
  CHECK_THROWS_WITH_AS(AlignedNet::load(path.string()), doctest::Contains("truncated"), Error);
  std::ofstream bad(path, std::ios::binary | std::ios::trunc);
  bad << "not a checkpoint";
  bad.close();
  CHECK_THROWS_AS(AlignedNet::load(path.string()), Error);
  fs::remove(path);
}

TEST_CASE("different seeds give different parameters") {
  AlignedNet a(tiny_config(), 1);
  AlignedNet b(tiny_config(), 2);
  CHECK(a.parameter_hash() != b.parameter_hash());
  AlignedNet c(tiny_config(), 1);
  CHECK(a.parameter_hash() == c.parameter_hash());
}

TEST_CASE("gradients reach the first conv from all three loss terms") {
  NetConfig cfg = tiny_config(2);
  AlignedNet net(cfg, 21);
  Rng rng(22);

  TripletBatch batch;
  batch.margin = 0.3;
  GradTape tape;
  TapeScope scope(tape);
  for (int i = 0; i < 4; ++i) {
    batch.embeddings.push_back(net.forward(random_image(cfg, rng), true));
    batch.person_ids.push_back(i / 2);
  }
  Tensor conv1 = net.parameters()[0];

  auto grad_norm_after = [&](const Tensor& loss) {
    backward(loss);
    double acc = 0.0;
    for (double g : conv1.grad()) acc += std::fabs(g);
    for (Tensor& p : net.parameters()) p.zero_grad();
    return acc;
  };

  BatchHardResult global = batch_hard_loss(batch, DistanceKind::global_euclidean);
  CHECK(grad_norm_after(global.loss) > 0.0);

  // rebuild the graph after each backward (the tape is consumed)
  batch.embeddings.clear();
  for (int i = 0; i < 4; ++i)
    batch.embeddings.push_back(net.forward(random_image(cfg, rng), true));
  BatchHardResult local = batch_hard_loss(batch, DistanceKind::local_dmli);
  CHECK(grad_norm_after(local.loss) > 0.0);

  batch.embeddings.clear();
  for (int i = 0; i < 4; ++i)
    batch.embeddings.push_back(net.forward(random_image(cfg, rng), true));
  Tensor ce = softmax_cross_entropy(batch.embeddings[0].logits, 0);
  CHECK(grad_norm_after(ce) > 0.0);
}

TEST_CASE("forward validates the image shape") {
  AlignedNet net(tiny_config(), 31);
  CHECK_THROWS_WITH_AS(net.forward(Tensor::zeros({3, 8, 8})), doctest::Contains("shape"), Error);
}

}  // TEST_SUITE
