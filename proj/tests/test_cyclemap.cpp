#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "reid/cyclemap.hpp"
#include "reid/error.hpp"
#include "reid/synthgen.hpp"
#include "testutil.hpp"

using namespace reid;
namespace fs = std::filesystem;

namespace {

GanConfig tiny_gan() {
  GanConfig cfg;
  cfg.in_h = 16;
  cfg.in_w = 8;
  cfg.gen_channels = 4;
  cfg.disc_channels = 4;
  cfg.res_blocks = 1;
  cfg.steps = 30;
  cfg.learning_rate = 0.005;
  cfg.momentum = 0.5;
  cfg.log_every = 5;
  return cfg;
}

DomainSpec tiny_domain(bool shifted) {
  DomainSpec spec = shifted ? default_target_spec() : default_source_spec();
  spec.num_identities = 4;
  spec.instances_per_camera = 2;
  spec.height = 16;
  spec.width = 8;
  return spec;
}

std::vector<Tensor> to_tensors(const Dataset& ds, int limit) {
  std::vector<Tensor> out;
  for (int i = 0; i < limit && i < static_cast<int>(ds.samples.size()); ++i)
    out.push_back(image_to_tensor(ds.samples[static_cast<size_t>(i)], ds.height, ds.width));
  return out;
}

}  // namespace

TEST_SUITE("cyclemap") {

TEST_CASE("cycle loss of identity maps is zero") {
  Rng rng(1);
  std::vector<Tensor> bs = {reidtest::random_tensor({3, 4, 4}, rng, 0.0, 1.0, false)};
  std::vector<Tensor> bt = {reidtest::random_tensor({3, 4, 4}, rng, 0.0, 1.0, false)};
  ImageMap identity = [](const Tensor& x) { return x; };
  CHECK(cycle_loss(identity, identity, bs, bt).value() == 0.0);
}

TEST_CASE("constant offset contributes its magnitude as mean L1") {
  Rng rng(2);
  std::vector<Tensor> bs = {reidtest::random_tensor({3, 8, 8}, rng, 0.2, 0.8, false)};
  std::vector<Tensor> bt = {reidtest::random_tensor({3, 8, 8}, rng, 0.2, 0.8, false)};
  ImageMap plus = [](const Tensor& x) { return add_scalar(x, 0.1); };
  ImageMap identity = [](const Tensor& x) { return x; };
  // F(G(x)) = x + 0.1 on both cycles: each term contributes 0.1
  Tensor loss = cycle_loss(plus, identity, bs, bt);
  CHECK(loss.value() == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("cycle loss matches a per-pixel loop oracle on real generators") {
  GanConfig cfg = tiny_gan();
  GeneratorNet g(cfg, 3, "G"), f(cfg, 4, "F");
  Rng rng(5);
  std::vector<Tensor> bs = {reidtest::random_tensor({3, 16, 8}, rng, 0.0, 1.0, false)};
  std::vector<Tensor> bt = {reidtest::random_tensor({3, 16, 8}, rng, 0.0, 1.0, false)};
  const double loss = cycle_loss(g, f, bs, bt).value();

  auto l1 = [](const Tensor& a, const Tensor& b) {
    double acc = 0.0;
    for (int i = 0; i < a.numel(); ++i) acc += std::fabs(a.at(i) - b.at(i));
    return acc / a.numel();
  };
  const double oracle = l1(f.forward(g.forward(bs[0])), bs[0]) +
                        l1(g.forward(f.forward(bt[0])), bt[0]);
  CHECK(loss == doctest::Approx(oracle).epsilon(1e-10));
}

TEST_CASE("cycle loss is zero iff reconstructions are exact") {
  Rng rng(6);
  std::vector<Tensor> bs = {reidtest::random_tensor({3, 4, 4}, rng, 0.1, 0.9, false)};
  ImageMap identity = [](const Tensor& x) { return x; };
  ImageMap nearly = [](const Tensor& x) { return add_scalar(x, 1e-6); };
  CHECK(cycle_loss(identity, identity, bs, bs).value() == 0.0);
  CHECK(cycle_loss(nearly, identity, bs, bs).value() > 0.0);
}

TEST_CASE("least-squares gan losses at a constant half score") {
  Rng rng(7);
  std::vector<Tensor> real = {reidtest::random_tensor({3, 4, 4}, rng, 0.0, 1.0, false)};
  std::vector<Tensor> fake = {reidtest::random_tensor({3, 4, 4}, rng, 0.0, 1.0, false)};
  ScoreMap half = [](const Tensor&) { return Tensor::from_data({1, 1, 1}, {0.5}); };
  GanLossPair pair = gan_losses(half, real, fake, true);
  CHECK(pair.d_loss.value() == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(pair.g_loss.value() == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("perfect discriminator has zero loss") {
  // real batch holds ones-images, fakes hold zeros; D scores by pixel mean
  std::vector<Tensor> real = {Tensor::from_data({3, 2, 2}, std::vector<double>(12, 1.0))};
  std::vector<Tensor> fake = {Tensor::zeros({3, 2, 2})};
  ScoreMap by_mean = [](const Tensor& x) { return reshape(mean_all(x), {1, 1, 1}); };
  GanLossPair pair = gan_losses(by_mean, real, fake, true);
  CHECK(pair.d_loss.value() == 0.0);
  CHECK(pair.g_loss.value() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("one generator step against a frozen discriminator lowers g_loss") {
  GanConfig cfg = tiny_gan();
  GeneratorNet g(cfg, 11, "G");
  PatchDiscriminator d(cfg, 12, "D");
  Rng rng(13);
  std::vector<Tensor> batch = {reidtest::random_tensor({3, 16, 8}, rng, 0.0, 1.0, false)};
  std::vector<Tensor> real = {reidtest::random_tensor({3, 16, 8}, rng, 0.0, 1.0, false)};

  for (Tensor& p : d.parameters()) p.set_requires_grad(false);
  GradTape tape;
  double before;
  {
    TapeScope scope(tape);
    std::vector<Tensor> fake = {g.forward(batch[0])};
    GanLossPair pair = gan_losses(d, real, fake, true);
    before = pair.g_loss.value();
    backward(pair.g_loss);
  }
  SgdOptimizer opt(0.002, 0.0);
  opt.step(g.parameters());
  std::vector<Tensor> fake2 = {g.forward(batch[0])};
  GanLossPair after = gan_losses(d, real, fake2, true);
  CHECK(after.g_loss.value() < before);
  for (Tensor& p : d.parameters()) p.set_requires_grad(true);
}

TEST_CASE("generator output stays inside the unit interval") {
  GanConfig cfg = tiny_gan();
  GeneratorNet g(cfg, 21, "G");
  Rng rng(22);
  Tensor out = g.forward(reidtest::random_tensor({3, 16, 8}, rng, 0.0, 1.0, false));
  CHECK(out.shape() == std::vector<int>({3, 16, 8}));
  for (int i = 0; i < out.numel(); ++i) {
    CHECK(out.at(i) >= 0.0);
    CHECK(out.at(i) <= 1.0);
  }
}

TEST_CASE("training without the cycle term reduces the total to the gan parts") {
  GanConfig cfg = tiny_gan();
  cfg.lambda_cyc = 0.0;
  cfg.steps = 4;
  Dataset src = generate_domain(tiny_domain(false), Domain::source, 31);
  Dataset tgt = generate_domain(tiny_domain(true), Domain::target, 32);
  CycleGanResult r = train_cyclegan(src, tgt, cfg, 33);
  for (const CycleGanTraceRow& row : r.trace)
    CHECK(row.gen.total ==
          doctest::Approx(row.gen.gan_s_to_t + row.gen.gan_t_to_s).epsilon(1e-12));
}

TEST_CASE("breakdown recomposes with the cycle weight") {
  GanConfig cfg = tiny_gan();
  cfg.steps = 4;
  Dataset src = generate_domain(tiny_domain(false), Domain::source, 41);
  Dataset tgt = generate_domain(tiny_domain(true), Domain::target, 42);
  CycleGanResult r = train_cyclegan(src, tgt, cfg, 43);
  for (const CycleGanTraceRow& row : r.trace)
    CHECK(row.gen.total == doctest::Approx(row.gen.gan_s_to_t + row.gen.gan_t_to_s +
                                           row.gen.lambda * row.gen.cycle)
                               .epsilon(1e-12));
}

TEST_CASE("fixed seed reproduces the training trace") {
  GanConfig cfg = tiny_gan();
  cfg.steps = 12;
  Dataset src = generate_domain(tiny_domain(false), Domain::source, 51);
  Dataset tgt = generate_domain(tiny_domain(true), Domain::target, 52);
  CycleGanResult a = train_cyclegan(src, tgt, cfg, 53);
  CycleGanResult b = train_cyclegan(src, tgt, cfg, 53);
  REQUIRE(a.trace.size() == b.trace.size());
  for (size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].gen.total == b.trace[i].gen.total);
    CHECK(a.trace[i].d_source == b.trace[i].d_source);
  }
  CycleGanResult c = train_cyclegan(src, tgt, cfg, 54);
  CHECK(a.trace.back().gen.total != c.trace.back().gen.total);
}

TEST_CASE("divergent training aborts with a step diagnostic") {
  GanConfig cfg = tiny_gan();
  cfg.steps = 60;
  cfg.learning_rate = 1e14;
  Dataset src = generate_domain(tiny_domain(false), Domain::source, 61);
  Dataset tgt = generate_domain(tiny_domain(true), Domain::target, 62);
  CHECK_THROWS_WITH_AS(train_cyclegan(src, tgt, cfg, 63), doctest::Contains("aborted at step"),
                       Error);
}

TEST_CASE("translate_dataset keeps records and clamps pixels") {
  GanConfig cfg = tiny_gan();
  GeneratorNet g(cfg, 71, "G");
  Dataset src = generate_domain(tiny_domain(false), Domain::source, 72);
  Dataset da = translate_dataset(g, src);
  REQUIRE(da.samples.size() == src.samples.size());
  CHECK(da.domain == Domain::adapted);
  for (size_t i = 0; i < da.samples.size(); ++i) {
    CHECK(da.samples[i].person_id == src.samples[i].person_id);
    CHECK(da.samples[i].camera_id == src.samples[i].camera_id);
    CHECK(da.samples[i].domain == Domain::adapted);
    for (double v : da.samples[i].pixels) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("generator pair round-trips through its checkpoint") {
  const fs::path path = fs::temp_directory_path() / "reid_gan.ckpt";
  GanConfig cfg = tiny_gan();
  GeneratorNet g(cfg, 81, "G"), f(cfg, 82, "F");
  save_generator_pair(path.string(), g, f);
  GeneratorPair pair = load_generator_pair(path.string());
  Rng rng(83);
  Tensor img = reidtest::random_tensor({3, 16, 8}, rng, 0.0, 1.0, false);
  Tensor a = g.forward(img);
  Tensor b = pair.g.forward(img);
  for (int i = 0; i < a.numel(); ++i) CHECK(a.at(i) == b.at(i));
  Tensor c = f.forward(img);
  Tensor d = pair.f.forward(img);
  for (int i = 0; i < c.numel(); ++i) CHECK(c.at(i) == d.at(i));
  fs::remove(path);
}

}  // TEST_SUITE
