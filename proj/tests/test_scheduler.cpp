#include <doctest.h>

#include <algorithm>
#include <map>

#include "reid/error.hpp"
#include "reid/scheduler.hpp"
#include "reid/synthgen.hpp"

using namespace reid;

namespace {

Dataset toy_dataset(int ids, int cams, int instances, uint64_t seed) {
  DomainSpec spec;
  spec.num_identities = ids;
  spec.num_cameras = cams;
  spec.instances_per_camera = instances;
  spec.height = 16;
  spec.width = 8;
  return generate_domain(spec, Domain::source, seed);
}

}  // namespace

TEST_SUITE("scheduler") {

TEST_CASE("pk sample draws P identities with K instances") {
  Dataset ds = toy_dataset(6, 2, 4, 1);
  LabeledDataset lab = bind_labels(ds);
  Rng rng(2);
  PkBatch batch = pk_sample(lab, 8, 4, rng);
  REQUIRE(batch.indices.size() == 8);
  std::map<int, int> per_class;
  for (int label : batch.labels) per_class[label] += 1;
  CHECK(per_class.size() == 2);
  for (const auto& [cls, count] : per_class) CHECK(count == 4);
}

TEST_CASE("identity with fewer images than K repeats its pool") {
  Dataset ds = toy_dataset(3, 2, 1, 3);  // 2 images per identity
  LabeledDataset lab = bind_labels(ds);
  Rng rng(4);
  PkBatch batch = pk_sample(lab, 8, 4, rng);
  std::map<int, std::map<int, int>> occurrences;  // class -> index -> count
  for (size_t i = 0; i < batch.indices.size(); ++i)
    occurrences[batch.labels[i]][batch.indices[i]] += 1;
  for (const auto& [cls, counts] : occurrences) {
    int total = 0;
    for (const auto& [idx, count] : counts) {
      CHECK(count == 2);  // both images repeated to reach K = 4
      total += count;
    }
    CHECK(total == 4);
  }
}

TEST_CASE("pk sampling is deterministic for a fixed seed") {
  Dataset ds = toy_dataset(8, 2, 4, 5);
  LabeledDataset lab = bind_labels(ds);
  PkBatch a = pk_sample(lab, 16, 4, static_cast<uint64_t>(99));
  PkBatch b = pk_sample(lab, 16, 4, static_cast<uint64_t>(99));
  CHECK(a.indices == b.indices);
  CHECK(a.labels == b.labels);
}

TEST_CASE("pk sample output always satisfies the batch invariants") {
  Dataset ds = toy_dataset(7, 2, 3, 6);
  LabeledDataset lab = bind_labels(ds);
  Rng rng(7);
  for (int trial = 0; trial < 25; ++trial) {
    PkBatch batch = pk_sample(lab, 12, 4, rng);
    std::map<int, int> per_class;
    for (int label : batch.labels) per_class[label] += 1;
    CHECK(per_class.size() >= 2);
    for (const auto& [cls, count] : per_class) CHECK(count >= 2);
  }
}

TEST_CASE("too few identities is rejected") {
  Dataset ds = toy_dataset(2, 2, 4, 8);
  LabeledDataset lab = bind_labels(ds);
  Rng rng(9);
  CHECK_THROWS_WITH_AS(pk_sample(lab, 16, 4, rng), doctest::Contains("identities"), Error);
}

TEST_CASE("hidden-label datasets refuse training binding") {
  DomainSpec spec;
  spec.num_identities = 3;
  spec.height = 16;
  spec.width = 8;
  Dataset tgt = generate_domain(spec, Domain::target, 10);
  CHECK_THROWS_WITH_AS(bind_labels(tgt), doctest::Contains("hidden"), Error);
}

TEST_CASE("schedule doubles only under 0.8 margin") {
  ScheduleState s = make_schedule(4, 0.3, 88, 2);
  CHECK(s.batch_size == 8);
  s = schedule_step(s, 0.23);  // 0.23 < 0.24
  CHECK(s.batch_size == 16);
  CHECK(s.epoch == 1);
  s = schedule_step(s, 0.24);  // boundary: strict comparison
  CHECK(s.batch_size == 16);
  s = schedule_step(s, 0.9);
  CHECK(s.batch_size == 16);
  CHECK(s.loss_history == std::vector<double>({0.23, 0.24, 0.9}));
}

TEST_CASE("schedule respects the cap") {
  ScheduleState s = make_schedule(4, 0.3, 88, 16);  // batch 64
  CHECK(s.batch_size == 64);
  s = schedule_step(s, 0.1);
  CHECK(s.batch_size == 64);  // 128 > 88
}

TEST_CASE("batch sizes form a non-decreasing doubling sequence") {
  ScheduleState s = make_schedule(4, 0.3, 100, 2);
  Rng rng(11);
  int prev = s.batch_size;
  for (int epoch = 0; epoch < 40; ++epoch) {
    s = schedule_step(s, rng.uniform(0.0, 0.6));
    CHECK(s.batch_size >= prev);
    CHECK(s.batch_size <= 100);
    CHECK(s.batch_size % 4 == 0);
    // power-of-two multiple of the initial batch
    int ratio = s.batch_size / 8;
    CHECK((ratio & (ratio - 1)) == 0);
    prev = s.batch_size;
  }
}

TEST_CASE("noise scale formula and approximation") {
  CHECK(noise_scale(1000, 10, 0.1) == doctest::Approx(9.9).epsilon(1e-12));
  CHECK(noise_scale(64, 64, 0.5) == 0.0);
  // g ~ eps*N/B within 1% for N = 1e5
  for (int b = 1; b <= 128; b *= 2) {
    const double g = noise_scale(1e5, b, 0.1);
    const double approx = 0.1 * 1e5 / b;
    CHECK(std::fabs(g - approx) / g < 0.01);
  }
  // halving check: doubling B halves the approximation
  const double g1 = noise_scale(1e5, 32, 0.1);
  const double g2 = noise_scale(1e5, 64, 0.1);
  CHECK(std::fabs(g1 / g2 - 2.0) < 0.01);
  CHECK_THROWS_AS(noise_scale(10, 20, 0.1), Error);
  CHECK_THROWS_AS(noise_scale(10, 0, 0.1), Error);
}

TEST_CASE("collapse detector definition") {
  std::vector<double> pinned = {0.300, 0.300, 0.299};
  std::vector<double> tiny_norms = {0.5, 0.01, 0.0005};
  CHECK(collapse_detector(pinned, tiny_norms, 0.3, 3));
  std::vector<double> decreasing = {0.5, 0.4, 0.2};
  CHECK_FALSE(collapse_detector(decreasing, tiny_norms, 0.3, 3));
  std::vector<double> big_norms = {3.0, 2.5, 2.0};
  CHECK_FALSE(collapse_detector(pinned, big_norms, 0.3, 3));
  // not enough history yet
  std::vector<double> brief = {0.3};
  CHECK_FALSE(collapse_detector(brief, tiny_norms, 0.3, 3));
}

}  // TEST_SUITE
