#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "reid/error.hpp"
#include "reid/metriclearn.hpp"
#include "reid/synthgen.hpp"

using namespace reid;
namespace fs = std::filesystem;

namespace {

DomainSpec small_spec() {
  DomainSpec spec;
  spec.num_identities = 20;
  spec.instances_per_camera = 4;
  spec.num_cameras = 2;
  spec.height = 32;
  spec.width = 16;
  return spec;
}

double mean_pixel_distance(const ImageSample& a, const ImageSample& b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.pixels.size(); ++i) acc += std::fabs(a.pixels[i] - b.pixels[i]);
  return acc / static_cast<double>(a.pixels.size());
}

}  // namespace

TEST_SUITE("synthgen") {

TEST_CASE("sample count is identities x cameras x instances") {
  Dataset ds = generate_domain(small_spec(), Domain::source, 3);
  CHECK(ds.samples.size() == 20u * 2u * 4u);
}

TEST_CASE("same seed regenerates byte-identical pixels") {
  Dataset a = generate_domain(small_spec(), Domain::source, 5);
  Dataset b = generate_domain(small_spec(), Domain::source, 5);
  REQUIRE(a.samples.size() == b.samples.size());
  for (size_t i = 0; i < a.samples.size(); ++i)
    CHECK(a.samples[i].pixels == b.samples[i].pixels);
  Dataset c = generate_domain(small_spec(), Domain::source, 6);
  CHECK(a.samples[0].pixels != c.samples[0].pixels);
}

TEST_CASE("pixels stay in the unit interval") {
  DomainSpec spec = default_target_spec();
  spec.num_identities = 4;
  spec.noise_level = 0.3;
  Dataset ds = generate_domain(spec, Domain::target, 9);
  for (const ImageSample& s : ds.samples)
    for (double v : s.pixels) {
      REQUIRE(v >= 0.0);
      REQUIRE(v <= 1.0);
    }
}

TEST_CASE("same identity looks more alike than different identities") {
  DomainSpec spec = small_spec();
  spec.num_identities = 2;
  spec.instances_per_camera = 6;
  spec.noise_level = 0.0;
  Dataset ds = generate_domain(spec, Domain::source, 17);
  double same_acc = 0.0, diff_acc = 0.0;
  int same_n = 0, diff_n = 0;
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    for (size_t j = i + 1; j < ds.samples.size(); ++j) {
      const auto& a = ds.samples[i];
      const auto& b = ds.samples[j];
      if (a.person_id == b.person_id && a.camera_id == b.camera_id) {
        same_acc += mean_pixel_distance(a, b);
        ++same_n;
      } else if (a.person_id != b.person_id) {
        diff_acc += mean_pixel_distance(a, b);
        ++diff_n;
      }
    }
  }
  REQUIRE(same_n > 0);
  REQUIRE(diff_n > 0);
  CHECK(same_acc / same_n < diff_acc / diff_n);
}

TEST_CASE("domain shift moves pixel statistics, shared generator does not") {
  Dataset src = generate_domain(default_source_spec(), Domain::source, 21);
  Dataset tgt = generate_domain(default_target_spec(), Domain::target, 22);
  const double shift = histogram_distance(channel_histogram(src, 16), channel_histogram(tgt, 16));
  CHECK(shift > 0.05);
  Dataset src2 = generate_domain(default_source_spec(), Domain::source, 21);
  CHECK(histogram_distance(channel_histogram(src, 16), channel_histogram(src2, 16)) == 0.0);
}

TEST_CASE("target labels are quarantined") {
  DomainSpec spec = small_spec();
  Dataset tgt = generate_domain(spec, Domain::target, 30);
  REQUIRE(tgt.labels_hidden());
  for (const ImageSample& s : tgt.samples) CHECK(s.person_id == -1);

  labelaudit::reset();
  CHECK(tgt.true_person_id(0) == 0);
  CHECK(labelaudit::training_reads() == 1);
  CHECK(labelaudit::eval_reads() == 0);
  {
    labelaudit::EvalScope scope;
    (void)tgt.true_person_id(1);
  }
  CHECK(labelaudit::training_reads() == 1);
  CHECK(labelaudit::eval_reads() == 1);
  labelaudit::reset();
}

TEST_CASE("query gallery split follows the cross-view protocol") {
  DomainSpec spec = small_spec();
  spec.num_identities = 10;
  Dataset ds = generate_domain(spec, Domain::source, 40);
  QueryGallerySplit split = split_query_gallery(ds, 7);

  std::set<int> q(split.query.begin(), split.query.end());
  std::set<int> g(split.gallery.begin(), split.gallery.end());
  CHECK(q.size() + g.size() == ds.samples.size());
  for (int idx : split.query) CHECK(g.count(idx) == 0);

  // every query keeps at least one cross-camera positive in the gallery
  for (int qi : split.query) {
    const auto& qs = ds.samples[static_cast<size_t>(qi)];
    bool found = false;
    for (int gi : split.gallery) {
      const auto& gs = ds.samples[static_cast<size_t>(gi)];
      if (gs.person_id == qs.person_id && gs.camera_id != qs.camera_id) found = true;
    }
    CHECK(found);
  }
}

TEST_CASE("split is invariant to sample order") {
  DomainSpec spec = small_spec();
  Dataset ds = generate_domain(spec, Domain::source, 41);
  QueryGallerySplit a = split_query_gallery(ds, 9);

  Dataset shuffled = ds;
  std::reverse(shuffled.samples.begin(), shuffled.samples.end());
  QueryGallerySplit b = split_query_gallery(shuffled, 9);

  // map indices back to sample ids for comparison
  auto ids_of = [](const Dataset& d, const std::vector<int>& idx) {
    std::set<int> out;
    for (int i : idx) out.insert(d.samples[static_cast<size_t>(i)].sample_id);
    return out;
  };
  CHECK(ids_of(ds, a.query) == ids_of(shuffled, b.query));
  CHECK(ids_of(ds, a.gallery) == ids_of(shuffled, b.gallery));
}

TEST_CASE("identity confined to one camera rejects the split") {
  DomainSpec spec = small_spec();
  spec.num_identities = 3;
  Dataset ds = generate_domain(spec, Domain::source, 50);
  // strip camera 1 images of identity 2
  Dataset broken;
  broken.domain = ds.domain;
  broken.height = ds.height;
  broken.width = ds.width;
  for (const ImageSample& s : ds.samples)
    if (!(s.person_id == 2 && s.camera_id == 1)) broken.samples.push_back(s);
  CHECK_THROWS_WITH_AS(split_query_gallery(broken, 1), doctest::Contains("one camera"), Error);
}

TEST_CASE("dataset round-trips through the directory format") {
  const fs::path dir = fs::temp_directory_path() / "reid_test_ds";
  fs::remove_all(dir);
  DomainSpec spec = small_spec();
  spec.num_identities = 3;
  Dataset ds = generate_domain(spec, Domain::target, 60);
  save_dataset(dir.string(), ds);
  Dataset loaded = load_dataset(dir.string());
  REQUIRE(loaded.samples.size() == ds.samples.size());
  CHECK(loaded.domain == Domain::target);
  CHECK(loaded.labels_hidden());
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    CHECK(loaded.samples[i].pixels == ds.samples[i].pixels);
    CHECK(loaded.samples[i].camera_id == ds.samples[i].camera_id);
    CHECK(loaded.samples[i].person_id == -1);
  }
  {
    labelaudit::EvalScope scope;
    for (size_t i = 0; i < ds.samples.size(); ++i)
      CHECK(loaded.true_person_id(static_cast<int>(i)) == ds.hidden_ids[i]);
  }

  // truncated sample record must be detected
  std::ofstream trunc(dir / "sample_0.bin", std::ios::binary | std::ios::trunc);
  trunc << "xy";
  trunc.close();
  CHECK_THROWS_WITH_AS(load_dataset(dir.string()), doctest::Contains("truncated"), Error);
  fs::remove_all(dir);
  labelaudit::reset();
}

TEST_CASE("spec validation") {
  DomainSpec spec = small_spec();
  spec.num_cameras = 1;
  CHECK_THROWS_AS(generate_domain(spec, Domain::source, 1), Error);
  spec = small_spec();
  spec.noise_level = -0.1;
  CHECK_THROWS_AS(generate_domain(spec, Domain::source, 1), Error);
}

}  // TEST_SUITE
