#include "reid/alignednet.hpp"

#include <cmath>

#include "reid/checkpoint.hpp"
#include "reid/error.hpp"
#include "reid/rng.hpp"

namespace reid {

namespace {

Tensor he_uniform(std::vector<int> shape, int fan_in, Rng& rng, const std::string& name) {
  const double limit = std::sqrt(6.0 / fan_in);
  int n = 1;
  for (int d : shape) n *= d;
  std::vector<double> data(static_cast<size_t>(n));
  for (double& v : data) v = rng.uniform(-limit, limit);
  Tensor t = Tensor::from_data(std::move(shape), std::move(data), true);
  t.set_name(name);
  return t;
}

Tensor zeros_param(std::vector<int> shape, const std::string& name) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  t.set_name(name);
  return t;
}

}  // namespace

AlignedNet::AlignedNet(const NetConfig& cfg, uint64_t seed) : cfg_(cfg) {
  check(cfg.in_h % 8 == 0 && cfg.in_w % 8 == 0,
        "net config: input dims must be divisible by 8, got " +
            std::to_string(cfg.in_h) + "x" + std::to_string(cfg.in_w));
  Rng rng(mix_seed(seed, 0xA11E7ULL));
  int in_c = 3;
  for (int i = 0; i < 3; ++i) {
    const int out_c = cfg.channels[static_cast<size_t>(i)];
    const std::string tag = "conv" + std::to_string(i + 1);
    params_.push_back(he_uniform({out_c, in_c, 3, 3}, in_c * 9, rng, tag + ".w"));
    params_.push_back(zeros_param({out_c}, tag + ".b"));
    in_c = out_c;
  }
  if (cfg.num_classes > 0) {
    params_.push_back(he_uniform({cfg.num_classes, cfg.embed_dim()},
                                 cfg.embed_dim(), rng, "fc.w"));
    params_.push_back(zeros_param({cfg.num_classes}, "fc.b"));
  }
}

Tensor AlignedNet::find_param(const std::string& name) const {
  for (const Tensor& t : params_)
    if (t.name() == name) return t;
  fail("model parameter not found: " + name);
}

Tensor AlignedNet::backbone(const Tensor& image) const {
  check(image.shape() == std::vector<int>({3, cfg_.in_h, cfg_.in_w}),
        "forward: image shape " + shape_str(image.shape()) + " does not match configured {3," +
            std::to_string(cfg_.in_h) + "," + std::to_string(cfg_.in_w) + "}");
  Tensor x = image;
  for (int i = 0; i < 3; ++i) {
    const std::string tag = "conv" + std::to_string(i + 1);
    x = conv2d(x, find_param(tag + ".w"), find_param(tag + ".b"), 1, Padding::same);
    x = relu(x);
    x = maxpool2x2(x);
  }
  return x;
}

Tensor AlignedNet::global_branch(const Tensor& feature_map) {
  // average over width then height: global average pooling over all positions
  return mean_axis(mean_axis(feature_map, 2), 1);
}

Tensor AlignedNet::local_branch(const Tensor& feature_map, double eps) {
  Tensor rows = max_axis(feature_map, 2);       // {C,H}: horizontal max pooling
  Tensor stripes = transpose(rows);             // {H,C}
  return l2_normalize_rows(stripes, eps);
}

Embedding AlignedNet::forward(const Tensor& image, bool with_logits) const {
  Tensor fmap = backbone(image);
  Embedding e;
  e.global = global_branch(fmap);
  e.stripes = local_branch(fmap, cfg_.stripe_eps);
  if (with_logits) {
    check(cfg_.num_classes > 0, "forward: logits requested but the model has no identity head");
    Tensor z = matmul(find_param("fc.w"), reshape(e.global, {cfg_.embed_dim(), 1}));
    e.logits = add(reshape(z, {cfg_.num_classes}), find_param("fc.b"));
  }
  return e;
}

void AlignedNet::warm_start_from(const AlignedNet& other) {
  for (Tensor& mine : params_) {
    for (const Tensor& theirs : other.params_) {
      if (theirs.name() == mine.name() && theirs.shape() == mine.shape()) {
        std::copy(theirs.data().begin(), theirs.data().end(), mine.mutable_data());
        break;
      }
    }
  }
}

uint64_t AlignedNet::parameter_hash() const { return tensors_hash(params_); }

void AlignedNet::save(const std::string& path,
                      const std::map<std::string, std::string>& meta) const {
  std::map<std::string, std::string> m = meta;
  m["net.in_h"] = std::to_string(cfg_.in_h);
  m["net.in_w"] = std::to_string(cfg_.in_w);
  m["net.c1"] = std::to_string(cfg_.channels[0]);
  m["net.c2"] = std::to_string(cfg_.channels[1]);
  m["net.c3"] = std::to_string(cfg_.channels[2]);
  m["net.num_classes"] = std::to_string(cfg_.num_classes);
  save_checkpoint(path, params_, m);
}

AlignedNet AlignedNet::load(const std::string& path) {
  CheckpointData data = load_checkpoint(path);
  auto geti = [&](const std::string& key) {
    auto it = data.meta.find(key);
    check(it != data.meta.end(), "checkpoint missing metadata key " + key + ": " + path);
    return std::stoi(it->second);
  };
  AlignedNet net;
  net.cfg_.in_h = geti("net.in_h");
  net.cfg_.in_w = geti("net.in_w");
  net.cfg_.channels = {geti("net.c1"), geti("net.c2"), geti("net.c3")};
  net.cfg_.num_classes = geti("net.num_classes");
  for (Tensor& t : data.tensors) t.set_requires_grad(true);
  net.params_ = std::move(data.tensors);
  const size_t expected = net.cfg_.num_classes > 0 ? 8 : 6;
  check(net.params_.size() == expected,
        "checkpoint has wrong parameter count for its header: " + path);
  return net;
}

Tensor image_to_tensor(const ImageSample& sample, int height, int width) {
  check(static_cast<int>(sample.pixels.size()) == height * width * 3,
        "image_to_tensor: pixel buffer does not match " + std::to_string(height) +
            "x" + std::to_string(width) + "x3");
  std::vector<double> chw(sample.pixels.size());
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < 3; ++c)
        chw[(static_cast<size_t>(c) * height + y) * width + x] =
            sample.pixels[(static_cast<size_t>(y) * width + x) * 3 + c];
  return Tensor::from_data({3, height, width}, std::move(chw));
}

Matrix embed_dataset(const AlignedNet& model, const Dataset& ds) {
  const int dim = model.config().embed_dim();
  Matrix features(static_cast<int>(ds.samples.size()), dim);
  for (int i = 0; i < static_cast<int>(ds.samples.size()); ++i) {
    Tensor img = image_to_tensor(ds.samples[static_cast<size_t>(i)], ds.height, ds.width);
    Embedding e = model.forward(img);
    std::copy(e.global.data().begin(), e.global.data().end(), features.row(i));
  }
  return features;
}

}  // namespace reid
