#include "reid/cyclemap.hpp"

#include <cmath>

#include "reid/alignednet.hpp"
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

Tensor find_by_name(const std::vector<Tensor>& params, const std::string& name) {
  for (const Tensor& t : params)
    if (t.name() == name) return t;
  fail("network parameter not found: " + name);
}

void conv_param(std::vector<Tensor>& params, Rng& rng, const std::string& name,
                int out_c, int in_c) {
  params.push_back(he_uniform({out_c, in_c, 3, 3}, in_c * 9, rng, name + ".w"));
  params.push_back(zeros_param({out_c}, name + ".b"));
}

}  // namespace

// ------------------------------------------------------------ generator ---

GeneratorNet::GeneratorNet(const GanConfig& cfg, uint64_t seed, std::string name)
    : cfg_(cfg), name_(std::move(name)) {
  check(cfg.in_h % 4 == 0 && cfg.in_w % 4 == 0,
        "generator: input dims must be divisible by 4");
  Rng rng(mix_seed(seed, 0x6E4ULL));
  const int c = cfg.gen_channels;
  conv_param(params_, rng, name_ + ".d1", c, 3);
  conv_param(params_, rng, name_ + ".d2", 2 * c, c);
  for (int i = 0; i < cfg.res_blocks; ++i) {
    conv_param(params_, rng, name_ + ".r" + std::to_string(i) + "a", 2 * c, 2 * c);
    conv_param(params_, rng, name_ + ".r" + std::to_string(i) + "b", 2 * c, 2 * c);
  }
  conv_param(params_, rng, name_ + ".u1", c, 2 * c);
  conv_param(params_, rng, name_ + ".u2", 3, c);
}

Tensor GeneratorNet::find_param(const std::string& suffix) const {
  return find_by_name(params_, name_ + "." + suffix);
}

Tensor GeneratorNet::forward(const Tensor& image) const {
  check(image.shape() == std::vector<int>({3, cfg_.in_h, cfg_.in_w}),
        "generator: image shape " + shape_str(image.shape()) + " does not match config");
  Tensor x = add_scalar(mul_scalar(image, 2.0), -1.0);  // [0,1] -> [-1,1]
  x = relu(conv2d(x, find_param("d1.w"), find_param("d1.b"), 2, Padding::same));
  x = relu(conv2d(x, find_param("d2.w"), find_param("d2.b"), 2, Padding::same));
  for (int i = 0; i < cfg_.res_blocks; ++i) {
    const std::string r = "r" + std::to_string(i);
    Tensor h = relu(conv2d(x, find_param(r + "a.w"), find_param(r + "a.b"), 1, Padding::same));
    h = conv2d(h, find_param(r + "b.w"), find_param(r + "b.b"), 1, Padding::same);
    x = add(x, h);
  }
  x = relu(conv2d(upsample2x(x), find_param("u1.w"), find_param("u1.b"), 1, Padding::same));
  x = conv2d(upsample2x(x), find_param("u2.w"), find_param("u2.b"), 1, Padding::same);
  return mul_scalar(add_scalar(tanh_t(x), 1.0), 0.5);  // back to [0,1]
}

// -------------------------------------------------------- discriminator ---

PatchDiscriminator::PatchDiscriminator(const GanConfig& cfg, uint64_t seed,
                                       std::string name)
    : cfg_(cfg), name_(std::move(name)) {
  Rng rng(mix_seed(seed, 0xD15CULL));
  const int c = cfg.disc_channels;
  conv_param(params_, rng, name_ + ".c1", c, 3);
  conv_param(params_, rng, name_ + ".c2", 2 * c, c);
  conv_param(params_, rng, name_ + ".c3", 1, 2 * c);
}

Tensor PatchDiscriminator::find_param(const std::string& suffix) const {
  return find_by_name(params_, name_ + "." + suffix);
}

Tensor PatchDiscriminator::forward(const Tensor& image) const {
  check(image.shape() == std::vector<int>({3, cfg_.in_h, cfg_.in_w}),
        "discriminator: image shape " + shape_str(image.shape()) + " does not match config");
  Tensor x = add_scalar(mul_scalar(image, 2.0), -1.0);
  x = leaky_relu(conv2d(x, find_param("c1.w"), find_param("c1.b"), 2, Padding::same), 0.2);
  x = leaky_relu(conv2d(x, find_param("c2.w"), find_param("c2.b"), 2, Padding::same), 0.2);
  return conv2d(x, find_param("c3.w"), find_param("c3.b"), 1, Padding::same);
}

// ---------------------------------------------------------------- losses --

namespace {

Tensor mean_over(const std::vector<Tensor>& terms) {
  Tensor acc;
  for (const Tensor& t : terms) acc = acc.defined() ? add(acc, t) : t;
  return mul_scalar(acc, 1.0 / static_cast<double>(terms.size()));
}

Tensor mse_to(const Tensor& scores, double target) {
  Tensor d = add_scalar(scores, -target);
  return mean_all(mul(d, d));
}

}  // namespace

GanLossPair gan_losses(const ScoreMap& disc, const std::vector<Tensor>& real,
                       const std::vector<Tensor>& fake, bool least_squares) {
  check(!real.empty() && !fake.empty(), "gan_losses: batches must be non-empty");
  std::vector<Tensor> d_real, d_fake, g_fake;
  for (const Tensor& x : real) {
    Tensor s = disc(x);
    d_real.push_back(least_squares ? mse_to(s, 1.0) : mean_all(softplus(mul_scalar(s, -1.0))));
  }
  for (const Tensor& x : fake) {
    Tensor s = disc(x);  // shared between both losses
    d_fake.push_back(least_squares ? mse_to(s, 0.0) : mean_all(softplus(s)));
    g_fake.push_back(least_squares ? mse_to(s, 1.0) : mean_all(softplus(mul_scalar(s, -1.0))));
  }
  GanLossPair out;
  out.d_loss = mul_scalar(add(mean_over(d_real), mean_over(d_fake)), 0.5);
  out.g_loss = mean_over(g_fake);
  return out;
}

GanLossPair gan_losses(const PatchDiscriminator& disc, const std::vector<Tensor>& real,
                       const std::vector<Tensor>& fake, bool least_squares) {
  return gan_losses([&](const Tensor& x) { return disc.forward(x); }, real, fake,
                    least_squares);
}

Tensor cycle_loss(const ImageMap& g, const ImageMap& f,
                  const std::vector<Tensor>& batch_s, const std::vector<Tensor>& batch_t) {
  check(!batch_s.empty() && !batch_t.empty(), "cycle_loss: batches must be non-empty");
  std::vector<Tensor> terms_s, terms_t;
  for (const Tensor& xs : batch_s)
    terms_s.push_back(mean_all(abs_t(sub(f(g(xs)), xs))));
  for (const Tensor& xt : batch_t)
    terms_t.push_back(mean_all(abs_t(sub(g(f(xt)), xt))));
  return add(mean_over(terms_s), mean_over(terms_t));
}

Tensor cycle_loss(const GeneratorNet& g, const GeneratorNet& f,
                  const std::vector<Tensor>& batch_s, const std::vector<Tensor>& batch_t) {
  return cycle_loss([&](const Tensor& x) { return g.forward(x); },
                    [&](const Tensor& x) { return f.forward(x); }, batch_s, batch_t);
}

// -------------------------------------------------------------- training --

CycleGanResult train_cyclegan(const Dataset& source, const Dataset& target,
                              const GanConfig& cfg, uint64_t seed) {
  check(!source.samples.empty() && !target.samples.empty(),
        "train_cyclegan: both datasets must be non-empty");
  check(source.height == cfg.in_h && source.width == cfg.in_w &&
            target.height == cfg.in_h && target.width == cfg.in_w,
        "train_cyclegan: dataset image size does not match gan config");

  std::vector<Tensor> xs, xt;
  for (const ImageSample& s : source.samples)
    xs.push_back(image_to_tensor(s, source.height, source.width));
  for (const ImageSample& s : target.samples)
    xt.push_back(image_to_tensor(s, target.height, target.width));

  GeneratorNet g(cfg, mix_seed(seed, 1), "G");
  GeneratorNet f(cfg, mix_seed(seed, 2), "F");
  PatchDiscriminator d_target(cfg, mix_seed(seed, 3), "Dt");
  PatchDiscriminator d_source(cfg, mix_seed(seed, 4), "Ds");

  std::vector<Tensor> d_params = d_target.parameters();
  d_params.insert(d_params.end(), d_source.parameters().begin(), d_source.parameters().end());
  std::vector<Tensor> g_params = g.parameters();
  g_params.insert(g_params.end(), f.parameters().begin(), f.parameters().end());

  SgdOptimizer opt_d(cfg.learning_rate, cfg.momentum);
  SgdOptimizer opt_g(cfg.learning_rate, cfg.momentum);
  Rng rng(mix_seed(seed, 0xCCC1ULL));
  GradTape tape;

  CycleGanResult result{std::move(g), std::move(f), {}};
  const GeneratorNet& gen_g = result.source_to_target;
  const GeneratorNet& gen_f = result.target_to_source;

  for (int step = 0; step < cfg.steps; ++step) {
    try {
      std::vector<Tensor> batch_s, batch_t;
      for (int b = 0; b < cfg.batch_per_domain; ++b) {
        batch_s.push_back(xs[static_cast<size_t>(rng.below(static_cast<int>(xs.size())))]);
        batch_t.push_back(xt[static_cast<size_t>(rng.below(static_cast<int>(xt.size())))]);
      }

      // discriminator update against frozen generators (fakes built untaped)
      std::vector<Tensor> fake_t, fake_s;
      for (const Tensor& x : batch_s) fake_t.push_back(gen_g.forward(x));
      for (const Tensor& x : batch_t) fake_s.push_back(gen_f.forward(x));

      double d_t_val, d_s_val;
      {
        TapeScope scope(tape);
        GanLossPair lt = gan_losses(d_target, batch_t, fake_t, cfg.least_squares);
        GanLossPair ls = gan_losses(d_source, batch_s, fake_s, cfg.least_squares);
        d_t_val = lt.d_loss.value();
        d_s_val = ls.d_loss.value();
        backward(add(lt.d_loss, ls.d_loss));
        opt_d.step(d_params);
      }

      // generator update with frozen discriminators
      for (Tensor& p : d_params) p.set_requires_grad(false);
      CycleLossBreakdown breakdown;
      {
        TapeScope scope(tape);
        std::vector<Tensor> gfake_t, gfake_s;
        for (const Tensor& x : batch_s) gfake_t.push_back(gen_g.forward(x));
        for (const Tensor& x : batch_t) gfake_s.push_back(gen_f.forward(x));

        std::vector<Tensor> adv_t, adv_s, cyc_terms_s, cyc_terms_t;
        for (const Tensor& fk : gfake_t) {
          Tensor s = d_target.forward(fk);
          adv_t.push_back(cfg.least_squares ? mse_to(s, 1.0)
                                            : mean_all(softplus(mul_scalar(s, -1.0))));
        }
        for (const Tensor& fk : gfake_s) {
          Tensor s = d_source.forward(fk);
          adv_s.push_back(cfg.least_squares ? mse_to(s, 1.0)
                                            : mean_all(softplus(mul_scalar(s, -1.0))));
        }
        for (size_t i = 0; i < batch_s.size(); ++i)
          cyc_terms_s.push_back(mean_all(abs_t(sub(gen_f.forward(gfake_t[i]), batch_s[i]))));
        for (size_t i = 0; i < batch_t.size(); ++i)
          cyc_terms_t.push_back(mean_all(abs_t(sub(gen_g.forward(gfake_s[i]), batch_t[i]))));

        Tensor gan_t = mean_over(adv_t);
        Tensor gan_s = mean_over(adv_s);
        Tensor cyc = add(mean_over(cyc_terms_s), mean_over(cyc_terms_t));
        Tensor total = add(add(gan_t, gan_s), mul_scalar(cyc, cfg.lambda_cyc));

        breakdown.gan_s_to_t = gan_t.value();
        breakdown.gan_t_to_s = gan_s.value();
        breakdown.cycle = cyc.value();
        breakdown.lambda = cfg.lambda_cyc;
        breakdown.total = total.value();

        backward(total);
        opt_g.step(g_params);
      }
      for (Tensor& p : d_params) p.set_requires_grad(true);

      if (step % cfg.log_every == 0 || step == cfg.steps - 1)
        result.trace.push_back({step, d_s_val, d_t_val, breakdown});
    } catch (const Error& e) {
      tape.clear();
      fail("train_cyclegan: aborted at step " + std::to_string(step) + ": " + e.what());
    }
  }
  return result;
}

Dataset translate_dataset(const GeneratorNet& g, const Dataset& source) {
  Dataset out;
  out.domain = Domain::adapted;
  out.height = source.height;
  out.width = source.width;
  for (const ImageSample& s : source.samples) {
    Tensor img = image_to_tensor(s, source.height, source.width);
    Tensor mapped = g.forward(img);
    ImageSample t;
    t.sample_id = s.sample_id;
    t.person_id = s.person_id;
    t.camera_id = s.camera_id;
    t.domain = Domain::adapted;
    t.pixels.resize(s.pixels.size());
    const int h = source.height, w = source.width;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c) {
          double v = mapped.at((c * h + y) * w + x);
          t.pixels[(static_cast<size_t>(y) * w + x) * 3 + c] =
              v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        }
    out.samples.push_back(std::move(t));
  }
  return out;
}

// ------------------------------------------------------------------- IO ---

void save_generator_pair(const std::string& path, const GeneratorNet& g,
                         const GeneratorNet& f) {
  std::vector<Tensor> all = g.parameters();
  all.insert(all.end(), f.parameters().begin(), f.parameters().end());
  const GanConfig& cfg = g.config();
  std::map<std::string, std::string> meta;
  meta["gan.in_h"] = std::to_string(cfg.in_h);
  meta["gan.in_w"] = std::to_string(cfg.in_w);
  meta["gan.gen_channels"] = std::to_string(cfg.gen_channels);
  meta["gan.res_blocks"] = std::to_string(cfg.res_blocks);
  save_checkpoint(path, all, meta);
}

struct GeneratorPairIO {
  static GeneratorNet rebuild(const GanConfig& cfg, const std::string& name,
                              const std::vector<Tensor>& tensors) {
    GeneratorNet net;
    net.cfg_ = cfg;
    net.name_ = name;
    const std::string prefix = name + ".";
    for (const Tensor& t : tensors)
      if (t.name().rfind(prefix, 0) == 0) net.params_.push_back(t);
    check(!net.params_.empty(), "checkpoint holds no parameters for generator " + name);
    return net;
  }
};

GeneratorPair load_generator_pair(const std::string& path) {
  CheckpointData data = load_checkpoint(path);
  for (Tensor& t : data.tensors) t.set_requires_grad(true);
  auto geti = [&](const std::string& key) {
    auto it = data.meta.find(key);
    check(it != data.meta.end(), "generator checkpoint missing metadata key " + key);
    return std::stoi(it->second);
  };
  GanConfig cfg;
  cfg.in_h = geti("gan.in_h");
  cfg.in_w = geti("gan.in_w");
  cfg.gen_channels = geti("gan.gen_channels");
  cfg.res_blocks = geti("gan.res_blocks");
  GeneratorPair pair{GeneratorPairIO::rebuild(cfg, "G", data.tensors),
                     GeneratorPairIO::rebuild(cfg, "F", data.tensors)};
  return pair;
}

}  // namespace reid
