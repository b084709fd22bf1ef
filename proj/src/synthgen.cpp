#include "reid/synthgen.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "reid/binio.hpp"
#include "reid/error.hpp"
#include "reid/rng.hpp"

namespace fs = std::filesystem;

namespace reid {

const char* domain_name(Domain d) {
  switch (d) {
    case Domain::source: return "source";
    case Domain::target: return "target";
    case Domain::adapted: return "adapted";
  }
  return "?";
}

Domain domain_from_name(const std::string& name) {
  if (name == "source") return Domain::source;
  if (name == "target") return Domain::target;
  if (name == "adapted") return Domain::adapted;
  fail("unknown domain tag '" + name + "'");
}

void validate_spec(const DomainSpec& spec) {
  check(spec.num_identities > 0, "domain spec: num_identities must be positive");
  check(spec.instances_per_camera > 0, "domain spec: instances_per_camera must be positive");
  check(spec.num_cameras >= 2, "domain spec: num_cameras must be >= 2 (cross-view protocol)");
  check(spec.height >= 16 && spec.width >= 8, "domain spec: image too small");
  check(spec.noise_level >= 0.0, "domain spec: noise_level must be >= 0");
  check(spec.texture.cell >= 1, "domain spec: texture cell must be >= 1");
}

// ---------------------------------------------------------- label audit ---

namespace labelaudit {
namespace {
std::atomic<long> g_training_reads{0};
std::atomic<long> g_eval_reads{0};
thread_local int g_eval_depth = 0;
}  // namespace

long training_reads() { return g_training_reads.load(); }
long eval_reads() { return g_eval_reads.load(); }
void reset() { g_training_reads.store(0); g_eval_reads.store(0); }

EvalScope::EvalScope() { ++g_eval_depth; }
EvalScope::~EvalScope() { --g_eval_depth; }

namespace {
void count_read() {
  if (g_eval_depth > 0) ++g_eval_reads;
  else ++g_training_reads;
}
}  // namespace
}  // namespace labelaudit

int Dataset::true_person_id(int index) const {
  check(index >= 0 && index < static_cast<int>(samples.size()),
        "true_person_id: index out of range");
  check(labels_hidden(), "true_person_id: dataset has no hidden labels");
  labelaudit::count_read();
  return hidden_ids[static_cast<size_t>(index)];
}

int eval_person_id(const Dataset& ds, int index) {
  if (ds.labels_hidden()) return ds.true_person_id(index);
  return ds.samples[static_cast<size_t>(index)].person_id;
}

// ------------------------------------------------------------ rendering ---

namespace {

struct Figure {
  double head_color[3], torso_color[3], leg_color[3];
  int head_hw, torso_hw, leg_hw, leg_gap;
  int dy;        // vertical placement offset
  int torso_len; // extra torso rows
};

Figure make_figure(uint64_t seed, int person_id) {
  Rng rng(mix_seed(seed, 0xF160000ULL + static_cast<uint64_t>(person_id)));
  Figure f;
  for (int c = 0; c < 3; ++c) f.head_color[c] = rng.uniform(0.35, 0.85);
  for (int c = 0; c < 3; ++c) f.torso_color[c] = rng.uniform(0.10, 0.95);
  for (int c = 0; c < 3; ++c) f.leg_color[c] = rng.uniform(0.10, 0.95);
  f.head_hw = 2 + rng.below(3);     // 2..4
  f.torso_hw = 4 + rng.below(6);    // 4..9
  f.leg_hw = 2 + rng.below(2);      // 2..3
  f.leg_gap = 1 + rng.below(3);     // 1..3
  f.dy = rng.below(5);              // 0..4
  f.torso_len = rng.below(6);       // 0..5
  return f;
}

struct Placement {
  int dx, dy;
};

// fixed geometric shift per camera view
Placement camera_shift(int camera_id) {
  const int magnitude = 3 + 3 * (camera_id / 2);
  Placement p;
  p.dx = (camera_id % 2 == 0 ? -magnitude : magnitude);
  p.dy = 2 * (camera_id % 3);
  return p;
}

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

void fill_rect(std::vector<double>& px, int h, int w, int y0, int y1, int x0,
               int x1, const double* color) {
  y0 = std::max(y0, 0); x0 = std::max(x0, 0);
  y1 = std::min(y1, h); x1 = std::min(x1, w);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x)
      for (int c = 0; c < 3; ++c)
        px[(static_cast<size_t>(y) * w + x) * 3 + c] = color[c];
}

std::vector<double> render_sample(const DomainSpec& spec, const Figure& fig,
                                  int camera_id, Rng& img_rng) {
  const int h = spec.height, w = spec.width;
  std::vector<double> px(static_cast<size_t>(h) * w * 3);

  // background: vertical gradient, optionally with periodic grain
  double top[3], bot[3];
  for (int c = 0; c < 3; ++c) {
    top[c] = img_rng.uniform(0.40, 0.60);
    bot[c] = img_rng.uniform(0.30, 0.50);
  }
  const bool grain = spec.texture.kind == TextureSpec::Kind::granular;
  for (int y = 0; y < h; ++y) {
    const double t = static_cast<double>(y) / (h - 1);
    for (int x = 0; x < w; ++x) {
      double g = 0.0;
      if (grain) {
        const int cell = spec.texture.cell;
        g = ((x / cell + y / cell) % 2 == 0) ? spec.texture.amplitude
                                             : -spec.texture.amplitude;
      }
      for (int c = 0; c < 3; ++c)
        px[(static_cast<size_t>(y) * w + x) * 3 + c] =
            clamp01(top[c] + (bot[c] - top[c]) * t + g);
    }
  }

  // figure placement: camera shift plus per-instance jitter
  const Placement cam = camera_shift(camera_id);
  const int jx = img_rng.below(5) - 2;
  const int jy = img_rng.below(3) - 1;
  const int cx = w / 2 + cam.dx + jx;
  const int oy = fig.dy + cam.dy + jy;

  const int head_top = oy + h * 6 / 100;
  const int head_bot = oy + h * 17 / 100;
  const int torso_top = head_bot + 1;
  const int torso_bot = oy + h * 55 / 100 + fig.torso_len;
  const int leg_bot = oy + h * 92 / 100;

  fill_rect(px, h, w, head_top, head_bot, cx - fig.head_hw, cx + fig.head_hw + 1,
            fig.head_color);
  fill_rect(px, h, w, torso_top, torso_bot, cx - fig.torso_hw, cx + fig.torso_hw + 1,
            fig.torso_color);
  fill_rect(px, h, w, torso_bot, leg_bot, cx - fig.leg_gap - 2 * fig.leg_hw,
            cx - fig.leg_gap, fig.leg_color);
  fill_rect(px, h, w, torso_bot, leg_bot, cx + fig.leg_gap,
            cx + fig.leg_gap + 2 * fig.leg_hw, fig.leg_color);

  // domain shift: global color affine, then pixel noise
  for (size_t i = 0; i < px.size(); ++i) {
    const int c = static_cast<int>(i % 3);
    px[i] = clamp01(spec.palette.gain[c] * px[i] + spec.palette.bias[c]);
  }
  if (spec.noise_level > 0.0)
    for (double& v : px) v = clamp01(v + spec.noise_level * img_rng.normal());
  return px;
}

}  // namespace

Dataset generate_domain(const DomainSpec& spec, Domain domain, uint64_t seed) {
  validate_spec(spec);
  Dataset ds;
  ds.domain = domain;
  ds.height = spec.height;
  ds.width = spec.width;
  const bool hide = domain == Domain::target;
  int next_id = 0;
  for (int person = 0; person < spec.num_identities; ++person) {
    const Figure fig = make_figure(seed, person);
    for (int cam = 0; cam < spec.num_cameras; ++cam) {
      for (int inst = 0; inst < spec.instances_per_camera; ++inst) {
        const uint64_t tag =
            (static_cast<uint64_t>(person) * 64 + static_cast<uint64_t>(cam)) * 64 +
            static_cast<uint64_t>(inst);
        Rng img_rng(mix_seed(seed, 0xA0000000ULL + tag));
        ImageSample s;
        s.sample_id = next_id++;
        s.person_id = hide ? -1 : person;
        s.camera_id = cam;
        s.domain = domain;
        s.pixels = render_sample(spec, fig, cam, img_rng);
        ds.samples.push_back(std::move(s));
        if (hide) ds.hidden_ids.push_back(person);
      }
    }
  }
  return ds;
}

// ---------------------------------------------------------------- split ---

QueryGallerySplit split_query_gallery(const Dataset& ds, uint64_t seed) {
  // canonical grouping by (identity, camera), ordered by sample_id, so the
  // split is invariant to the order samples are stored in
  std::map<std::pair<int, int>, std::vector<int>> groups;
  std::map<int, std::set<int>> cameras_of;
  for (int i = 0; i < static_cast<int>(ds.samples.size()); ++i) {
    const int pid = eval_person_id(ds, i);
    const int cam = ds.samples[static_cast<size_t>(i)].camera_id;
    groups[{pid, cam}].push_back(i);
    cameras_of[pid].insert(cam);
  }
  for (const auto& [pid, cams] : cameras_of)
    check(cams.size() >= 2, "identity " + std::to_string(pid) +
                                " appears in only one camera; cross-view split impossible");
  for (auto& [key, idx] : groups)
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
      return ds.samples[static_cast<size_t>(a)].sample_id <
             ds.samples[static_cast<size_t>(b)].sample_id;
    });

  Rng rng(mix_seed(seed, 0x5917ULL));
  QueryGallerySplit split;
  for (auto& [key, idx] : groups) {
    const int pick = rng.below(static_cast<int>(idx.size()));
    for (int t = 0; t < static_cast<int>(idx.size()); ++t) {
      if (t == pick) split.query.push_back(idx[static_cast<size_t>(t)]);
      else split.gallery.push_back(idx[static_cast<size_t>(t)]);
    }
  }
  return split;
}

// ------------------------------------------------------------------- IO ---

void save_dataset(const std::string& dir, const Dataset& ds) {
  fs::create_directories(dir);
  std::ofstream manifest(fs::path(dir) / "manifest.tsv");
  check(static_cast<bool>(manifest), "cannot write manifest in " + dir);
  manifest << "# reid-dataset v1 domain=" << domain_name(ds.domain)
           << " height=" << ds.height << " width=" << ds.width << "\n";
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    const ImageSample& s = ds.samples[i];
    const int pid = ds.labels_hidden() ? ds.hidden_ids[i] : s.person_id;
    manifest << s.sample_id << "\t" << pid << "\t" << s.camera_id << "\t"
             << domain_name(s.domain) << "\n";
    std::ostringstream name;
    name << "sample_" << s.sample_id << ".bin";
    std::ofstream bin(fs::path(dir) / name.str(), std::ios::binary);
    check(static_cast<bool>(bin), "cannot write " + name.str() + " in " + dir);
    binio::write_u32(bin, 3);
    binio::write_u32(bin, static_cast<uint32_t>(ds.height));
    binio::write_u32(bin, static_cast<uint32_t>(ds.width));
    binio::write_u32(bin, 3);
    binio::write_f64(bin, s.pixels.data(), s.pixels.size());
    check(static_cast<bool>(bin), "short write for " + name.str());
  }
}

Dataset load_dataset(const std::string& dir) {
  std::ifstream manifest(fs::path(dir) / "manifest.tsv");
  check(static_cast<bool>(manifest), "cannot open manifest in " + dir);
  std::string header;
  std::getline(manifest, header);
  check(header.rfind("# reid-dataset v1", 0) == 0,
        "unrecognized dataset manifest header in " + dir);
  Dataset ds;
  {
    std::istringstream hs(header);
    std::string tok;
    while (hs >> tok) {
      if (tok.rfind("domain=", 0) == 0) ds.domain = domain_from_name(tok.substr(7));
      else if (tok.rfind("height=", 0) == 0) ds.height = std::stoi(tok.substr(7));
      else if (tok.rfind("width=", 0) == 0) ds.width = std::stoi(tok.substr(6));
    }
  }
  check(ds.height > 0 && ds.width > 0, "dataset header missing dimensions in " + dir);
  const bool hide = ds.domain == Domain::target;
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    ImageSample s;
    int pid;
    std::string dom;
    check(static_cast<bool>(ls >> s.sample_id >> pid >> s.camera_id >> dom),
          "malformed manifest line: " + line);
    s.domain = domain_from_name(dom);
    s.person_id = hide ? -1 : pid;
    std::ostringstream name;
    name << "sample_" << s.sample_id << ".bin";
    std::ifstream bin(fs::path(dir) / name.str(), std::ios::binary);
    check(static_cast<bool>(bin), "missing sample file " + name.str() + " in " + dir);
    const uint32_t ndim = binio::read_u32(bin, name.str());
    check(ndim == 3, "sample record must be rank 3 in " + name.str());
    const uint32_t h = binio::read_u32(bin, name.str());
    const uint32_t w = binio::read_u32(bin, name.str());
    const uint32_t c = binio::read_u32(bin, name.str());
    check(static_cast<int>(h) == ds.height && static_cast<int>(w) == ds.width && c == 3,
          "sample shape mismatch in " + name.str());
    s.pixels.resize(static_cast<size_t>(h) * w * c);
    binio::read_f64(bin, s.pixels.data(), s.pixels.size(), name.str());
    ds.samples.push_back(std::move(s));
    if (hide) ds.hidden_ids.push_back(pid);
  }
  check(!ds.samples.empty(), "dataset in " + dir + " has no samples");
  return ds;
}

// ------------------------------------------------------------ statistics --

std::vector<double> channel_histogram(const Dataset& ds, int bins) {
  check(bins > 0, "histogram: bins must be positive");
  std::vector<double> hist(static_cast<size_t>(3 * bins), 0.0);
  size_t count = 0;
  for (const ImageSample& s : ds.samples) {
    for (size_t i = 0; i < s.pixels.size(); ++i) {
      const int c = static_cast<int>(i % 3);
      int b = static_cast<int>(s.pixels[i] * bins);
      b = std::min(b, bins - 1);
      hist[static_cast<size_t>(c * bins + b)] += 1.0;
    }
    count += s.pixels.size() / 3;
  }
  for (double& v : hist) v /= static_cast<double>(count);
  return hist;
}

double histogram_distance(const std::vector<double>& a, const std::vector<double>& b) {
  check(a.size() == b.size(), "histogram_distance: size mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += std::fabs(a[i] - b[i]);
  return acc / 6.0;  // mean per-channel total-variation distance, in [0,1]
}

// --------------------------------------------------------------- presets --

DomainSpec default_source_spec() {
  DomainSpec spec;
  spec.num_identities = 40;
  spec.instances_per_camera = 4;
  spec.num_cameras = 2;
  spec.texture.kind = TextureSpec::Kind::smooth;
  spec.noise_level = 0.02;
  return spec;
}

DomainSpec default_target_spec() {
  DomainSpec spec = default_source_spec();
  spec.palette.gain[0] = 0.60; spec.palette.bias[0] = 0.25;
  spec.palette.gain[1] = 0.90; spec.palette.bias[1] = 0.05;
  spec.palette.gain[2] = 1.15; spec.palette.bias[2] = -0.03;
  spec.texture.kind = TextureSpec::Kind::granular;
  spec.texture.amplitude = 0.16;
  spec.texture.cell = 2;
  spec.noise_level = 0.02;
  return spec;
}

}  // namespace reid
