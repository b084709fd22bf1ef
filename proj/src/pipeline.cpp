#include "reid/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "reid/alignednet.hpp"
#include "reid/cyclemap.hpp"
#include "reid/error.hpp"
#include "reid/hash.hpp"
#include "reid/kernels.hpp"
#include "reid/pseudolabel.hpp"
#include "reid/synthgen.hpp"
#include "reid/training.hpp"

namespace fs = std::filesystem;

namespace reid {

namespace {

const std::set<std::string> kKnownKeys = {
    "seed", "out",
    "run.seeds", "run.scheduler_arms",
    "data.identities", "data.cameras", "data.instances", "data.noise",
    "data.height", "data.width",
    "data.shift.gain", "data.shift.bias", "data.shift.texture",
    "data.shift.amplitude", "data.shift.cell",
    "model.channels", "model.margin", "model.stripe_eps",
    "train.source_epochs", "train.da_epochs", "train.finetune_epochs",
    "train.lr", "train.momentum", "train.use_id_loss", "train.use_local_loss",
    "train.lr_decay", "train.lr_decay_factor",
    "sched.enabled", "sched.n_instances", "sched.initial_identities", "sched.max_batch",
    "cyclegan.lambda", "cyclegan.steps", "cyclegan.batch", "cyclegan.lr",
    "cyclegan.momentum", "cyclegan.channels", "cyclegan.disc_channels",
    "cyclegan.res_blocks", "cyclegan.objective", "cyclegan.log_every",
    "cluster.k", "cluster.k_divisor", "cluster.max_iters",
    "eval.model", "eval.distance",
    "threads.parallel",
};

std::string fmt2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return std::string(buf);
}

std::string fmt4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return std::string(buf);
}

std::string file_hash(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  check(static_cast<bool>(is), "cannot hash missing file: " + path.string());
  uint64_t h = 0xcbf29ce484222325ULL;
  char buf[8192];
  while (is.read(buf, sizeof(buf)) || is.gcount() > 0)
    h = fnv1a64(buf, static_cast<size_t>(is.gcount()), h);
  return hash_hex(h);
}

DomainSpec spec_common(const Config& cfg) {
  DomainSpec spec;
  spec.num_identities = cfg.get_int("data.identities", 40);
  spec.instances_per_camera = cfg.get_int("data.instances", 4);
  spec.num_cameras = cfg.get_int("data.cameras", 2);
  spec.height = cfg.get_int("data.height", 64);
  spec.width = cfg.get_int("data.width", 32);
  spec.noise_level = cfg.get_double("data.noise", 0.02);
  return spec;
}

DomainSpec source_spec_from(const Config& cfg) {
  DomainSpec spec = spec_common(cfg);
  spec.texture.kind = TextureSpec::Kind::smooth;
  return spec;
}

DomainSpec target_spec_from(const Config& cfg) {
  DomainSpec spec = spec_common(cfg);
  const DomainSpec def = default_target_spec();
  auto gain = cfg.get_double_list("data.shift.gain",
                                  {def.palette.gain[0], def.palette.gain[1], def.palette.gain[2]});
  auto bias = cfg.get_double_list("data.shift.bias",
                                  {def.palette.bias[0], def.palette.bias[1], def.palette.bias[2]});
  check(gain.size() == 3 && bias.size() == 3,
        "config: data.shift.gain/bias expect 3 values each");
  for (int c = 0; c < 3; ++c) {
    spec.palette.gain[c] = gain[static_cast<size_t>(c)];
    spec.palette.bias[c] = bias[static_cast<size_t>(c)];
  }
  const std::string texture = cfg.get_string("data.shift.texture", "granular");
  if (texture == "granular") spec.texture.kind = TextureSpec::Kind::granular;
  else if (texture == "smooth") spec.texture.kind = TextureSpec::Kind::smooth;
  else fail("config: data.shift.texture must be granular or smooth, got '" + texture + "'");
  spec.texture.amplitude = cfg.get_double("data.shift.amplitude", def.texture.amplitude);
  spec.texture.cell = cfg.get_int("data.shift.cell", def.texture.cell);
  return spec;
}

NetConfig net_config_from(const Config& cfg, int num_classes) {
  NetConfig nc;
  nc.in_h = cfg.get_int("data.height", 64);
  nc.in_w = cfg.get_int("data.width", 32);
  auto ch = cfg.get_int_list("model.channels", {16, 32, 64});
  check(ch.size() == 3, "config: model.channels expects 3 values");
  nc.channels = {ch[0], ch[1], ch[2]};
  nc.num_classes = num_classes;
  nc.stripe_eps = cfg.get_double("model.stripe_eps", 1e-12);
  return nc;
}

TrainOptions train_options_from(const Config& cfg, const std::string& epochs_key,
                                int default_epochs, uint64_t seed) {
  TrainOptions opt;
  opt.epochs = cfg.get_int(epochs_key, default_epochs);
  opt.learning_rate = cfg.get_double("train.lr", 0.02);
  opt.momentum = cfg.get_double("train.momentum", 0.9);
  opt.margin = cfg.get_double("model.margin", 0.3);
  opt.n_instances = cfg.get_int("sched.n_instances", 4);
  opt.initial_identities = cfg.get_int("sched.initial_identities", 2);
  opt.scheduler_enabled = cfg.get_bool("sched.enabled", true);
  opt.max_batch_size = cfg.get_int("sched.max_batch", 88);
  opt.use_id_loss = cfg.get_bool("train.use_id_loss", true);
  opt.use_local_loss = cfg.get_bool("train.use_local_loss", true);
  opt.lr_decay = cfg.get_bool("train.lr_decay", false);
  opt.lr_decay_factor = cfg.get_double("train.lr_decay_factor", 0.95);
  opt.seed = seed;
  return opt;
}

GanConfig gan_config_from(const Config& cfg) {
  GanConfig gc;
  gc.in_h = cfg.get_int("data.height", 64);
  gc.in_w = cfg.get_int("data.width", 32);
  gc.gen_channels = cfg.get_int("cyclegan.channels", 8);
  gc.disc_channels = cfg.get_int("cyclegan.disc_channels", 8);
  gc.res_blocks = cfg.get_int("cyclegan.res_blocks", 2);
  gc.lambda_cyc = cfg.get_double("cyclegan.lambda", 10.0);
  gc.steps = cfg.get_int("cyclegan.steps", 2000);
  gc.batch_per_domain = cfg.get_int("cyclegan.batch", 1);
  gc.learning_rate = cfg.get_double("cyclegan.lr", 0.02);
  gc.momentum = cfg.get_double("cyclegan.momentum", 0.5);
  gc.log_every = cfg.get_int("cyclegan.log_every", 50);
  const std::string obj = cfg.get_string("cyclegan.objective", "least_squares");
  if (obj == "least_squares") gc.least_squares = true;
  else if (obj == "cross_entropy") gc.least_squares = false;
  else fail("config: cyclegan.objective must be least_squares or cross_entropy");
  return gc;
}

ClusterConfig cluster_config_from(const Config& cfg, uint64_t seed) {
  ClusterConfig cc;
  cc.k_per_camera = cfg.get_int("cluster.k", 0);
  cc.k_divisor = cfg.get_int("cluster.k_divisor", 4);
  cc.max_kmeans_iters = cfg.get_int("cluster.max_iters", 100);
  cc.seed = seed;
  return cc;
}

EvalDistance eval_distance_from(const Config& cfg) {
  const std::string d = cfg.get_string("eval.distance", "global");
  if (d == "global") return EvalDistance::global_only;
  if (d == "global+dmli") return EvalDistance::global_plus_dmli;
  fail("config: eval.distance must be global or global+dmli, got '" + d + "'");
}

}  // namespace

void validate_config(const Config& cfg) {
  for (const auto& [key, value] : cfg.entries())
    check(kKnownKeys.count(key) > 0, "config: unknown key '" + key + "'");
}

// ------------------------------------------------------------- pipeline ---

struct Pipeline::StageIO {
  fs::path root;
  fs::path data_source() const { return root / "data" / "source"; }
  fs::path data_target() const { return root / "data" / "target"; }
  fs::path data_adapted() const { return root / "data" / "adapted"; }
  fs::path ckpt_source() const { return root / "ckpt" / "source.ckpt"; }
  fs::path ckpt_cyclegan() const { return root / "ckpt" / "cyclegan.ckpt"; }
  fs::path ckpt_da() const { return root / "ckpt" / "da.ckpt"; }
  fs::path ckpt_finetuned() const { return root / "ckpt" / "finetuned.ckpt"; }
  fs::path pseudo_map() const { return root / "pseudo_labels.tsv"; }
  fs::path trace(const std::string& name) const { return root / "traces" / (name + ".tsv"); }
  fs::path result(const std::string& tag) const { return root / "results" / (tag + ".tsv"); }
  fs::path manifest() const { return root / "manifest.tsv"; }

  void require(const fs::path& p, const std::string& stage, const std::string& producer) const {
    check(fs::exists(p), "stage '" + stage + "' requires " + p.string() +
                             ", produced by stage '" + producer + "'; run that stage first");
  }
};

const std::vector<std::string>& Pipeline::stage_names() {
  static const std::vector<std::string> names = {
      "generate-data", "train-source", "eval-direct", "train-cyclegan",
      "build-da",      "train-da",     "pseudo-label", "finetune",
      "evaluate"};
  return names;
}

Pipeline::Pipeline(Config cfg) : cfg_(std::move(cfg)) {
  validate_config(cfg_);
  out_ = cfg_.get_string("out", "runs/default");
  seed_ = cfg_.get_u64("seed", 1);
  kernels::set_parallel(cfg_.get_bool("threads.parallel", true));
}

namespace {

void write_train_trace(const fs::path& path, const TrainResult& result) {
  fs::create_directories(path.parent_path());
  std::ofstream os(path);
  check(static_cast<bool>(os), "cannot write trace: " + path.string());
  os << "epoch\tbatch_size\tglobal_triplet\ttotal\tembed_norm\tnoise_scale\n";
  for (const EpochStats& e : result.trace)
    os << e.epoch << "\t" << e.batch_size << "\t" << fmt4(e.mean_global_triplet) << "\t"
       << fmt4(e.mean_total) << "\t" << fmt4(e.mean_embed_norm) << "\t"
       << fmt4(e.noise) << "\n";
}

void write_result_file(const fs::path& path, const ResultRow& row) {
  fs::create_directories(path.parent_path());
  std::ofstream os(path);
  check(static_cast<bool>(os), "cannot write result: " + path.string());
  os << "# method\tsource\ttarget\trank1\trank5\trank10\n";
  os << format_result_row(row) << "\n";
}

}  // namespace

StageRecord Pipeline::run_stage(const std::string& stage) {
  const long train_before = labelaudit::training_reads();
  const long eval_before = labelaudit::eval_reads();
  const auto t0 = std::chrono::steady_clock::now();

  StageRecord rec = run_stage_impl(stage);

  const auto t1 = std::chrono::steady_clock::now();
  rec.stage = stage;
  rec.config_hash = hash_hex(cfg_.hash());
  rec.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
  rec.audit_training_reads = labelaudit::training_reads() - train_before;
  rec.audit_eval_reads = labelaudit::eval_reads() - eval_before;
  append_manifest(rec);
  return rec;
}

StageRecord Pipeline::run_stage_impl(const std::string& stage) {
  StageIO io{fs::path(out_)};
  fs::create_directories(io.root);
  StageRecord rec;

  if (stage == "generate-data") {
    Dataset src = generate_domain(source_spec_from(cfg_), Domain::source, mix_seed(seed_, 11));
    Dataset tgt = generate_domain(target_spec_from(cfg_), Domain::target, mix_seed(seed_, 22));
    save_dataset(io.data_source().string(), src);
    save_dataset(io.data_target().string(), tgt);
    const double shift = histogram_distance(channel_histogram(src, 16),
                                            channel_histogram(tgt, 16));
    rec.metrics = {{"source_samples", std::to_string(src.samples.size())},
                   {"target_samples", std::to_string(tgt.samples.size())},
                   {"domain_histogram_distance", fmt4(shift)}};
    rec.artifacts = {io.data_source().string(), io.data_target().string()};
    return rec;
  }

  if (stage == "train-source") {
    io.require(io.data_source() / "manifest.tsv", stage, "generate-data");
    Dataset src = load_dataset(io.data_source().string());
    LabeledDataset lab = bind_labels(src);
    AlignedNet model(net_config_from(cfg_, lab.num_classes), mix_seed(seed_, 31));
    TrainOptions opt = train_options_from(cfg_, "train.source_epochs", 30, mix_seed(seed_, 32));
    TrainResult result = train_reid(model, lab, opt);
    write_train_trace(io.trace("train_source"), result);
    fs::create_directories(io.ckpt_source().parent_path());
    model.save(io.ckpt_source().string(),
               {{"train.stage", stage},
                {"train.seed", std::to_string(seed_)},
                {"train.epochs", std::to_string(result.trace.size())},
                {"train.final_batch", std::to_string(result.trace.back().batch_size)},
                {"train.final_loss", fmt4(result.trace.back().mean_global_triplet)}});
    rec.out_hash = file_hash(io.ckpt_source());
    rec.metrics = {{"final_global_triplet", fmt4(result.trace.back().mean_global_triplet)},
                   {"final_batch_size", std::to_string(result.trace.back().batch_size)},
                   {"collapsed", result.collapsed ? "1" : "0"}};
    rec.artifacts = {io.ckpt_source().string(), io.trace("train_source").string()};
    return rec;
  }

  if (stage == "train-cyclegan") {
    io.require(io.data_source() / "manifest.tsv", stage, "generate-data");
    io.require(io.data_target() / "manifest.tsv", stage, "generate-data");
    Dataset src = load_dataset(io.data_source().string());
    Dataset tgt = load_dataset(io.data_target().string());
    CycleGanResult result = train_cyclegan(src, tgt, gan_config_from(cfg_), mix_seed(seed_, 41));
    fs::create_directories(io.ckpt_cyclegan().parent_path());
    save_generator_pair(io.ckpt_cyclegan().string(), result.source_to_target,
                        result.target_to_source);
    fs::create_directories(io.trace("cyclegan").parent_path());
    std::ofstream trace(io.trace("cyclegan"));
    trace << "step\td_source\td_target\tgan_s2t\tgan_t2s\tcycle\ttotal\n";
    for (const CycleGanTraceRow& r : result.trace)
      trace << r.step << "\t" << fmt4(r.d_source) << "\t" << fmt4(r.d_target) << "\t"
            << fmt4(r.gen.gan_s_to_t) << "\t" << fmt4(r.gen.gan_t_to_s) << "\t"
            << fmt4(r.gen.cycle) << "\t" << fmt4(r.gen.total) << "\n";
    rec.out_hash = file_hash(io.ckpt_cyclegan());
    rec.metrics = {{"initial_cycle", fmt4(result.trace.front().gen.cycle)},
                   {"final_cycle", fmt4(result.trace.back().gen.cycle)}};
    rec.artifacts = {io.ckpt_cyclegan().string(), io.trace("cyclegan").string()};
    return rec;
  }

  if (stage == "build-da") {
    io.require(io.ckpt_cyclegan(), stage, "train-cyclegan");
    io.require(io.data_source() / "manifest.tsv", stage, "generate-data");
    io.require(io.data_target() / "manifest.tsv", stage, "generate-data");
    GeneratorPair pair = load_generator_pair(io.ckpt_cyclegan().string());
    Dataset src = load_dataset(io.data_source().string());
    Dataset tgt = load_dataset(io.data_target().string());
    Dataset adapted = translate_dataset(pair.g, src);
    save_dataset(io.data_adapted().string(), adapted);
    const auto h_src = channel_histogram(src, 16);
    const auto h_tgt = channel_histogram(tgt, 16);
    const auto h_da = channel_histogram(adapted, 16);
    rec.in_hash = file_hash(io.ckpt_cyclegan());
    rec.metrics = {{"source_to_target_hist", fmt4(histogram_distance(h_src, h_tgt))},
                   {"adapted_to_target_hist", fmt4(histogram_distance(h_da, h_tgt))}};
    rec.artifacts = {io.data_adapted().string()};
    return rec;
  }

  if (stage == "train-da") {
    io.require(io.data_adapted() / "manifest.tsv", stage, "build-da");
    io.require(io.ckpt_source(), stage, "train-source");
    Dataset adapted = load_dataset(io.data_adapted().string());
    LabeledDataset lab = bind_labels(adapted);
    AlignedNet model = AlignedNet::load(io.ckpt_source().string());
    check(model.config().num_classes == lab.num_classes,
          "train-da: adapted dataset identity count does not match the source head");
    TrainOptions opt = train_options_from(cfg_, "train.da_epochs", 15, mix_seed(seed_, 51));
    TrainResult result = train_reid(model, lab, opt);
    write_train_trace(io.trace("train_da"), result);
    model.save(io.ckpt_da().string(),
               {{"train.stage", stage}, {"train.seed", std::to_string(seed_)}});
    rec.in_hash = file_hash(io.ckpt_source());
    rec.out_hash = file_hash(io.ckpt_da());
    rec.metrics = {{"final_global_triplet", fmt4(result.trace.back().mean_global_triplet)}};
    rec.artifacts = {io.ckpt_da().string(), io.trace("train_da").string()};
    return rec;
  }

  if (stage == "pseudo-label") {
    io.require(io.data_target() / "manifest.tsv", stage, "generate-data");
    io.require(io.ckpt_da(), stage, "train-da");
    Dataset tgt = load_dataset(io.data_target().string());
    AlignedNet model = AlignedNet::load(io.ckpt_da().string());
    Matrix feats = extract_features(model, tgt);
    std::vector<int> cams;
    for (const ImageSample& s : tgt.samples) cams.push_back(s.camera_id);
    std::vector<CameraClusters> clusters =
        per_camera_kmeans(feats, cams, cluster_config_from(cfg_, mix_seed(seed_, 61)));
    PseudoLabelMap map = cross_view_merge(clusters);
    save_pseudo_map(io.pseudo_map().string(), map, tgt, clusters);
    // noise diagnostics are evaluation-only reads of the hidden labels
    PseudoNoise noise = pseudo_label_noise(tgt, map);
    rec.in_hash = file_hash(io.ckpt_da());
    rec.metrics = {{"k_per_camera", std::to_string(clusters.front().run.centroids.rows)},
                   {"pseudo_identities", std::to_string(map.merge_table.size())},
                   {"pair_precision", fmt4(noise.pair_precision)},
                   {"pair_recall", fmt4(noise.pair_recall)}};
    rec.artifacts = {io.pseudo_map().string()};
    return rec;
  }

  if (stage == "finetune") {
    io.require(io.data_target() / "manifest.tsv", stage, "generate-data");
    io.require(io.pseudo_map(), stage, "pseudo-label");
    io.require(io.ckpt_da(), stage, "train-da");
    Dataset tgt = load_dataset(io.data_target().string());
    PseudoLabelMap map =
        load_pseudo_map(io.pseudo_map().string(), static_cast<int>(tgt.samples.size()));
    LabeledDataset lab = build_pseudo_dataset(tgt, map);
    AlignedNet da_model = AlignedNet::load(io.ckpt_da().string());
    NetConfig nc = da_model.config();
    nc.num_classes = lab.num_classes;
    AlignedNet model(nc, mix_seed(seed_, 71));
    model.warm_start_from(da_model);
    TrainOptions opt = train_options_from(cfg_, "train.finetune_epochs", 15, mix_seed(seed_, 72));
    TrainResult result = train_reid(model, lab, opt);
    write_train_trace(io.trace("finetune"), result);
    model.save(io.ckpt_finetuned().string(),
               {{"train.stage", stage}, {"train.seed", std::to_string(seed_)}});
    rec.in_hash = file_hash(io.ckpt_da());
    rec.out_hash = file_hash(io.ckpt_finetuned());
    rec.metrics = {{"final_global_triplet", fmt4(result.trace.back().mean_global_triplet)},
                   {"pseudo_classes", std::to_string(lab.num_classes)}};
    rec.artifacts = {io.ckpt_finetuned().string(), io.trace("finetune").string()};
    return rec;
  }

  if (stage == "eval-direct" || stage == "evaluate") {
    std::string kind = stage == "eval-direct" ? "source" : cfg_.get_string("eval.model", "finetuned");
    fs::path ckpt;
    std::string method, tag, producer;
    if (kind == "source") { ckpt = io.ckpt_source(); method = "Direct"; tag = "direct"; producer = "train-source"; }
    else if (kind == "da") { ckpt = io.ckpt_da(); method = "CycleGAN"; tag = "cyclegan"; producer = "train-da"; }
    else if (kind == "finetuned") { ckpt = io.ckpt_finetuned(); method = "Ours"; tag = "ours"; producer = "finetune"; }
    else fail("config: eval.model must be source, da or finetuned, got '" + kind + "'");
    io.require(io.data_target() / "manifest.tsv", stage, "generate-data");
    io.require(ckpt, stage, producer);

    Dataset tgt = load_dataset(io.data_target().string());
    AlignedNet model = AlignedNet::load(ckpt.string());
    labelaudit::EvalScope scope;
    QueryGallerySplit split = split_query_gallery(tgt, mix_seed(seed_, 77));
    CmcCurve curve = cmc_evaluate(model, tgt, split, eval_distance_from(cfg_));
    ResultRow row{method, "source", "target", 100.0 * curve.at_rank(1),
                  100.0 * curve.at_rank(5), 100.0 * curve.at_rank(10)};
    write_result_file(io.result(tag), row);
    rec.in_hash = file_hash(ckpt);
    rec.metrics = {{"method", method},
                   {"rank1", fmt2(row.rank1)},
                   {"rank5", fmt2(row.rank5)},
                   {"rank10", fmt2(row.rank10)},
                   {"queries", std::to_string(curve.num_queries)}};
    rec.artifacts = {io.result(tag).string()};
    return rec;
  }

  fail("unknown stage '" + stage + "'; expected one of: generate-data, train-source, "
       "eval-direct, train-cyclegan, build-da, train-da, pseudo-label, finetune, evaluate");
}

void Pipeline::append_manifest(const StageRecord& rec) const {
  StageIO io{fs::path(out_)};
  std::ofstream os(io.manifest(), std::ios::app);
  check(static_cast<bool>(os), "cannot append manifest: " + io.manifest().string());
  std::ostringstream metrics;
  for (size_t i = 0; i < rec.metrics.size(); ++i) {
    if (i) metrics << ";";
    metrics << rec.metrics[i].first << "=" << rec.metrics[i].second;
  }
  std::ostringstream artifacts;
  for (size_t i = 0; i < rec.artifacts.size(); ++i) {
    if (i) artifacts << ";";
    artifacts << rec.artifacts[i];
  }
  os << rec.stage << "\t" << rec.in_hash << "\t" << rec.out_hash << "\t"
     << rec.config_hash << "\t" << rec.wall_ms << "\t" << rec.audit_training_reads
     << "\t" << rec.audit_eval_reads << "\t" << metrics.str() << "\t"
     << artifacts.str() << "\n";
}

std::vector<StageRecord> Pipeline::run_all() {
  StageIO io{fs::path(out_)};
  fs::create_directories(io.root);
  std::ofstream truncate(io.manifest(), std::ios::trunc);
  truncate.close();

  std::vector<StageRecord> records;
  records.push_back(run_stage("generate-data"));
  records.push_back(run_stage("train-source"));
  records.push_back(run_stage("eval-direct"));
  records.push_back(run_stage("train-cyclegan"));
  records.push_back(run_stage("build-da"));
  records.push_back(run_stage("train-da"));
  cfg_.set("eval.model", "da");
  records.push_back(run_stage("evaluate"));
  records.push_back(run_stage("pseudo-label"));
  records.push_back(run_stage("finetune"));
  cfg_.set("eval.model", "finetuned");
  records.push_back(run_stage("evaluate"));
  return records;
}

// ------------------------------------------------------------ run_pipeline

namespace {

struct Aggregate {
  std::vector<double> values;
  double mean() const {
    double acc = 0.0;
    for (double v : values) acc += v;
    return values.empty() ? 0.0 : acc / static_cast<double>(values.size());
  }
  double min() const {
    double m = values.front();
    for (double v : values) m = std::min(m, v);
    return m;
  }
  double max() const {
    double m = values.front();
    for (double v : values) m = std::max(m, v);
    return m;
  }
};

}  // namespace

PipelineReport run_pipeline(const Config& cfg) {
  validate_config(cfg);
  const fs::path root(cfg.get_string("out", "runs/default"));
  fs::create_directories(root);

  std::vector<uint64_t> seeds =
      cfg.get_u64_list("run.seeds", {cfg.get_u64("seed", 1)});
  check(!seeds.empty(), "config: run.seeds must not be empty");

  const std::string arms_mode = cfg.get_string("run.scheduler_arms", "on");
  std::vector<std::pair<std::string, bool>> arms;
  if (arms_mode == "on") arms = {{"sched", true}};
  else if (arms_mode == "off") arms = {{"nosched", false}};
  else if (arms_mode == "both") arms = {{"nosched", false}, {"sched", true}};
  else fail("config: run.scheduler_arms must be on, off or both, got '" + arms_mode + "'");

  PipelineReport report;
  for (uint64_t seed : seeds) {
    for (const auto& [arm_name, sched_on] : arms) {
      Config sub = cfg;
      sub.set("seed", std::to_string(seed));
      sub.set("sched.enabled", sched_on ? "true" : "false");
      fs::path dir = root / ("seed_" + std::to_string(seed));
      if (arms.size() > 1) dir /= "arm_" + arm_name;
      sub.set("out", dir.string());
      Pipeline pipeline(std::move(sub));
      pipeline.run_all();
      for (const char* tag : {"direct", "cyclegan", "ours"}) {
        std::ifstream is(dir / "results" / (std::string(tag) + ".tsv"));
        check(static_cast<bool>(is), "pipeline did not produce results/" + std::string(tag) + ".tsv");
        std::string line;
        std::getline(is, line);  // header
        std::getline(is, line);
        ResultRow row = parse_result_row(line);
        report.entries.push_back({row.method, arm_name, seed, row});
      }
    }
  }

  // line-oriented results for diffing
  {
    std::ofstream os(root / "results.tsv");
    os << "# arm\tseed\tmethod\tsource\ttarget\trank1\trank5\trank10\n";
    for (const auto& e : report.entries)
      os << e.arm << "\t" << e.seed << "\t" << format_result_row(e.row) << "\n";
  }

  // aggregated report, deterministic formatting
  const std::vector<std::string> methods = {"Direct", "CycleGAN", "Ours"};
  nlohmann::json json;
  json["config_hash"] = hash_hex(cfg.hash());
  json["seeds"] = seeds;
  std::ostringstream txt;
  txt << "CMC rank accuracy on target domain (percent)\n";
  txt << "seeds:";
  for (uint64_t s : seeds) txt << " " << s;
  txt << "\n\n";
  for (const auto& [arm_name, sched_on] : arms) {
    txt << "[" << (sched_on ? "with batch scheduler" : "without batch scheduler") << "]\n";
    char header[128];
    std::snprintf(header, sizeof(header), "%-10s %18s %18s %18s\n", "method",
                  "rank1 mean(range)", "rank5 mean", "rank10 mean");
    txt << header;
    for (const std::string& method : methods) {
      Aggregate r1, r5, r10;
      for (const auto& e : report.entries) {
        if (e.arm != arm_name || e.row.method != method) continue;
        r1.values.push_back(e.row.rank1);
        r5.values.push_back(e.row.rank5);
        r10.values.push_back(e.row.rank10);
      }
      if (r1.values.empty()) continue;
      char line[256];
      std::snprintf(line, sizeof(line), "%-10s %8.2f (%5.2f..%5.2f) %12.2f %18.2f\n",
                    method.c_str(), r1.mean(), r1.min(), r1.max(), r5.mean(), r10.mean());
      txt << line;
      auto& obj = json["methods"][method][arm_name];
      obj["rank1_per_seed"] = r1.values;
      obj["rank1_mean"] = r1.mean();
      obj["rank1_min"] = r1.min();
      obj["rank1_max"] = r1.max();
      obj["rank5_mean"] = r5.mean();
      obj["rank10_mean"] = r10.mean();
    }
    txt << "\n";
  }
  {
    std::ofstream os(root / "report.txt");
    os << txt.str();
  }
  {
    std::ofstream os(root / "report.json");
    os << json.dump(2) << "\n";
  }
  return report;
}

}  // namespace reid
