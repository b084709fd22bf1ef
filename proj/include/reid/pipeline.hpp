#ifndef REID_PIPELINE_HPP_
#define REID_PIPELINE_HPP_

#include <string>
#include <utility>
#include <vector>

#include "reid/config.hpp"
#include "reid/evalcmc.hpp"

namespace reid {

struct StageRecord {
  std::string stage;
  std::string in_hash = "-";   // checkpoint the stage consumed
  std::string out_hash = "-";  // checkpoint the stage produced
  std::string config_hash;
  long wall_ms = 0;
  long audit_training_reads = 0;
  long audit_eval_reads = 0;
  std::vector<std::pair<std::string, std::string>> metrics;
  std::vector<std::string> artifacts;
};

// rejects unknown keys (typo guard); every stage calls this up front
void validate_config(const Config& cfg);

// One experiment directory at a fixed seed and scheduler arm. Stages read
// and write artifacts under the output directory; reruns with an identical
// config and seed reproduce identical metrics.
class Pipeline {
 public:
  explicit Pipeline(Config cfg);

  // generate-data | train-source | eval-direct | train-cyclegan | build-da |
  // train-da | pseudo-label | finetune | evaluate
  StageRecord run_stage(const std::string& stage);

  // the full staged workflow, in order, for this directory
  std::vector<StageRecord> run_all();

  const std::string& out_dir() const { return out_; }
  const Config& config() const { return cfg_; }

  static const std::vector<std::string>& stage_names();

 private:
  struct StageIO;
  StageRecord run_stage_impl(const std::string& stage);
  void append_manifest(const StageRecord& rec) const;

  Config cfg_;
  std::string out_;
  uint64_t seed_ = 1;
};

struct PipelineReport {
  // (method, arm, seed) -> result row
  struct Entry {
    std::string method;
    std::string arm;
    uint64_t seed;
    ResultRow row;
  };
  std::vector<Entry> entries;
};

// Multi-seed (and optionally dual scheduler-arm) orchestration; writes
// report.txt / report.json / results.tsv under the root output directory.
PipelineReport run_pipeline(const Config& cfg);

}  // namespace reid

#endif  // REID_PIPELINE_HPP_
