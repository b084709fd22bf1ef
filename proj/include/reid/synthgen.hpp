#ifndef REID_SYNTHGEN_HPP_
#define REID_SYNTHGEN_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace reid {

enum class Domain { source, target, adapted };

const char* domain_name(Domain d);
Domain domain_from_name(const std::string& name);

// One rendered person crop. Pixels are height*width*3 doubles in [0,1],
// row-major HWC. person_id is -1 for target-domain samples; the true label
// is quarantined inside the owning Dataset (see true_person_id below).
struct ImageSample {
  int sample_id = 0;
  int person_id = -1;
  int camera_id = 0;
  Domain domain = Domain::source;
  std::vector<double> pixels;
};

struct PaletteSpec {
  double gain[3] = {1.0, 1.0, 1.0};
  double bias[3] = {0.0, 0.0, 0.0};
};

struct TextureSpec {
  enum class Kind { smooth, granular };
  Kind kind = Kind::smooth;
  double amplitude = 0.0;  // grain strength, granular only
  int cell = 2;            // grain cell size in pixels
};

struct DomainSpec {
  int num_identities = 40;
  int instances_per_camera = 4;
  int num_cameras = 2;
  int height = 64;
  int width = 32;
  PaletteSpec palette;
  TextureSpec texture;
  double noise_level = 0.0;
};

void validate_spec(const DomainSpec& spec);

// Audit trail for reads of quarantined target labels. Reads made inside an
// EvalScope count as evaluation reads; everything else is a training read
// and must stay at zero across pipeline training stages.
namespace labelaudit {
long training_reads();
long eval_reads();
void reset();

class EvalScope {
 public:
  EvalScope();
  ~EvalScope();
  EvalScope(const EvalScope&) = delete;
  EvalScope& operator=(const EvalScope&) = delete;
};
}  // namespace labelaudit

struct Dataset {
  Domain domain = Domain::source;
  int height = 0;
  int width = 0;
  std::vector<ImageSample> samples;
  std::vector<int> hidden_ids;  // parallel to samples when labels are hidden

  bool labels_hidden() const { return !hidden_ids.empty(); }

  // Quarantined accessor for hidden target labels; every call is audited.
  int true_person_id(int index) const;
};

// Ground-truth identity for evaluation regardless of domain: visible label
// for source/adapted, audited vault read for target.
int eval_person_id(const Dataset& ds, int index);

// Deterministic in (spec, domain, seed): identical seeds give byte-identical
// pixel arrays. Identities are parametric figures; cameras apply a fixed
// geometric shift; the domain's palette/texture implement the domain shift.
Dataset generate_domain(const DomainSpec& spec, Domain domain, uint64_t seed);

struct QueryGallerySplit {
  std::vector<int> query;    // sample indices into the dataset
  std::vector<int> gallery;
};

// Cross-view protocol: per (identity, camera) one image becomes a query,
// the rest go to the gallery. Requires every identity in >= 2 cameras.
QueryGallerySplit split_query_gallery(const Dataset& ds, uint64_t seed);

// Directory layout: manifest.tsv (one line per sample) + one binary record
// per sample (shape header + raw float64 pixels).
void save_dataset(const std::string& dir, const Dataset& ds);
Dataset load_dataset(const std::string& dir);

// Per-channel pixel histograms, used for the domain-shift check and the
// adapted-dataset similarity metric.
std::vector<double> channel_histogram(const Dataset& ds, int bins);
double histogram_distance(const std::vector<double>& a, const std::vector<double>& b);

// Default source/target scenario used by the pipeline and tests: shared
// identity family, target shifted by color palette + granular background.
DomainSpec default_source_spec();
DomainSpec default_target_spec();

}  // namespace reid

#endif  // REID_SYNTHGEN_HPP_
