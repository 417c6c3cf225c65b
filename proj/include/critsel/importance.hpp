#ifndef CRITSEL_IMPORTANCE_HPP
#define CRITSEL_IMPORTANCE_HPP

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "critsel/dataset.hpp"
#include "critsel/graph_heat.hpp"
#include "critsel/semantics.hpp"

namespace critsel {

// Proximity graph over one image's annotations: W(i, j) = 1 / max(d, 1)
// for i != j with d the minimum inter-box distance, zero diagonal. All
// off-diagonal weights are in (0, 1] and W is symmetric.
struct ObjectGraph {
  Eigen::MatrixXd adjacency;

  Eigen::Index size() const { return adjacency.rows(); }
};

struct HeatKernel {
  double time = 1.0;
  Eigen::MatrixXd matrix;  // symmetric; identity at time 0
};

struct ImportanceEntry {
  std::int64_t annotation_id = 0;
  double object_score = 0.0;      // pre-propagation, area-distributed
  double propagated_score = 0.0;  // post-diffusion, sums to 1 per image
};

// Skip reasons for images that cannot be scored.
inline constexpr const char* kSkipNoCategoryImportance = "no-category-importance";
inline constexpr const char* kSkipNoAnnotations = "no-annotations";

struct ImportanceRecord {
  std::int64_t image_id = 0;
  bool skipped = false;
  std::string reason;                     // set only when skipped
  std::vector<ImportanceEntry> entries;   // ordered by annotation id
};

struct SelectionConfig {
  double threshold = 0.0;  // T in [0, 1)
  double heat_time = 1.0;  // t >= 0
};

// Spreads each category's typicality over that category's annotations in
// proportion to box area; annotations of unmentioned categories get 0.
Eigen::VectorXd distribute(const TypicalityScores& scores,
                           const std::vector<const Annotation*>& annotations);

ObjectGraph build_graph(const std::vector<const Annotation*>& annotations);

// Spectral heat filter of the graph's combinatorial Laplacian with
// eigenvalues scaled by the largest one. time >= 0.
HeatKernel heat_kernel(const ObjectGraph& graph, double time);

// Diffuses object scores through the kernel, clamps float-noise negatives
// to zero, and normalizes to unit sum. Empty when the diffused mass is
// zero (the caller emits a skip record).
std::optional<Eigen::VectorXd> propagate(const Eigen::VectorXd& object_scores,
                                         const HeatKernel& kernel);

// Full per-image pipeline: typicality -> distribute -> graph -> kernel ->
// propagate. Emits a skip record when the image has no annotations or no
// category receives importance.
ImportanceRecord score_image(const Dataset& ds, const ConceptMap& cmap,
                             const SelectionConfig& cfg, std::int64_t image_id);

// Scores every image in the dataset; records ordered by image id. Scoring
// is pure per image, so jobs > 1 splits images across threads and merges
// deterministically.
std::vector<ImportanceRecord> score_dataset(const Dataset& ds, const ConceptMap& cmap,
                                            const SelectionConfig& cfg, int jobs = 1);

// Annotation ids with propagated score strictly above the threshold;
// empty for skipped records.
std::set<std::int64_t> select(const ImportanceRecord& record, double threshold);

// Importance file: JSON array of records sorted by image id, scores by
// annotation id.
void write_importance(const std::vector<ImportanceRecord>& records,
                      const std::string& path);
std::vector<ImportanceRecord> load_importance(const std::string& path);

// Number of annotations selected at the threshold across all records.
std::size_t selected_count(const std::vector<ImportanceRecord>& records,
                           double threshold);

// Fraction of the dataset's annotations not selected at the threshold;
// skipped images contribute all their annotations as removed.
double removal_fraction(const std::vector<ImportanceRecord>& records, double threshold,
                        std::size_t total_annotations);

}  // namespace critsel

#endif  // CRITSEL_IMPORTANCE_HPP
