// Core domain types for Dawid-Skene label aggregation.
//
// Conventions used throughout the library:
//   * Class labels, item ids and annotator ids are 1-based wherever they
//     appear in a Response, a file, or a user-facing message.
//   * Algorithm entry points index annotators and items 0-based, since they
//     address rows of std::vector / Eigen containers.
//   * Confusion matrix entry (j, k) is Pr(response = j | truth = k), so every
//     column is a conditional PMF.

#ifndef CROWDPAIR_DATA_MODEL_H_
#define CROWDPAIR_DATA_MODEL_H_

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace crowdpair {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Every recoverable failure in the library is reported with this type. The
// message is prefixed with the module that raised it ("multispa: ...").
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kSimplexTolerance = 1e-9;

struct Response {
  int item = 0;       // 1..N
  int annotator = 0;  // 1..M
  int label = 0;      // 1..K
};

class LabelDataset {
 public:
  LabelDataset() = default;
  LabelDataset(int n_items, int n_annotators, int n_classes,
               std::vector<Response> responses);

  int n_items() const { return n_items_; }
  int n_annotators() const { return n_annotators_; }
  int n_classes() const { return n_classes_; }
  const std::vector<Response>& responses() const { return responses_; }

 private:
  int n_items_ = 0;
  int n_annotators_ = 0;
  int n_classes_ = 0;
  std::vector<Response> responses_;
};

struct DatasetIssue {
  enum class Kind {
    kBadDimensions,
    kItemOutOfRange,
    kAnnotatorOutOfRange,
    kLabelOutOfRange,
    kDuplicateResponse,
  };
  Kind kind;
  std::size_t row;  // 0-based position in responses()
  std::string message;
};

// Returns the first violated invariant, or nullopt when the dataset is valid.
std::optional<DatasetIssue> validate_dataset(const LabelDataset& dataset);

// Throws Error carrying the first issue's message.
void require_valid(const LabelDataset& dataset);

// Item-major view of a validated dataset. For item n (0-based) the responses
// are annotators[offsets[n] .. offsets[n+1]) with matching labels, both
// 0-based, sorted by annotator.
struct ItemView {
  std::vector<std::size_t> offsets;
  std::vector<int> annotators;
  std::vector<int> labels;

  std::size_t size(int item) const { return offsets[item + 1] - offsets[item]; }
};

ItemView build_item_view(const LabelDataset& dataset);

class ConfusionMatrix {
 public:
  // Throws Error unless the matrix is square, nonnegative and every column
  // sums to one within kSimplexTolerance.
  explicit ConfusionMatrix(MatrixXd entries);

  static ConfusionMatrix identity(int k);

  int n_classes() const { return static_cast<int>(entries_.rows()); }
  const MatrixXd& entries() const { return entries_; }
  double operator()(int response, int truth) const {
    return entries_(response, truth);
  }

 private:
  MatrixXd entries_;
};

class PriorPMF {
 public:
  explicit PriorPMF(VectorXd probs);

  static PriorPMF uniform(int k);

  int n_classes() const { return static_cast<int>(probs_.size()); }
  const VectorXd& probs() const { return probs_; }
  double operator()(int k) const { return probs_(k); }

 private:
  VectorXd probs_;
};

struct ModelEstimate {
  std::vector<ConfusionMatrix> confusions;
  PriorPMF prior;

  ModelEstimate(std::vector<ConfusionMatrix> confusions, PriorPMF prior);

  int n_classes() const { return prior.n_classes(); }
  int n_annotators() const { return static_cast<int>(confusions.size()); }
  const MatrixXd& confusion(int m) const { return confusions[m].entries(); }
};

// Clamps negative entries to zero and rescales every column to unit sum.
// A column with no remaining mass becomes uniform.
MatrixXd clamp_and_normalize_columns(const MatrixXd& a);

// Raises every entry to at least `floor`, then rescales columns to unit sum.
MatrixXd floor_and_normalize_columns(const MatrixXd& a, double floor);

VectorXd clamp_and_normalize(const VectorXd& v);
VectorXd floor_and_normalize(const VectorXd& v, double floor);

// Applies floor_and_normalize_* to every parameter of the model.
ModelEstimate floor_model(const ModelEstimate& model, double floor);

}  // namespace crowdpair

#endif  // CROWDPAIR_DATA_MODEL_H_
