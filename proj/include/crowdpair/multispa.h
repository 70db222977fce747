// Algebraic identification of confusion matrices from pairwise statistics.
//
// For annotator m the partner blocks R_{m,l} are stacked side by side into
// Z_m = A_m [D A_l1^T, D A_l2^T, ...]. After scaling every column of Z_m to
// unit l1 norm, each column is a convex combination of the columns of A_m,
// so A_m is recovered (up to column order) as the extreme columns picked by
// the successive projection algorithm. Per-annotator orderings are then
// reconciled against a reference annotator and the prior is read off
// A_m^{-1} R_{m,l} A_l^{-T}.

#ifndef CROWDPAIR_MULTISPA_H_
#define CROWDPAIR_MULTISPA_H_

#include <optional>
#include <vector>

#include "crowdpair/cooccurrence.h"
#include "crowdpair/data_model.h"

namespace crowdpair {

struct ColumnOrigin {
  int partner = 0;  // 0-based annotator index l
  int column = 0;   // column of R_{m,l}
};

struct StackedBlock {
  int annotator = 0;
  MatrixXd matrix;                  // K x (current column count)
  std::vector<ColumnOrigin> origin;  // one per current column
  std::vector<bool> kept_mask;       // one per column of the unfiltered block
};

// Z_m = [R_{m,l} for l in partners(m), ascending]. Throws Error naming the
// annotator when it shares no items with anyone.
StackedBlock build_stacked(int m, const CooccurrenceSet& cooc);

// Drops columns whose l1 norm is below eta and scales the rest to unit l1
// norm. Throws Error ("insufficient mass") if fewer than K columns survive.
StackedBlock normalize_columns(const StackedBlock& block, double eta, int k);

struct SpaResult {
  MatrixXd vertices;         // K x K, the chosen columns in pick order
  std::vector<int> chosen;   // indices into block.matrix columns
};

// Successive projection: K greedy picks of the column with the largest
// residual norm after projecting out the columns already chosen. Ties go to
// the lowest column index. Throws Error ("degenerate block") when every
// remaining residual norm drops below 1e-12 before K picks.
SpaResult spa(const StackedBlock& normalized, int k);

enum class AlignMethod {
  kAssignment,        // match against the reference-implied estimate
  kDiagonalDominance, // reorder each estimate so its diagonal is heavy
};

struct AlignmentResult {
  std::vector<MatrixXd> confusions;
  // permutations[m][i] = column of the incoming estimate placed at column i.
  std::vector<std::vector<int>> permutations;
};

// Brings every estimate into the column order of estimates[reference].
// Alignment spreads breadth-first through the pair graph; each newly reached
// annotator l is matched against column_normalize((A_r^{-1} R_{r,l})^T),
// taken from the first already-aligned partner r with a well-conditioned
// estimate. Then up to consensus_passes rounds let every aligned partner of
// each non-reference annotator propose the permutation it implies; the
// count-weighted majority wins (stopping when nothing changes). 0 keeps the
// plain breadth-first result. Throws Error when the reference is singular or some
// annotators cannot be reached.
AlignmentResult align_permutations(const std::vector<MatrixXd>& estimates,
                                   const CooccurrenceSet& cooc, int reference,
                                   AlignMethod method = AlignMethod::kAssignment,
                                   int consensus_passes = 0);

// S-weighted average of diag(A_m^{-1} R_{m,l} A_l^{-T}) over pairs with
// count >= s_min and invertible estimates; negatives clamped, then
// renormalized.
PriorPMF estimate_prior(const std::vector<MatrixXd>& aligned,
                        const CooccurrenceSet& cooc, long long s_min = 1);

// Annotator with the largest total co-label count (lowest index on ties).
int default_reference(const CooccurrenceSet& cooc);

struct MultiSpaConfig {
  double eta = 1e-6;
  std::optional<int> reference;  // 0-based; defaults to default_reference()
  long long s_min = 1;
  AlignMethod align = AlignMethod::kAssignment;
  int consensus_passes = 10;
  int threads = 1;
};

ModelEstimate multispa(const CooccurrenceSet& cooc, const MultiSpaConfig& config = {});
ModelEstimate multispa(const LabelDataset& dataset, const MultiSpaConfig& config = {});

// Condition number threshold used for every inversion in this module.
inline constexpr double kMaxConditionNumber = 1e8;

double condition_number(const MatrixXd& a);

}  // namespace crowdpair

#endif  // CROWDPAIR_MULTISPA_H_
