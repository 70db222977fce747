// Synthetic benchmark harness: runs the estimators on seeded synthetic data
// and tabulates confusion-matrix MSE and MAP classification error.

#ifndef CROWDPAIR_EXPERIMENT_H_
#define CROWDPAIR_EXPERIMENT_H_

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "crowdpair/baseline.h"
#include "crowdpair/klfit.h"
#include "crowdpair/synth.h"

namespace crowdpair {

enum class Method { kMultiSpa, kMultiSpaKl, kMultiSpaDs, kMvDs, kMajorityVote };

std::string method_name(Method method);
Method parse_method(const std::string& name);

struct MethodOutcome {
  std::optional<double> mse;    // model_mse against the truth (shared permutation)
  std::optional<double> error;  // classification error in percent
  std::optional<std::string> failure;
  double seconds = 0.0;
};

struct FitSettings {
  FitConfig kl;
  EmConfig em;
};

std::map<Method, MethodOutcome> run_trial(const SynthData& data,
                                          const std::vector<Method>& methods,
                                          const FitSettings& settings = {});

// Fits one method to a dataset. kMajorityVote yields the mv_initialize model.
ModelEstimate fit_method(Method method, const LabelDataset& dataset,
                         const FitSettings& settings = {});

struct BenchOptions {
  int table = 3;  // 3, 4 or 5
  int trials = 10;
  std::uint64_t seed = 0;
  int n_items = 10000;
  int n_annotators = 25;
  std::vector<double> ps;  // empty: the table's own columns
  int threads = 1;
  FitSettings settings;
};

struct BenchCell {
  double p = 0.0;
  Method method = Method::kMultiSpa;
  std::string metric;       // "mse" or "error_pct"
  double mean = 0.0;        // over successful trials; NaN if none
  int successes = 0;
  int trials = 0;
  std::optional<double> reference;  // published value, when there is one
};

std::vector<BenchCell> run_bench(const BenchOptions& options);

void print_bench_table(std::ostream& out, const BenchOptions& options,
                       const std::vector<BenchCell>& cells);
void write_bench_csv(std::ostream& out, const std::vector<BenchCell>& cells);

std::uint64_t trial_seed(std::uint64_t base, std::uint64_t group, std::uint64_t trial);

}  // namespace crowdpair

#endif  // CROWDPAIR_EXPERIMENT_H_
