#include "crowdpair/cli.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "crowdpair/baseline.h"
#include "crowdpair/experiment.h"
#include "crowdpair/io.h"
#include "crowdpair/klfit.h"
#include "crowdpair/multispa.h"
#include "crowdpair/predict_eval.h"
#include "crowdpair/synth.h"

namespace crowdpair {
namespace {

using json = nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

VectorXd parse_prior(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(token, &used));
      if (used != token.size()) throw std::invalid_argument(token);
    } catch (const std::exception&) {
      throw UsageError("--prior: cannot parse '" + token + "'");
    }
  }
  VectorXd out(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) out(i) = values[i];
  return out;
}

void log_config(std::ostream& err, const std::string& command, const json& config) {
  err << "crowdpair " << command << ": " << config.dump() << "\n";
}

struct SimulateArgs {
  int n = 10000;
  int m = 25;
  int k = 3;
  double p = 1.0;
  std::string regime = "case1";
  std::string prior;
  std::uint64_t seed = 0;
  std::string out_dir;
  int threads = 1;
};

struct FitArgs {
  std::string method;
  std::string data;
  int k = 0;
  int n_items = 0;
  int n_annotators = 0;
  std::string out;
  double eta = 1e-6;
  int reference = 0;  // 1-based, 0 = automatic
  long long s_min = 1;
  std::string align = "assignment";
  int max_sweeps = 100;
  double tol = 1e-6;
  double delta = 1e-6;
  int inner_iters = 50;
  bool weight_by_count = false;
  int em_iters = 100;
  double em_tol = 1e-7;
  int threads = 1;
};

struct PredictArgs {
  std::string model;
  std::string data;
  std::string out;
  std::string match_model;
  double delta = 1e-6;
  int threads = 1;
};

struct EvalArgs {
  std::string pred;
  std::string truth;
  std::string model;
  std::string truth_model;
  bool per_annotator = false;
};

struct BenchArgs {
  int table = 3;
  int trials = 10;
  std::uint64_t seed = 0;
  int n = 10000;
  int m = 25;
  std::vector<double> ps;
  std::string csv;
  int threads = 1;
};

int do_simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
  SynthConfig config;
  config.n_items = a.n;
  config.n_annotators = a.m;
  config.n_classes = a.k;
  config.p = a.p;
  config.regime = parse_regime(a.regime);
  config.seed = a.seed;
  config.threads = a.threads;
  if (!a.prior.empty()) config.prior = parse_prior(a.prior);
  json logged = {{"n", a.n},   {"m", a.m},           {"k", a.k},
                 {"p", a.p},   {"regime", a.regime}, {"seed", a.seed},
                 {"out_dir", a.out_dir}};
  if (config.prior) logged["prior"] = std::vector<double>(config.prior->data(),
                                                          config.prior->data() + a.k);
  log_config(err, "simulate", logged);

  const SynthData data = generate(config);
  std::filesystem::create_directories(a.out_dir);
  const std::filesystem::path dir(a.out_dir);
  save_dataset(data.dataset, (dir / "dataset.csv").string());
  save_model(data.truth, (dir / "truth_model.json").string());
  save_truth_labels(data.labels, (dir / "truth_labels.csv").string());
  out << "wrote " << data.dataset.responses().size() << " responses to "
      << (dir / "dataset.csv").string() << "\n";
  return kExitOk;
}

int do_fit(const FitArgs& a, std::ostream& out, std::ostream& err) {
  const Method method = parse_method(a.method);
  FitSettings settings;
  settings.kl.init.eta = a.eta;
  if (a.reference > 0) settings.kl.init.reference = a.reference - 1;
  settings.kl.init.s_min = a.s_min;
  if (a.align == "assignment") {
    settings.kl.init.align = AlignMethod::kAssignment;
  } else if (a.align == "diagonal") {
    settings.kl.init.align = AlignMethod::kDiagonalDominance;
  } else {
    throw UsageError("--align must be 'assignment' or 'diagonal'");
  }
  settings.kl.init.threads = a.threads;
  settings.kl.max_outer_sweeps = a.max_sweeps;
  settings.kl.tolerance = a.tol;
  settings.kl.delta = a.delta;
  settings.kl.inner_iterations = a.inner_iters;
  settings.kl.weight_by_count = a.weight_by_count;
  settings.em.max_iterations = a.em_iters;
  settings.em.tolerance = a.em_tol;
  settings.em.delta = a.delta;
  settings.em.threads = a.threads;
  log_config(err, "fit",
             {{"method", a.method},
              {"data", a.data},
              {"k", a.k},
              {"eta", a.eta},
              {"reference", a.reference},
              {"s_min", a.s_min},
              {"align", a.align},
              {"max_sweeps", a.max_sweeps},
              {"tol", a.tol},
              {"delta", a.delta},
              {"inner_iters", a.inner_iters},
              {"weight_by_count", a.weight_by_count},
              {"em_iters", a.em_iters},
              {"em_tol", a.em_tol},
              {"seed", nullptr}});

  const LabelDataset dataset =
      load_dataset(a.data, DatasetShape{a.k, a.n_items, a.n_annotators});
  if (method == Method::kMultiSpaKl) settings.kl.validate(a.k);
  const ModelEstimate model = fit_method(method, dataset, settings);
  save_model(model, a.out);
  out << "wrote " << method_name(method) << " model (K=" << model.n_classes()
      << ", M=" << model.n_annotators() << ") to " << a.out << "\n";
  return kExitOk;
}

int do_predict(const PredictArgs& a, std::ostream& out, std::ostream& err) {
  log_config(err, "predict",
             {{"model", a.model},
              {"data", a.data},
              {"match_model", a.match_model},
              {"delta", a.delta},
              {"seed", nullptr}});
  ModelEstimate model = load_model(a.model);
  if (!a.match_model.empty()) {
    model = relabel_classes(model, model_mse(model, load_model(a.match_model)).permutation);
  }
  const LabelDataset dataset =
      load_dataset(a.data, DatasetShape{model.n_classes(), 0, model.n_annotators()});
  const Prediction pred = map_predict(model, dataset, a.delta, a.threads);
  PredictionTable table;
  table.items.resize(pred.labels.size());
  for (std::size_t i = 0; i < table.items.size(); ++i) table.items[i] = static_cast<int>(i) + 1;
  table.labels = pred.labels;
  table.posteriors = pred.posteriors;
  save_predictions(table, a.out);
  out << "wrote " << table.items.size() << " predictions to " << a.out << "\n";
  return kExitOk;
}

int do_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const bool labels_mode = !a.pred.empty() || !a.truth.empty();
  const bool model_mode = !a.model.empty() || !a.truth_model.empty();
  if (labels_mode == model_mode) {
    throw UsageError("eval needs either --pred with --truth, or --model with --truth-model");
  }
  json result;
  if (labels_mode) {
    if (a.pred.empty() || a.truth.empty()) {
      throw UsageError("eval: --pred and --truth go together");
    }
    log_config(err, "eval", {{"pred", a.pred}, {"truth", a.truth}, {"seed", nullptr}});
    const PredictionTable table = load_predictions(a.pred);
    const std::vector<int> truth = load_truth_labels(a.truth);
    std::vector<int> predicted;
    std::vector<int> matched_truth;
    for (std::size_t i = 0; i < table.items.size(); ++i) {
      const int item = table.items[i];
      if (item < 1 || item > static_cast<int>(truth.size()) || truth[item - 1] < 1) {
        throw Error("eval: no truth label for item " + std::to_string(item));
      }
      predicted.push_back(table.labels[i]);
      matched_truth.push_back(truth[item - 1]);
    }
    result["items"] = predicted.size();
    result["classification_error_pct"] = classification_error(predicted, matched_truth);
  } else {
    if (a.model.empty() || a.truth_model.empty()) {
      throw UsageError("eval: --model and --truth-model go together");
    }
    log_config(err, "eval",
               {{"model", a.model},
                {"truth_model", a.truth_model},
                {"per_annotator", a.per_annotator},
                {"seed", nullptr}});
    const ModelMse r =
        model_mse(load_model(a.model), load_model(a.truth_model),
                  a.per_annotator ? PermutationMode::kPerAnnotator : PermutationMode::kShared);
    result["mse"] = r.average;
    result["per_annotator_mse"] = r.per_annotator;
    if (!r.permutation.empty()) {
      std::vector<int> one_based;
      for (int v : r.permutation) one_based.push_back(v + 1);
      result["permutation"] = one_based;
    }
  }
  out << result.dump(2) << "\n";
  return kExitOk;
}

int do_bench(const BenchArgs& a, std::ostream& out, std::ostream& err) {
  BenchOptions options;
  options.table = a.table;
  options.trials = a.trials;
  options.seed = a.seed;
  options.n_items = a.n;
  options.n_annotators = a.m;
  options.ps = a.ps;
  options.threads = a.threads;
  log_config(err, "bench",
             {{"table", a.table},
              {"trials", a.trials},
              {"seed", a.seed},
              {"n", a.n},
              {"m", a.m},
              {"p", a.ps},
              {"csv", a.csv}});
  const std::vector<BenchCell> cells = run_bench(options);
  print_bench_table(out, options, cells);
  if (!a.csv.empty()) {
    std::ofstream file(a.csv);
    if (!file) throw Error("bench: cannot open " + a.csv + " for writing");
    write_bench_csv(file, cells);
  } else {
    out << "\n";
    write_bench_csv(out, cells);
  }
  return kExitOk;
}

}  // namespace

int run(int argc, char** argv) { return run(argc, argv, std::cout, std::cerr); }

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dawid-Skene label aggregation from pairwise co-occurrences"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "generate a synthetic dataset");
  simulate->add_option("--n", sim.n, "items")->capture_default_str();
  simulate->add_option("--m", sim.m, "annotators")->capture_default_str();
  simulate->add_option("--k", sim.k, "classes")->capture_default_str();
  simulate->add_option("--p", sim.p, "response retention probability")->capture_default_str();
  simulate->add_option("--regime", sim.regime, "case1, case2 or all_random")
      ->capture_default_str();
  simulate->add_option("--prior", sim.prior, "comma-separated class prior (default uniform)");
  simulate->add_option("--seed", sim.seed, "random seed")->required();
  simulate->add_option("--out-dir", sim.out_dir, "output directory")->required();
  simulate->add_option("--threads", sim.threads)->capture_default_str();

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "estimate a model from a dataset CSV");
  fit_cmd->add_option("--method", fit.method)
      ->required()
      ->check(CLI::IsMember({"multispa", "multispa-kl", "multispa-ds", "mv-ds", "mv"}));
  fit_cmd->add_option("--data", fit.data, "dataset CSV")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--k", fit.k, "number of classes")->required();
  fit_cmd->add_option("--n-items", fit.n_items, "items (default: largest index)");
  fit_cmd->add_option("--n-annotators", fit.n_annotators, "annotators (default: largest index)");
  fit_cmd->add_option("--out", fit.out, "model file")->required();
  fit_cmd->add_option("--eta", fit.eta)->capture_default_str();
  fit_cmd->add_option("--reference", fit.reference, "1-based reference annotator");
  fit_cmd->add_option("--s-min,--s_min", fit.s_min)->capture_default_str();
  fit_cmd->add_option("--align", fit.align, "assignment or diagonal")->capture_default_str();
  fit_cmd->add_option("--max-sweeps,--max_sweeps", fit.max_sweeps)->capture_default_str();
  fit_cmd->add_option("--tol", fit.tol)->capture_default_str();
  fit_cmd->add_option("--delta", fit.delta)->capture_default_str();
  fit_cmd->add_option("--inner-iters,--inner_iters", fit.inner_iters)->capture_default_str();
  fit_cmd->add_flag("--weight-by-count,--weight_by_count", fit.weight_by_count);
  fit_cmd->add_option("--em-iters", fit.em_iters)->capture_default_str();
  fit_cmd->add_option("--em-tol", fit.em_tol)->capture_default_str();
  fit_cmd->add_option("--threads", fit.threads)->capture_default_str();

  PredictArgs pred;
  auto* predict = app.add_subcommand("predict", "MAP labels for a dataset");
  predict->add_option("--model", pred.model)->required()->check(CLI::ExistingFile);
  predict->add_option("--data", pred.data)->required()->check(CLI::ExistingFile);
  predict->add_option("--out", pred.out)->required();
  predict->add_option("--match-model", pred.match_model,
                      "reorder classes to best match this model first")
      ->check(CLI::ExistingFile);
  predict->add_option("--delta", pred.delta)->capture_default_str();
  predict->add_option("--threads", pred.threads)->capture_default_str();

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "classification error or confusion MSE");
  eval->add_option("--pred", ev.pred)->check(CLI::ExistingFile);
  eval->add_option("--truth", ev.truth)->check(CLI::ExistingFile);
  eval->add_option("--model", ev.model)->check(CLI::ExistingFile);
  eval->add_option("--truth-model", ev.truth_model)->check(CLI::ExistingFile);
  eval->add_flag("--per-annotator", ev.per_annotator, "match columns per annotator");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "synthetic benchmark tables");
  bench_cmd->add_option("--table", bench.table)->required()->check(CLI::IsMember({3, 4, 5}));
  bench_cmd->add_option("--trials", bench.trials)->capture_default_str();
  bench_cmd->add_option("--seed", bench.seed)->required();
  bench_cmd->add_option("--n", bench.n)->capture_default_str();
  bench_cmd->add_option("--m", bench.m)->capture_default_str();
  bench_cmd->add_option("--p", bench.ps, "override the table's p values");
  bench_cmd->add_option("--csv", bench.csv, "write CSV here instead of stdout");
  bench_cmd->add_option("--threads", bench.threads)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o;
    std::ostringstream e_out;
    const int code = app.exit(e, o, e_out);
    out << o.str();
    err << e_out.str();
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*simulate) return do_simulate(sim, out, err);
    if (*fit_cmd) return do_fit(fit, out, err);
    if (*predict) return do_predict(pred, out, err);
    if (*eval) return do_eval(ev, out, err);
    if (*bench_cmd) return do_bench(bench, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace crowdpair
