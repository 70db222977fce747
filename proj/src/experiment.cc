#include "crowdpair/experiment.h"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>

#include "crowdpair/cooccurrence.h"
#include "crowdpair/multispa.h"
#include "crowdpair/predict_eval.h"

namespace crowdpair {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

struct TableSpec {
  Regime regime;
  std::string metric;
  std::vector<double> ps;
  std::vector<Method> methods;
  // reference[method index][p index]; NaN where nothing was published.
  std::vector<std::vector<double>> reference;
};

constexpr double kNone = std::numeric_limits<double>::quiet_NaN();

TableSpec table_spec(int table) {
  switch (table) {
    case 3:
      return {Regime::kCase1,
              "mse",
              {0.2, 0.3, 0.5, 1.0},
              {Method::kMultiSpa, Method::kMultiSpaKl, Method::kMvDs},
              {{0.0184, 0.0083, 0.0063, 0.0034},
               {0.0019, 0.0009, 0.0004, 1.73e-4},
               {kNone, kNone, 0.0173, 1.84e-4}}};
    case 4:
      return {Regime::kCase2,
              "mse",
              {0.2, 0.3, 0.5, 1.0},
              {Method::kMultiSpa, Method::kMultiSpaKl, Method::kMvDs},
              {{0.0229, 0.0188, 0.0115, 0.0102},
               {0.0029, 0.0014, 0.0005, 1.67e-4},
               {kNone, kNone, 0.0028, 5.88e-4}}};
    case 5:
      return {Regime::kCase2,
              "error_pct",
              {0.2, 0.3, 0.5},
              {Method::kMultiSpa, Method::kMultiSpaKl, Method::kMultiSpaDs, Method::kMvDs,
               Method::kMajorityVote},
              {{37.24, 26.39, 19.21},
               {31.71, 21.10, 12.79},
               {31.95, 21.11, 12.80},
               {66.91, 57.92, 13.09},
               {67.57, 68.37, 71.39}}};
    default:
      throw Error("experiment: unknown table " + std::to_string(table) + " (3, 4, 5)");
  }
}

}  // namespace

std::string method_name(Method method) {
  switch (method) {
    case Method::kMultiSpa: return "multispa";
    case Method::kMultiSpaKl: return "multispa-kl";
    case Method::kMultiSpaDs: return "multispa-ds";
    case Method::kMvDs: return "mv-ds";
    case Method::kMajorityVote: return "mv";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  for (Method m : {Method::kMultiSpa, Method::kMultiSpaKl, Method::kMultiSpaDs,
                   Method::kMvDs, Method::kMajorityVote}) {
    if (method_name(m) == name) return m;
  }
  throw Error("experiment: unknown method '" + name +
              "' (multispa, multispa-kl, multispa-ds, mv-ds, mv)");
}

ModelEstimate fit_method(Method method, const LabelDataset& dataset,
                         const FitSettings& settings) {
  switch (method) {
    case Method::kMultiSpa:
      return multispa(dataset, settings.kl.init);
    case Method::kMultiSpaKl:
      return multispa_kl(dataset, settings.kl).model;
    case Method::kMultiSpaDs:
      return em_fit(dataset, multispa(dataset, settings.kl.init), settings.em).model;
    case Method::kMvDs:
      return em_fit(dataset, mv_initialize(dataset, settings.em.delta), settings.em).model;
    case Method::kMajorityVote:
      return mv_initialize(dataset, settings.em.delta);
  }
  throw Error("experiment: unknown method");
}

std::map<Method, MethodOutcome> run_trial(const SynthData& data,
                                          const std::vector<Method>& methods,
                                          const FitSettings& settings) {
  std::map<Method, MethodOutcome> out;
  auto wants = [&](Method m) {
    for (Method x : methods) {
      if (x == m) return true;
    }
    return false;
  };
  const LabelDataset& dataset = data.dataset;
  const double delta = settings.kl.delta;
  const int threads = settings.em.threads;

  auto score = [&](MethodOutcome& o, const ModelEstimate& model) {
    // Latent classes are identified only up to a shared reordering; the
    // MSE permutation maps them onto the true classes before prediction.
    const ModelMse matched = model_mse(model, data.truth);
    o.mse = matched.average;
    o.error = classification_error(
        map_predict(relabel_classes(model, matched.permutation), dataset, delta, threads)
            .labels,
        data.labels);
  };

  // The three MultiSPA-based methods share one co-occurrence pass and one
  // MultiSPA estimate; its time is charged to each of them.
  std::optional<ModelEstimate> spa_model;
  std::optional<CooccurrenceSet> cooc;
  std::optional<std::string> spa_failure;
  double spa_seconds = 0.0;
  if (wants(Method::kMultiSpa) || wants(Method::kMultiSpaKl) ||
      wants(Method::kMultiSpaDs)) {
    const auto start = Clock::now();
    try {
      cooc = count_pairs(dataset);
      spa_model = multispa(*cooc, settings.kl.init);
    } catch (const Error& e) {
      spa_failure = e.what();
    }
    spa_seconds = seconds_since(start);
  }

  for (Method method : methods) {
    MethodOutcome& o = out[method];
    const auto start = Clock::now();
    try {
      switch (method) {
        case Method::kMultiSpa:
          if (spa_failure) throw Error(*spa_failure);
          score(o, *spa_model);
          break;
        case Method::kMultiSpaKl:
          if (spa_failure) throw Error(*spa_failure);
          score(o, fit_kl(*spa_model, *cooc, settings.kl).model);
          break;
        case Method::kMultiSpaDs:
          if (spa_failure) throw Error(*spa_failure);
          score(o, em_fit(dataset, *spa_model, settings.em).model);
          break;
        case Method::kMvDs:
          score(o, em_fit(dataset, mv_initialize(dataset, settings.em.delta), settings.em)
                       .model);
          break;
        case Method::kMajorityVote:
          o.error = classification_error(majority_vote(dataset), data.labels);
          break;
      }
    } catch (const Error& e) {
      o.failure = e.what();
      o.mse.reset();
      o.error.reset();
    }
    o.seconds = seconds_since(start);
    if (method != Method::kMvDs && method != Method::kMajorityVote) o.seconds += spa_seconds;
  }
  return out;
}

std::uint64_t trial_seed(std::uint64_t base, std::uint64_t group, std::uint64_t trial) {
  return mix(mix(mix(base) ^ group) ^ trial);
}

std::vector<BenchCell> run_bench(const BenchOptions& options) {
  const TableSpec spec = table_spec(options.table);
  if (options.trials < 1) throw Error("experiment: trials must be >= 1");
  const std::vector<double> ps = options.ps.empty() ? spec.ps : options.ps;

  std::vector<BenchCell> cells;
  FitSettings settings = options.settings;
  settings.em.threads = options.threads;
  settings.kl.init.threads = options.threads;
  for (std::size_t pi = 0; pi < ps.size(); ++pi) {
    std::vector<double> sums(spec.methods.size(), 0.0);
    std::vector<int> successes(spec.methods.size(), 0);
    for (int t = 0; t < options.trials; ++t) {
      SynthConfig sc;
      sc.n_items = options.n_items;
      sc.n_annotators = options.n_annotators;
      sc.n_classes = 3;
      sc.p = ps[pi];
      sc.regime = spec.regime;
      sc.seed = trial_seed(options.seed, static_cast<std::uint64_t>(options.table),
                           static_cast<std::uint64_t>(pi * 100000 + t));
      sc.threads = options.threads;
      const SynthData data = generate(sc);
      const auto outcomes = run_trial(data, spec.methods, settings);
      for (std::size_t mi = 0; mi < spec.methods.size(); ++mi) {
        const MethodOutcome& o = outcomes.at(spec.methods[mi]);
        const std::optional<double>& v = spec.metric == "mse" ? o.mse : o.error;
        if (v) {
          sums[mi] += *v;
          ++successes[mi];
        }
      }
    }
    for (std::size_t mi = 0; mi < spec.methods.size(); ++mi) {
      BenchCell cell;
      cell.p = ps[pi];
      cell.method = spec.methods[mi];
      cell.metric = spec.metric;
      cell.successes = successes[mi];
      cell.trials = options.trials;
      cell.mean = successes[mi] > 0 ? sums[mi] / successes[mi] : kNone;
      for (std::size_t k = 0; k < spec.ps.size(); ++k) {
        if (std::abs(spec.ps[k] - ps[pi]) < 1e-12 && !std::isnan(spec.reference[mi][k])) {
          cell.reference = spec.reference[mi][k];
        }
      }
      cells.push_back(cell);
    }
  }
  return cells;
}

void print_bench_table(std::ostream& out, const BenchOptions& options,
                       const std::vector<BenchCell>& cells) {
  const TableSpec spec = table_spec(options.table);
  out << "table " << options.table << ": " << regime_name(spec.regime) << ", "
      << (spec.metric == "mse" ? "confusion MSE" : "classification error (%)")
      << ", N=" << options.n_items << " M=" << options.n_annotators
      << " K=3, trials=" << options.trials << ", seed=" << options.seed << "\n";
  out << std::left << std::setw(14) << "method" << std::setw(6) << "p" << std::setw(16)
      << "mean" << std::setw(14) << "published" << "ok\n";
  const auto flags = out.flags();
  for (const BenchCell& c : cells) {
    out << std::left << std::setw(14) << method_name(c.method) << std::setw(6) << c.p
        << std::setw(16) << std::setprecision(6);
    if (std::isnan(c.mean)) {
      out << "n/a";
    } else {
      out << c.mean;
    }
    out << std::setw(14);
    if (c.reference) {
      out << *c.reference;
    } else {
      out << "-";
    }
    out << c.successes << "/" << c.trials << "\n";
  }
  out.flags(flags);
}

void write_bench_csv(std::ostream& out, const std::vector<BenchCell>& cells) {
  out << "method,p,metric,mean,published,successes,trials\n";
  out << std::setprecision(10);
  for (const BenchCell& c : cells) {
    out << method_name(c.method) << "," << c.p << "," << c.metric << ",";
    if (!std::isnan(c.mean)) out << c.mean;
    out << ",";
    if (c.reference) out << *c.reference;
    out << "," << c.successes << "," << c.trials << "\n";
  }
}

}  // namespace crowdpair
