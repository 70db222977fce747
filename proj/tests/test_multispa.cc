#include <doctest.h>

#include <algorithm>

#include "crowdpair/cooccurrence.h"
#include "crowdpair/multispa.h"
#include "crowdpair/predict_eval.h"
#include "crowdpair/synth.h"
#include "test_support.h"

using namespace crowdpair;

namespace {

StackedBlock block_of(const MatrixXd& z) {
  StackedBlock b;
  b.matrix = z;
  for (int q = 0; q < z.cols(); ++q) b.origin.push_back({0, q});
  b.kept_mask.assign(z.cols(), true);
  return b;
}

// Column subset with the largest |det|, by enumeration. For noiseless
// separable data it is exactly the set of vertex columns.
std::vector<int> max_volume_subset(const MatrixXd& z, int k) {
  const int n = static_cast<int>(z.cols());
  std::vector<int> best;
  double best_vol = -1.0;
  std::vector<bool> pick(n, false);
  std::fill(pick.begin(), pick.begin() + k, true);
  do {
    std::vector<int> idx;
    for (int i = 0; i < n; ++i)
      if (pick[i]) idx.push_back(i);
    MatrixXd sub(z.rows(), k);
    for (int i = 0; i < k; ++i) sub.col(i) = z.col(idx[i]);
    const double vol = std::abs(sub.determinant());
    if (vol > best_vol) {
      best_vol = vol;
      best = idx;
    }
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return best;
}

CooccurrenceSet three_annotators_two_pairs() {
  CooccurrenceSet c(3, 2);
  MatrixXd r12(2, 2), r13(2, 2);
  r12 << 0.4, 0.1, 0.1, 0.4;
  r13 << 0.3, 0.2, 0.2, 0.3;
  c.set(0, 1, r12, 10);
  c.set(0, 2, r13, 10);
  return c;
}

}  // namespace

TEST_CASE("stacked block concatenates partners in ascending order") {
  const CooccurrenceSet c = three_annotators_two_pairs();
  const StackedBlock z = build_stacked(0, c);
  REQUIRE(z.matrix.rows() == 2);
  REQUIRE(z.matrix.cols() == 4);
  CHECK(z.matrix.leftCols(2) == *c.joint(0, 1));
  CHECK(z.matrix.rightCols(2) == *c.joint(0, 2));
  CHECK(z.origin[2].partner == 2);
  CHECK(z.origin[3].column == 1);

  const StackedBlock single = build_stacked(1, c);
  CHECK(single.matrix.cols() == 2);
  CHECK(single.matrix == *c.joint(1, 0));
}

TEST_CASE("isolated annotator is named in the error") {
  CooccurrenceSet c(3, 2);
  c.set(0, 1, MatrixXd::Constant(2, 2, 0.25), 4);
  try {
    build_stacked(2, c);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("annotator 3") != std::string::npos);
  }
}

TEST_CASE("column normalization scales and drops") {
  MatrixXd z(2, 3);
  z << 0.2, 1e-9, 0.1, 0.2, 0.0, 0.3;
  const StackedBlock n = normalize_columns(block_of(z), 1e-6, 2);
  REQUIRE(n.matrix.cols() == 2);
  CHECK(n.matrix(0, 0) == doctest::Approx(0.5));
  CHECK(n.matrix(1, 0) == doctest::Approx(0.5));
  CHECK(n.matrix(1, 1) == doctest::Approx(0.75));
  CHECK(n.kept_mask == std::vector<bool>{true, false, true});
  CHECK(n.origin[1].column == 2);
  CHECK_THROWS_AS(normalize_columns(block_of(MatrixXd::Zero(2, 4)), 1e-6, 2), Error);
}

TEST_CASE("SPA hand example picks by residual norm") {
  MatrixXd z(2, 3);
  z << 0.8, 0.3, 0.55, 0.2, 0.7, 0.45;
  // l2 norms 0.8246, 0.7616, 0.7106
  CHECK(z.col(0).norm() == doctest::Approx(0.8246).epsilon(1e-4));
  CHECK(z.col(1).norm() == doctest::Approx(0.7616).epsilon(1e-4));
  CHECK(z.col(2).norm() == doctest::Approx(0.7106).epsilon(1e-4));
  const SpaResult r = spa(block_of(z), 2);
  CHECK(r.chosen == std::vector<int>{0, 1});
  MatrixXd a(2, 2);
  a << 0.8, 0.3, 0.2, 0.7;
  CHECK(testing::max_abs_diff(r.vertices, a) < 1e-15);
  std::vector<int> sorted = r.chosen;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == max_volume_subset(z, 2));
}

TEST_CASE("SPA on the identity returns the identity") {
  const SpaResult r = spa(block_of(MatrixXd::Identity(4, 4)), 4);
  MatrixXd v = MatrixXd::Zero(4, 4);
  for (int i = 0; i < 4; ++i) v.col(r.chosen[i]) = r.vertices.col(i);
  CHECK(v.isIdentity(0.0));
}

TEST_CASE("SPA recovers the vertices of noiseless separable data") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const int k = 2 + trial % 4;
    const MatrixXd a = testing::random_stochastic(k, k, rng);
    // H rows: all unit vectors plus random simplex points, shuffled.
    const int extra = 3 + trial % 5;
    MatrixXd h(k + extra, k);
    h.topRows(k) = MatrixXd::Identity(k, k);
    for (int i = 0; i < extra; ++i) h.row(k + i) = testing::random_pmf(k, rng).transpose();
    std::vector<int> order(k + extra);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    MatrixXd hs(k + extra, k);
    for (int i = 0; i < k + extra; ++i) hs.row(i) = h.row(order[i]);
    const MatrixXd z = a * hs.transpose();
    const SpaResult r = spa(block_of(z), k);
    CHECK(testing::brute_force_mse(r.vertices, a) <= 1e-24);
    if (k + extra <= 10) {
      std::vector<int> sorted = r.chosen;
      std::sort(sorted.begin(), sorted.end());
      CHECK(sorted == max_volume_subset(z, k));
    }
  }
}

TEST_CASE("SPA reports a rank-deficient block") {
  MatrixXd z(3, 3);
  z << 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.0, 0.0, 0.0;
  CHECK_THROWS_AS(spa(block_of(z), 3), Error);
}

TEST_CASE("alignment undoes a column swap") {
  std::mt19937_64 rng(3);
  const ModelEstimate truth = testing::random_model(3, 3, rng);
  const CooccurrenceSet pop = population_cooccurrences(truth);
  std::vector<MatrixXd> est;
  for (int m = 0; m < 3; ++m) est.push_back(truth.confusion(m));
  est[1] = testing::permute_cols(est[1], {1, 0, 2});
  const AlignmentResult r = align_permutations(est, pop, 0);
  for (int m = 0; m < 3; ++m) {
    CHECK(testing::max_abs_diff(r.confusions[m], truth.confusion(m)) < 1e-12);
  }
  CHECK(r.permutations[1] == std::vector<int>{1, 0, 2});

  std::vector<MatrixXd> exact;
  for (int m = 0; m < 3; ++m) exact.push_back(truth.confusion(m));
  const AlignmentResult same = align_permutations(exact, pop, 2);
  for (const auto& p : same.permutations) CHECK(p == std::vector<int>{0, 1, 2});
}

TEST_CASE("alignment through a chain and a disconnected graph") {
  std::mt19937_64 rng(9);
  const ModelEstimate truth = testing::random_model(4, 3, rng);
  CooccurrenceSet chain(4, 3);
  for (int m = 0; m < 3; ++m) chain.set(m, m + 1, population_cooccurrence(truth, m, m + 1), 1);
  std::vector<MatrixXd> est;
  for (int m = 0; m < 4; ++m) est.push_back(truth.confusion(m));
  est[3] = testing::permute_cols(est[3], {2, 0, 1});
  const AlignmentResult r = align_permutations(est, chain, 0);
  CHECK(testing::max_abs_diff(r.confusions[3], truth.confusion(3)) < 1e-12);

  CooccurrenceSet split(4, 3);
  split.set(0, 1, population_cooccurrence(truth, 0, 1), 1);
  split.set(2, 3, population_cooccurrence(truth, 2, 3), 1);
  CHECK_THROWS_WITH_AS(align_permutations(est, split, 0),
                       doctest::Contains("disconnected"), Error);
}

TEST_CASE("diagonal-dominance alignment") {
  MatrixXd a(3, 3);
  a << 0.1, 0.7, 0.2, 0.8, 0.2, 0.1, 0.1, 0.1, 0.7;
  const CooccurrenceSet c(1, 3);
  const AlignmentResult r = align_permutations({a}, c, 0, AlignMethod::kDiagonalDominance);
  CHECK(r.confusions[0](0, 0) == 0.7);
  CHECK(r.confusions[0](1, 1) == 0.8);
  CHECK(r.confusions[0](2, 2) == 0.7);
}

TEST_CASE("prior from exact estimates") {
  std::mt19937_64 rng(6);
  const ModelEstimate truth = testing::random_model(5, 3, rng);
  std::vector<MatrixXd> est;
  for (int m = 0; m < 5; ++m) est.push_back(truth.confusion(m));
  const PriorPMF d = estimate_prior(est, population_cooccurrences(truth));
  CHECK((d.probs() - truth.prior.probs()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("prior with identity estimates reads the diagonal") {
  CooccurrenceSet c(2, 2);
  MatrixXd r(2, 2);
  r << 0.7, 0.0, 0.0, 0.3;
  c.set(0, 1, r, 5);
  const MatrixXd i2 = MatrixXd::Identity(2, 2);
  const PriorPMF d = estimate_prior({i2, i2}, c);
  CHECK(d(0) == doctest::Approx(0.7).epsilon(1e-14));
  CHECK(d(1) == doctest::Approx(0.3).epsilon(1e-14));
}

TEST_CASE("prior clamps a negative diagonal entry") {
  // With A_m = I the implied D is R A_l^{-T}; choose R = M A_l^T so the
  // implied matrix is M, whose diagonal is (0.5, -0.1, 0.6).
  MatrixXd al(3, 3);
  al << 0.6, 0.2, 0.2, 0.2, 0.6, 0.2, 0.2, 0.2, 0.6;
  MatrixXd m(3, 3);
  m << 0.5, -0.15, 0.0, 0.15, -0.1, 0.15, 0.0, -0.15, 0.6;
  MatrixXd r = m * al.transpose();
  REQUIRE(r.minCoeff() > -1e-15);
  REQUIRE(r.sum() == doctest::Approx(1.0));
  r = r.cwiseMax(0.0);
  r /= r.sum();
  CooccurrenceSet c(2, 3);
  c.set(0, 1, r, 3);
  const PriorPMF d = estimate_prior({MatrixXd::Identity(3, 3), al}, c);
  CHECK(d(0) == doctest::Approx(5.0 / 11).epsilon(1e-12));
  CHECK(d(1) == 0.0);
  CHECK(d(2) == doctest::Approx(6.0 / 11).epsilon(1e-12));
}

TEST_CASE("prior needs a qualifying pair") {
  CooccurrenceSet c(2, 2);
  c.set(0, 1, MatrixXd::Constant(2, 2, 0.25), 3);
  const MatrixXd i2 = MatrixXd::Identity(2, 2);
  CHECK_THROWS_AS(estimate_prior({i2, i2}, c, 4), Error);
  const MatrixXd singular = MatrixXd::Constant(2, 2, 0.5);
  CHECK_THROWS_AS(estimate_prior({singular, singular}, c), Error);
}

TEST_CASE("population input: annotators with an identity partner are exact") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SynthConfig sc;
    sc.n_items = 1;
    sc.n_annotators = 10;
    sc.regime = Regime::kCase1;
    sc.seed = seed;
    const SynthData data = generate(sc);
    const ModelEstimate est = multispa(population_cooccurrences(data.truth));
    const ModelMse r = model_mse(est, data.truth);
    for (int m = 0; m < 10; ++m) {
      if (m == *data.special) continue;
      CHECK(r.per_annotator[m] <= 1e-10);
    }
  }
}

TEST_CASE("population input with two identity annotators is fully exact") {
  std::mt19937_64 rng(12);
  ModelEstimate truth = testing::random_model(8, 3, rng);
  truth.confusions[2] = ConfusionMatrix::identity(3);
  truth.confusions[6] = ConfusionMatrix::identity(3);
  const ModelEstimate est = multispa(population_cooccurrences(truth));
  const ModelMse r = model_mse(est, truth);
  CHECK(r.average <= 1e-10);
  const VectorXd d = relabel_classes(est, r.permutation).prior.probs();
  CHECK((d - truth.prior.probs()).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("relabeling annotators permutes the output") {
  SynthConfig sc;
  sc.n_items = 3000;
  sc.n_annotators = 8;
  sc.p = 0.6;
  sc.regime = Regime::kCase2;
  sc.seed = 4;
  const SynthData data = generate(sc);
  const std::vector<int> relabel = {5, 2, 7, 0, 3, 1, 6, 4};  // old -> new
  std::vector<Response> moved;
  for (Response r : data.dataset.responses()) {
    r.annotator = relabel[r.annotator - 1] + 1;
    moved.push_back(r);
  }
  const ModelEstimate a = multispa(data.dataset);
  const ModelEstimate b = multispa(LabelDataset(3000, 8, 3, moved));
  std::vector<ConfusionMatrix> back;
  for (int m = 0; m < 8; ++m) back.push_back(b.confusions[relabel[m]]);
  const ModelEstimate b_back(back, b.prior);
  CHECK(model_mse(b_back, a).average <= 1e-20);
}

TEST_CASE("error is non-increasing in the sample size (median of 20)") {
  std::vector<double> medians;
  for (int s : {250, 1000, 4000}) {
    std::vector<double> errs;
    for (int t = 0; t < 20; ++t) {
      SynthConfig sc;
      sc.n_items = s;
      sc.n_annotators = 10;
      sc.regime = Regime::kCase1;
      sc.seed = 500 + t;  // same model across sizes: confusions depend on seed only
      const SynthData data = generate(sc);
      errs.push_back(model_mse(multispa(data.dataset), data.truth).average);
    }
    std::nth_element(errs.begin(), errs.begin() + 10, errs.end());
    medians.push_back(errs[10]);
  }
  MESSAGE("median MSE at S=250/1000/4000: " << medians[0] << " " << medians[1] << " "
                                            << medians[2]);
  CHECK(medians[1] <= medians[0]);
  CHECK(medians[2] <= medians[1]);
}

TEST_CASE("more annotators help on the Case 2 protocol (median of 20)") {
  auto median_mse = [](int m_total) {
    std::vector<double> errs;
    for (int t = 0; t < 20; ++t) {
      SynthConfig sc;
      sc.n_items = 5000;
      sc.n_annotators = m_total;
      sc.regime = Regime::kCase2;
      sc.seed = 900 + t;
      const SynthData data = generate(sc);
      errs.push_back(model_mse(multispa(data.dataset), data.truth).average);
    }
    std::nth_element(errs.begin(), errs.begin() + 10, errs.end());
    return errs[10];
  };
  const double few = median_mse(5);
  const double many = median_mse(25);
  MESSAGE("median MSE at M=5: " << few << ", M=25: " << many);
  CHECK(many <= few);
}
