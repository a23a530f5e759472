#include "core/estimation.hpp"
#include "core/random_models.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace fogctl;
using fogctl::testing::max_abs;
using fogctl::testing::s1;
using fogctl::testing::scalar;

namespace {

LinearSystemModel noisy_scalar(int N, double a, double w, double v) {
  LinearSystemModel m = scalar(N, a, w);
  m.V.assign(static_cast<size_t>(N), s1(v));
  return validate_model(m);
}

}  // namespace

TEST_CASE("kalman predict") {
  LinearSystemModel m = LinearSystemModel::constant(2, Matrix::Identity(2, 2), Matrix::Identity(2, 2),
                                                    Matrix::Identity(2, 2), Matrix::Identity(2, 2),
                                                    Matrix::Zero(2, 2), Matrix::Identity(2, 2));
  FilterState st{Vector::Zero(2), Matrix::Identity(2, 2), 0, std::nullopt};
  FilterState out = kalman_predict(st, m, Vector::Zero(2), Vector::Zero(2));
  CHECK(out.stage == 1);
  CHECK(out.mean == st.mean);
  CHECK(out.covariance == st.covariance);

  out = kalman_predict(st, m, Vector::Unit(2, 0), Vector::Zero(2));
  CHECK(out.mean(0) == 1.0);
  CHECK(out.mean(1) == 0.0);

  const LinearSystemModel sc = scalar(1, 2.0, 3.0);
  const FilterState one{Vector::Zero(1), s1(1.0), 0, std::nullopt};
  CHECK(kalman_predict(one, sc, Vector::Zero(1), Vector::Zero(1)).covariance(0, 0) == doctest::Approx(7.0));
  CHECK(kalman_predict(one, sc, Vector::Zero(1), Vector::Ones(1)).mean(0) == doctest::Approx(1.0));
  FilterState past = one;
  past.stage = 1;
  CHECK_THROWS_AS(kalman_predict(past, sc, Vector::Zero(1), Vector::Zero(1)), Error);
}

TEST_CASE("kalman update") {
  const LinearSystemModel m = noisy_scalar(2, 1.0, 1.0, 1.0);
  const FilterState st{Vector::Zero(1), s1(1.0), 0, std::nullopt};
  const FilterState out = kalman_update(st, m, Vector::Constant(1, 2.0));
  CHECK(out.mean(0) == doctest::Approx(1.0));
  CHECK(out.covariance(0, 0) == doctest::Approx(0.5));
  CHECK(out.last_update_stage == 0);

  LinearSystemModel exact = LinearSystemModel::constant(2, Matrix::Identity(2, 2), Matrix::Identity(2, 2),
                                                        Matrix::Identity(2, 2), Matrix::Identity(2, 2),
                                                        Matrix::Identity(2, 2), Matrix::Identity(2, 2));
  const FilterState prior{Vector::Zero(2), 2.0 * Matrix::Identity(2, 2), 0, std::nullopt};
  const Vector z = Vector::LinSpaced(2, 1.0, 2.0);
  const FilterState sharp = kalman_update(prior, exact, z);
  CHECK((sharp.mean - z).norm() <= 1e-12);
  CHECK(max_abs(sharp.covariance) <= 1e-12);

  LinearSystemModel blind = exact;
  for (auto& c : blind.C) c.setZero();
  const FilterState same = kalman_update(prior, blind, z);
  CHECK((same.mean - prior.mean).norm() == 0.0);
  CHECK(max_abs(same.covariance - prior.covariance) <= 1e-15);
}

TEST_CASE("filter covariance stays PSD and updates never hurt") {
  std::mt19937_64 rng(31);
  RandomModelSpec spec;
  spec.partial = true;
  for (int i = 0; i < 40; ++i) {
    const LinearSystemModel m = random_model(rng, spec);
    Matrix cov = random_psd(rng, m.state_dim, 1 + static_cast<int>(rng() % m.state_dim));
    for (int k = 0; k < m.horizon; ++k) {
      const Matrix updated = update_covariance(cov, m, k);
      CHECK(min_eigenvalue(symmetrized(updated)) >= -1e-9);
      CHECK(min_eigenvalue(symmetrized(cov - updated)) >= -1e-9);
      cov = predict_covariance(rng() % 2 ? updated : cov, m, k);
      CHECK(min_eigenvalue(symmetrized(cov)) >= -1e-9);
    }
  }
}

TEST_CASE("covariance-only halves agree with the full filter") {
  std::mt19937_64 rng(32);
  RandomModelSpec spec;
  spec.partial = true;
  const LinearSystemModel m = random_model(rng, spec);
  FilterState st{Vector::Zero(m.state_dim), random_pd(rng, m.state_dim), 0, std::nullopt};
  const FilterState up = kalman_update(st, m, random_vector(rng, m.obs_dim));
  CHECK(max_abs(up.covariance - update_covariance(st.covariance, m, 0)) <= 1e-12);
  const FilterState pr = kalman_predict(up, m, Vector::Zero(m.control_dim), Vector::Zero(m.state_dim));
  CHECK(max_abs(pr.covariance - predict_covariance(up.covariance, m, 0)) <= 1e-12);
}

TEST_CASE("delayed predictor") {
  LinearSystemModel id = LinearSystemModel::constant(3, Matrix::Identity(2, 2), Matrix::Identity(2, 2),
                                                     Matrix::Identity(2, 2), Matrix::Identity(2, 2),
                                                     Matrix::Identity(2, 2), Matrix::Identity(2, 2));
  const Vector x = Vector::LinSpaced(2, 1.0, 3.0);
  const Vector u = Vector::LinSpaced(2, -1.0, 0.5);
  CHECK((delayed_predictor(x, u, id, 1, 1) - (x + u)).norm() == 0.0);

  LinearSystemModel two = scalar(3, 2.0, 1.0);
  CHECK(delayed_predictor(Vector::Ones(1), Vector::Ones(1), two, 2, 2)(0) == doctest::Approx(6.0));
  LinearSystemModel noisy = scalar(3, 2.0, 17.0);
  CHECK(delayed_predictor(Vector::Ones(1), Vector::Ones(1), noisy, 2, 2)(0) == doctest::Approx(6.0));

  LinearSystemModel drifted = scalar(3, 2.0, 1.0);
  drifted.drift = {s1(1.0), s1(10.0), s1(100.0)};
  // 2 * (2*1 + 1 + 1) + 10 = 18
  CHECK(delayed_predictor(Vector::Ones(1), Vector::Ones(1), drifted, 2, 2)(0) == doctest::Approx(18.0));
  CHECK(delayed_predictor(Vector::Ones(1), Vector::Ones(1), drifted, 2, 2, false)(0) == doctest::Approx(6.0));

  CHECK_THROWS_AS(delayed_predictor(Vector::Ones(1), Vector::Ones(1), two, 1, 2), Error);
}

TEST_CASE("estimation penalty edge cases") {
  const LinearSystemModel exact = scalar(4);
  const GainSchedule s = backward_recursion_perfect(exact, 0.6, Observation::kPartial);
  for (PenaltyMethod method : {PenaltyMethod::kExactEnumeration, PenaltyMethod::kMonteCarlo}) {
    const EstimationPenalty pen = expected_estimation_penalty(exact, ReliabilityChain::symmetric(0.6), s,
                                                              {method, 1000, 5});
    CHECK(pen.total == doctest::Approx(0.0));
    CHECK(pen.per_stage.size() == 4);
  }

  const LinearSystemModel noisy = noisy_scalar(4, 1.1, 0.5, 2.0);
  const GainSchedule ns = backward_recursion_perfect(noisy, 1.0, Observation::kPartial);
  const EstimationPenalty pen = expected_estimation_penalty(noisy, ReliabilityChain{1.0, 0.0, 1.0}, ns);
  double cov = 0.0, expected = 0.0;
  for (int k = 0; k < 4; ++k) {
    cov = cov / (1.0 + cov / 2.0) * 1.0;  // scalar update with C = 1, V = 2
    expected += ns.Lambda[k](0, 0) * cov;
    cov = 1.21 * cov + 0.5;
  }
  CHECK(pen.total == doctest::Approx(expected).epsilon(1e-12));
  for (double v : pen.per_stage) CHECK(v >= 0.0);

  CHECK_THROWS_AS(expected_estimation_penalty(noisy, ReliabilityChain{1.0, 0.0, 1.0},
                                              backward_recursion_perfect(noisy, 1.0)),
                  Error);
  const LinearSystemModel long_model = noisy_scalar(21, 1.0, 1.0, 1.0);
  CHECK_THROWS_AS(expected_estimation_penalty(long_model, ReliabilityChain::symmetric(0.5),
                                              backward_recursion_perfect(long_model, 0.5, Observation::kPartial)),
                  Error);
}

TEST_CASE("enumeration and Monte Carlo penalties agree") {
  const LinearSystemModel m = noisy_scalar(4, 1.2, 1.0, 1.5);
  const ReliabilityChain chain = ReliabilityChain::symmetric(0.6, 0.5);
  const GainSchedule s = backward_recursion_perfect(m, 0.6, Observation::kPartial);
  const EstimationPenalty exact = expected_estimation_penalty(m, chain, s);
  const EstimationPenalty mc = expected_estimation_penalty(m, chain, s, {PenaltyMethod::kMonteCarlo, 100000, 9});
  CHECK(exact.method == PenaltyMethod::kExactEnumeration);
  CHECK(exact.standard_error == 0.0);
  CHECK(mc.method == PenaltyMethod::kMonteCarlo);
  CHECK(mc.standard_error > 0.0);
  CHECK(std::abs(exact.total - mc.total) <= 3.0 * mc.standard_error);

  const GainSchedule d = backward_recursion_delayed(m, 0.6, {1, 1}, Observation::kPartial);
  const EstimationPenalty dexact = expected_estimation_penalty(m, chain, d);
  const EstimationPenalty dmc = expected_estimation_penalty(m, chain, d, {PenaltyMethod::kMonteCarlo, 100000, 9});
  CHECK(std::abs(dexact.total - dmc.total) <= 3.0 * std::max(dmc.standard_error, 1e-12));
}

TEST_CASE("delayed penalty has an empty sum when c <= 1") {
  const LinearSystemModel m = noisy_scalar(3, 1.2, 1.0, 1.5);
  const GainSchedule d = backward_recursion_delayed(m, 0.6, {1, 1}, Observation::kPartial);
  REQUIRE(d.control_rounds() == 1);
  const EstimationPenalty pen = expected_estimation_penalty(m, ReliabilityChain::symmetric(0.6), d);
  CHECK(pen.per_stage.size() == 1);
  CHECK(pen.total == 0.0);
}
