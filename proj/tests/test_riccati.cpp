#include "core/estimation.hpp"
#include "core/oracle.hpp"
#include "core/random_models.hpp"
#include "core/riccati.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace fogctl;
using fogctl::testing::max_abs;
using fogctl::testing::rel;
using fogctl::testing::scalar;

namespace {

void check_schedule_shape(const GainSchedule& s, const LinearSystemModel& m) {
  const int N = m.horizon;
  REQUIRE(static_cast<int>(s.K.size()) == N + 1);
  CHECK(s.K[N] == m.Q[N]);
  for (const auto* seq : {&s.K, &s.L, &s.Lambda, &s.P}) {
    for (const Matrix& x : *seq) {
      CHECK(max_abs(x - x.transpose()) <= 1e-9);
      CHECK(min_eigenvalue(symmetrized(x)) >= -1e-9);
    }
  }
}

}  // namespace

TEST_CASE("scalar perfect-match example") {
  const LinearSystemModel m = scalar(1);
  const GainSchedule s = backward_recursion_perfect(m, 1.0);
  CHECK(s.V[0](0, 0) == doctest::Approx(0.5));
  CHECK(s.L[0](0, 0) == doctest::Approx(2.0));
  CHECK(s.Lambda[0](0, 0) == doctest::Approx(0.5));
  CHECK(s.K[0](0, 0) == doctest::Approx(1.5));
  const CostBreakdown c = min_cost_full_perfect(s, m, Vector::Ones(1), 1.0);
  CHECK(c.total == doctest::Approx(2.5));
  CHECK(c.initial_state_term == doctest::Approx(1.5));
  CHECK(c.disturbance_trace_sum == doctest::Approx(1.0));
  CHECK(c.estimation_penalty == 0.0);

  const GainSchedule never = backward_recursion_perfect(m, 0.0);
  CHECK(never.K[0](0, 0) == doctest::Approx(2.0));
  CHECK(never.K[0] == never.L[0]);
}

TEST_CASE("tau0 changes the perfect-match cost by x0' Lambda_0 x0") {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 20; ++i) {
    const LinearSystemModel m = random_model(rng);
    const GainSchedule s = backward_recursion_perfect(m, random_unit(rng));
    const Vector x0 = random_vector(rng, m.state_dim);
    const double off = min_cost_full_perfect(s, m, x0, 0.0).total;
    const double on = min_cost_full_perfect(s, m, x0, 1.0).total;
    CHECK(rel(off - on, x0.dot(s.Lambda[0] * x0)) <= 1e-9);
  }
}

TEST_CASE("zero state and zero noise cost nothing") {
  LinearSystemModel m = scalar(4);
  for (auto& w : m.W) w.setZero();
  const Vector x0 = Vector::Zero(1);
  CHECK(min_cost_full_perfect(backward_recursion_perfect(m, 0.6), m, x0, 1.0).total == 0.0);
  CHECK(min_cost_full_delayed(backward_recursion_delayed(m, 0.6, {1, 1}), m, x0).total == 0.0);
}

TEST_CASE("uncontrollable plant has no Lambda") {
  std::mt19937_64 rng(22);
  LinearSystemModel m = random_model(rng);
  for (auto& b : m.B) b.setZero();
  for (double p : {0.0, 0.4, 1.0}) {
    const GainSchedule s = backward_recursion_perfect(m, p);
    for (int k = 0; k < m.horizon; ++k) {
      CHECK(max_abs(s.Lambda[k]) == 0.0);
      CHECK(max_abs(s.K[k] - s.L[k]) == 0.0);
    }
  }
}

TEST_CASE("schedules are symmetric PSD with the documented K identity") {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 60; ++i) {
    const LinearSystemModel m = random_model(rng);
    const double p = random_unit(rng);
    const GainSchedule perfect = backward_recursion_perfect(m, p);
    check_schedule_shape(perfect, m);
    CHECK(perfect.P.empty());
    for (int k = 0; k < m.horizon; ++k) CHECK(max_abs(perfect.K[k] - (perfect.L[k] - p * perfect.Lambda[k])) <= 1e-9);

    const DelayProfile d = random_delay(rng, m.horizon);
    const GainSchedule delayed = backward_recursion_delayed(m, p, d);
    check_schedule_shape(delayed, m);
    const int M = d.total();
    const int cM = d.control_rounds(m.horizon) * M;
    REQUIRE(static_cast<int>(delayed.P.size()) == cM + 1);
    for (int k = 0; k < m.horizon; ++k) {
      const Matrix expect = k % M == 0 ? Matrix(delayed.L[k] - p * delayed.Lambda[k]) : delayed.L[k];
      CHECK(max_abs(delayed.K[k] - expect) <= 1e-9);
    }
    CHECK(max_abs(delayed.P[cM] - delayed.Lambda[cM]) <= 1e-12);
    for (int k = cM - 1; k >= 0; --k) {
      const Matrix expect = k % M == 0 ? delayed.Lambda[k]
                                        : Matrix(m.A[k].transpose() * delayed.P[k + 1] * m.A[k]);
      CHECK(max_abs(delayed.P[k] - expect) <= 1e-9 * std::max(1.0, max_abs(expect)));
    }
  }
}

TEST_CASE("M = 1 delayed recursion degenerates to the perfect match") {
  std::mt19937_64 rng(24);
  for (int i = 0; i < 20; ++i) {
    const LinearSystemModel m = random_model(rng);
    const double p = random_unit(rng);
    const GainSchedule perfect = backward_recursion_perfect(m, p);
    const GainSchedule d = backward_recursion_delayed(m, p, {0, 1});
    for (int k = 0; k <= m.horizon; ++k) CHECK(max_abs(perfect.K[k] - d.K[k]) <= 1e-12);
    for (size_t k = 0; k < d.P.size(); ++k) CHECK(max_abs(d.P[k] - d.Lambda[k]) <= 1e-12);
  }
}

TEST_CASE("small delayed scalar examples") {
  LinearSystemModel m = scalar(2);
  GainSchedule s = backward_recursion_delayed(m, 0.7, {1, 1});
  CHECK(s.control_rounds() == 0);
  CHECK(s.P.size() == 1);
  CHECK(s.K[1] == s.L[1]);
  const GainSchedule open = backward_recursion_perfect(m, 0.0);
  double open_loop = open.L[0](0, 0);
  for (int k = 0; k < 2; ++k) open_loop += open.K[k + 1](0, 0);
  CHECK(min_cost_full_delayed(s, m, Vector::Ones(1)).total == doctest::Approx(open_loop));
  CHECK(min_cost_full_delayed(s, m, Vector::Ones(1)).total ==
        doctest::Approx(brute_force_min_cost(m, ReliabilityChain::symmetric(0.7), DelayProfile{1, 1}, Vector::Ones(1))));

  m = scalar(3);
  s = backward_recursion_delayed(m, 0.7, {1, 1});
  CHECK(s.control_rounds() == 1);
  CHECK(s.K[2](0, 0) == doctest::Approx(s.L[2](0, 0) - 0.7 * s.Lambda[2](0, 0)));
  CHECK(s.P[2] == s.Lambda[2]);
  CHECK(s.P[1](0, 0) == doctest::Approx(s.P[2](0, 0)));
  CHECK(s.P[0] == s.Lambda[0]);
  CHECK(min_cost_full_delayed(s, m, Vector::Ones(1)).total ==
        doctest::Approx(brute_force_min_cost(m, ReliabilityChain::symmetric(0.7), DelayProfile{1, 1}, Vector::Ones(1)))
            .epsilon(1e-12));
}

TEST_CASE("delayed cost with p = 0 is open loop") {
  std::mt19937_64 rng(25);
  const LinearSystemModel m = random_model(rng);
  const DelayProfile d = random_delay(rng, m.horizon);
  const GainSchedule s = backward_recursion_delayed(m, 0.0, d);
  const CostBreakdown c = min_cost_full_delayed(s, m, Vector::Ones(m.state_dim));
  CHECK(c.collateral_trace_sum == 0.0);
  for (int k = 0; k <= m.horizon; ++k) {
    if (k < m.horizon) CHECK(max_abs(s.K[k] - s.L[k]) == 0.0);
  }
}

TEST_CASE("horizon shorter than the round trip is rejected") {
  CHECK_THROWS_WITH_AS(backward_recursion_delayed(scalar(2), 0.5, {2, 1}), "horizon shorter than round-trip delay",
                       Error);
  CHECK_THROWS_AS(backward_recursion_perfect(scalar(2), 1.5), Error);
}

TEST_CASE("regime mismatches are errors") {
  const LinearSystemModel m = scalar(3);
  const GainSchedule perfect = backward_recursion_perfect(m, 0.5);
  const GainSchedule delayed = backward_recursion_delayed(m, 0.5, {1, 1});
  try {
    min_cost_full_delayed(perfect, m, Vector::Ones(1));
    FAIL("expected a regime mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kRegimeMismatch);
  }
  CHECK_THROWS_AS(min_cost_full_perfect(delayed, m, Vector::Ones(1), 1.0), Error);
  CHECK_THROWS_AS(delayed_residual_weights(perfect, m), Error);
  const GainSchedule partial = backward_recursion_perfect(m, 0.5, Observation::kPartial);
  CHECK_THROWS_AS(min_cost_full_perfect(partial, m, Vector::Ones(1), 1.0), Error);
}

TEST_CASE("cost grows monotonically as p falls") {
  std::mt19937_64 rng(26);
  for (int i = 0; i < 40; ++i) {
    const LinearSystemModel m = random_model(rng);
    double p1 = random_unit(rng), p2 = random_unit(rng);
    if (p1 > p2) std::swap(p1, p2);
    const GainSchedule lo = backward_recursion_perfect(m, p1);
    const GainSchedule hi = backward_recursion_perfect(m, p2);
    for (int k = 0; k <= m.horizon; ++k) {
      CHECK(min_eigenvalue(symmetrized(lo.K[k] - hi.K[k])) >= -1e-9 * std::max(1.0, max_abs(lo.K[k])));
    }
  }
}

TEST_CASE("p = 1 matches an independent Riccati recursion") {
  std::mt19937_64 rng(27);
  for (int i = 0; i < 30; ++i) {
    const LinearSystemModel m = random_model(rng);
    const GainSchedule s = backward_recursion_perfect(m, 1.0);
    Matrix k = m.Q[m.horizon];
    for (int j = m.horizon - 1; j >= 0; --j) {
      const Matrix& a = m.A[j];
      const Matrix& b = m.B[j];
      const Matrix gain = (m.R[j] + b.transpose() * k * b).inverse() * b.transpose() * k * a;
      k = m.Q[j] + a.transpose() * k * a - a.transpose() * k * b * gain;
      k = 0.5 * (k + k.transpose());
      CHECK(max_abs(s.K[j] - k) <= 1e-9 * std::max(1.0, max_abs(k)));
    }
  }
}

TEST_CASE("delay never helps at a fixed p") {
  std::mt19937_64 rng(28);
  for (int i = 0; i < 40; ++i) {
    const LinearSystemModel m = random_model(rng);
    const double p = random_unit(rng);
    const Vector x0 = random_vector(rng, m.state_dim);
    const CostBreakdown perfect = min_cost_full_perfect(backward_recursion_perfect(m, p), m, x0, 0.0);
    const CostBreakdown delayed =
        min_cost_full_delayed(backward_recursion_delayed(m, p, random_delay(rng, m.horizon)), m, x0);
    CHECK(delayed.collateral_trace_sum >= 0.0);
    CHECK(delayed.total >= perfect.total - 1e-9 * std::max(1.0, perfect.total));
  }
}

TEST_CASE("exact observation collapses the partial-observation cost") {
  std::mt19937_64 rng(29);
  for (int i = 0; i < 20; ++i) {
    const LinearSystemModel m = random_model(rng);
    const double p = random_unit(rng);
    const Vector x0 = random_vector(rng, m.state_dim);
    const ReliabilityChain chain = ReliabilityChain::symmetric(p);
    const GainSchedule full = backward_recursion_perfect(m, p);
    const GainSchedule part = backward_recursion_perfect(m, p, Observation::kPartial);
    const EstimationPenalty pen = expected_estimation_penalty(m, chain, part);
    CHECK(pen.total == doctest::Approx(0.0));
    const CostBreakdown c = min_cost_partial_perfect(part, m, x0, 1.0, pen);
    CHECK(rel(c.total, min_cost_full_perfect(full, m, x0, 1.0).total) <= 1e-12);

    const DelayProfile d = random_delay(rng, m.horizon);
    const GainSchedule dpart = backward_recursion_delayed(m, p, d, Observation::kPartial);
    const EstimationPenalty dpen = expected_estimation_penalty(m, chain, dpart);
    CHECK(dpen.total == doctest::Approx(0.0));
    CHECK(rel(min_cost_partial_delayed(dpart, m, x0, dpen).total,
              min_cost_full_delayed(backward_recursion_delayed(m, p, d), m, x0).total) <= 1e-12);
  }
}

TEST_CASE("penalty of the wrong length is rejected") {
  const LinearSystemModel m = scalar(3);
  const GainSchedule part = backward_recursion_perfect(m, 0.5, Observation::kPartial);
  EstimationPenalty bad;
  bad.per_stage = {0.0};
  CHECK_THROWS_WITH_AS(min_cost_partial_perfect(part, m, Vector::Ones(1), 1.0, bad), "penalty horizon mismatch", Error);
}
