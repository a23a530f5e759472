#include "core/policy.hpp"
#include "core/random_models.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace fogctl;
using fogctl::testing::s1;
using fogctl::testing::scalar;

TEST_CASE("full perfect law") {
  const GainSchedule s = backward_recursion_perfect(scalar(1), 1.0);
  const PolicyDecision off = act_full_perfect(s, 0, Vector::Constant(1, 5.0), false);
  CHECK_FALSE(off.applied);
  CHECK(off.u.norm() == 0.0);
  const PolicyDecision on = act_full_perfect(s, 0, Vector::Constant(1, 2.0), true);
  CHECK(on.applied);
  CHECK(on.u(0) == doctest::Approx(-1.0));
  CHECK(act_full_perfect(s, 0, Vector::Zero(1), true).u.norm() == 0.0);
  CHECK_THROWS_AS(act_full_perfect(s, 1, Vector::Zero(1), true), Error);
}

TEST_CASE("partial perfect law uses the filter mean") {
  const GainSchedule s = backward_recursion_perfect(scalar(1), 1.0, Observation::kPartial);
  const FilterState f{Vector::Ones(1), s1(0.5), 0, 0};
  CHECK(act_partial_perfect(s, 0, f, true).u(0) == doctest::Approx(-0.5));
  CHECK_FALSE(act_partial_perfect(s, 0, f, false).applied);
  const FilterState exact{Vector::Constant(1, 3.0), s1(0.0), 0, 0};
  CHECK(act_partial_perfect(s, 0, exact, true).u == act_full_perfect(s, 0, exact.mean, true).u);
  FilterState wrong = f;
  wrong.stage = 1;
  CHECK_THROWS_AS(act_partial_perfect(s, 0, wrong, true), Error);
}

TEST_CASE("full delayed law") {
  const LinearSystemModel m = scalar(6);
  const GainSchedule s = backward_recursion_delayed(m, 0.8, {1, 2});
  const DelayedInformation lambda{Vector::Ones(1), Vector::Ones(1)};
  const PolicyDecision offgrid = act_full_delayed(s, m, 5, lambda, true);
  CHECK_FALSE(offgrid.applied);
  CHECK(offgrid.u.norm() == 0.0);
  CHECK_FALSE(act_full_delayed(s, m, 3, lambda, false).applied);
  CHECK(act_full_delayed(s, m, 3, lambda, true).applied);
  CHECK_THROWS_AS(act_full_delayed(s, m, 3, std::nullopt, true), Error);
  // No control before stage M.
  CHECK_FALSE(act_full_delayed(s, m, 0, lambda, true).applied);

  const LinearSystemModel a2 = scalar(3, 2.0, 1.0);
  const GainSchedule s2 = backward_recursion_delayed(a2, 0.8, {1, 1});
  const PolicyDecision d = act_full_delayed(s2, a2, 2, DelayedInformation{Vector::Ones(1), Vector::Zero(1)}, true);
  CHECK(d.applied);
  CHECK(d.u(0) == doctest::Approx(-s2.V[2](0, 0) * 4.0));
}

TEST_CASE("partial delayed law") {
  const LinearSystemModel m = scalar(6);
  const GainSchedule s = backward_recursion_delayed(m, 0.8, {1, 2}, Observation::kPartial);
  const FilterState at3{Vector::Constant(1, 2.0), s1(0.1), 3, 0};
  CHECK(act_partial_delayed(s, 3, at3, true).u(0) == doctest::Approx(-2.0 * s.V[3](0, 0)));
  CHECK_FALSE(act_partial_delayed(s, 3, at3, false).applied);
  FilterState at5 = at3;
  at5.stage = 5;
  CHECK(act_partial_delayed(s, 5, at5, true).u.norm() == 0.0);
  CHECK_THROWS_AS(act_partial_delayed(s, 4, at3, true), Error);

  const GainSchedule full = backward_recursion_delayed(m, 0.8, {1, 2});
  const PolicyDecision a = act_partial_delayed(s, 3, FilterState{Vector::Constant(1, 4.0), s1(0.0), 3, 0}, true);
  const PolicyDecision b = act_full_delayed(full, m, 3, DelayedInformation{Vector::Constant(1, 4.0), Vector::Zero(1)},
                                            true);
  CHECK(a.u(0) == doctest::Approx(b.u(0)));
}

TEST_CASE("laws are linear and feasible") {
  std::mt19937_64 rng(41);
  for (int i = 0; i < 30; ++i) {
    const LinearSystemModel m = random_model(rng);
    const GainSchedule s = backward_recursion_perfect(m, random_unit(rng));
    const Vector x = random_vector(rng, m.state_dim);
    const double alpha = 3.0 * random_unit(rng) - 1.5;
    for (int k = 0; k < m.horizon; ++k) {
      const Vector u1 = act_full_perfect(s, k, x, true).u;
      const Vector u2 = act_full_perfect(s, k, alpha * x, true).u;
      CHECK((u2 - alpha * u1).norm() <= 1e-12 * std::max(1.0, u1.norm()));
      const PolicyDecision off = act_full_perfect(s, k, x, false);
      CHECK((off.applied || off.u.norm() == 0.0));
    }
  }
}

TEST_CASE("sandwich policy") {
  const LinearSystemModel m = scalar(3);
  const ControllerRegime r = sandwich_policy(m, {0.9, 0.3, 1.0}, std::nullopt, Observation::kFull);
  CHECK(r.gains.p_used == doctest::Approx(0.7));
  CHECK_THROWS_WITH_AS(sandwich_policy(m, {0.7, 0.3, 1.0}, std::nullopt, Observation::kFull),
                       "sandwich hypotheses violated: need p > 1 - q", Error);
  CHECK_THROWS_AS(sandwich_policy(m, {0.2, 0.3, 1.0}, std::nullopt, Observation::kFull), Error);
  const ControllerRegime d = sandwich_policy(m, {0.9, 0.3, 1.0}, DelayProfile{1, 1}, Observation::kPartial);
  CHECK(d.delayed());
  CHECK(d.gains.regime == Regime::kPartialDelayed);
}

TEST_CASE("controller construction") {
  const LinearSystemModel m = scalar(4);
  const ControllerRegime perfect = make_controller(m, 0.5, DelayProfile{0, 0}, Observation::kFull);
  CHECK_FALSE(perfect.delayed());
  CHECK(perfect.round_trip() == 0);
  CHECK(perfect.mode == ControllerMode::kPaperFaithful);
  CHECK(perfect.feedforward.empty());
  const ControllerRegime affine = make_controller(m, 0.5, DelayProfile{1, 1}, Observation::kFull,
                                                  ControllerMode::kAffineCompensated);
  CHECK(affine.round_trip() == 2);
  REQUIRE(affine.feedforward.size() == 4);
  for (const Vector& f : affine.feedforward) CHECK(f.norm() == 0.0);

  LinearSystemModel drifted = scalar(4);
  drifted.drift.assign(4, Vector::Ones(1));
  const ControllerRegime comp = make_controller(drifted, 1.0, std::nullopt, Observation::kFull,
                                                ControllerMode::kAffineCompensated);
  PolicyDecision d = with_feedforward(act_full_perfect(comp.gains, 3, Vector::Zero(1), true), comp, 3);
  // Last stage: minimize u^2 + (x + u + 1)^2 at x = 0, so u = -0.5.
  CHECK(d.u(0) == doctest::Approx(-0.5));
  d = with_feedforward(act_full_perfect(comp.gains, 3, Vector::Zero(1), false), comp, 3);
  CHECK(d.u.norm() == 0.0);
  CHECK(std::string(mode_name(ControllerMode::kAffineCompensated)) == "affine-compensated");
}
