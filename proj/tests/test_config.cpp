#include "core/config.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace fogctl;
using nlohmann::json;
using fogctl::testing::max_abs;

namespace {

json scalar_doc() {
  return json::parse(R"({"system": {"horizon": 3, "A": 1, "B": 1, "Q": 1, "R": 1, "W": 1, "x0": [1]},
                         "reliability": {"p": 1}})");
}

ErrorCode code_of(const json& doc) {
  try {
    parse_experiment(doc);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected parse failure");
  return ErrorCode::kInvalidArgument;
}

std::string message_of(const json& doc) {
  try {
    parse_experiment(doc);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("constant shorthand expands to every stage") {
  const Experiment e = parse_experiment(scalar_doc());
  const LinearSystemModel& m = e.require_model();
  CHECK(m.horizon == 3);
  CHECK(m.A.size() == 3);
  CHECK(m.Q.size() == 4);
  CHECK(m.Q[3](0, 0) == 1.0);
  CHECK(m.C[0](0, 0) == 1.0);
  CHECK(m.V[0](0, 0) == 0.0);
  CHECK(e.require_chain().q == doctest::Approx(0.0));
  CHECK(e.require_chain().tau0_on == 1.0);
  CHECK_FALSE(e.delay_or_none());
}

TEST_CASE("per-stage sequences and the terminal weight") {
  json doc = scalar_doc();
  doc["system"]["A"] = {{{1.0}}, {{2.0}}, {{3.0}}};
  doc["system"]["Q_N"] = {{5.0}};
  const LinearSystemModel m = *parse_experiment(doc).model;
  CHECK(m.A[2](0, 0) == 3.0);
  CHECK(m.Q[3](0, 0) == 5.0);

  doc["system"]["Q"] = {{{1.0}}, {{1.0}}, {{1.0}}, {{7.0}}};
  CHECK(code_of(doc) == ErrorCode::kConfig);
  doc["system"].erase("Q_N");
  CHECK(parse_experiment(doc).model->Q[3](0, 0) == 7.0);

  doc["system"]["A"] = {{{1.0}}, {{2.0}}};
  CHECK(code_of(doc) == ErrorCode::kConfig);
}

TEST_CASE("schema errors") {
  json doc = scalar_doc();
  doc["extra"] = 1;
  CHECK(code_of(doc) == ErrorCode::kConfig);

  doc = scalar_doc();
  doc["system"]["Z"] = 1;
  CHECK(message_of(doc).find("unknown key system.Z") != std::string::npos);

  doc = scalar_doc();
  doc["reliability"].erase("p");
  CHECK(message_of(doc) == "reliability.p required");

  doc = scalar_doc();
  doc.erase("reliability");
  const Experiment e = parse_experiment(doc);
  CHECK_THROWS_WITH_AS(e.require_chain(), "reliability.p required", Error);

  doc = scalar_doc();
  doc["reliability"]["p"] = 1.5;
  CHECK(code_of(doc) == ErrorCode::kConfig);

  doc = scalar_doc();
  doc["scenario"] = json::object();
  CHECK(code_of(doc) == ErrorCode::kConfig);

  doc = scalar_doc();
  doc["system"]["R"] = 0;
  CHECK(code_of(doc) == ErrorCode::kModel);

  doc = scalar_doc();
  doc["simulation"] = {{"mode", "something"}};
  CHECK(code_of(doc) == ErrorCode::kConfig);

  doc = scalar_doc();
  doc["verify"] = {{"inject", "other"}};
  CHECK(code_of(doc) == ErrorCode::kConfig);

  CHECK_THROWS_AS(parse_experiment(json::object()).require_model(), Error);
  CHECK_THROWS_AS(load_experiment("/nonexistent/fogctl.json"), Error);
}

TEST_CASE("asymmetric covariances are symmetrized with a warning") {
  json doc = scalar_doc();
  doc["system"]["A"] = {{1.0, 0.0}, {0.0, 1.0}};
  doc["system"]["B"] = {{1.0}, {0.0}};
  doc["system"]["Q"] = {{1.0, 0.0}, {0.0, 1.0}};
  doc["system"]["W"] = {{1.0, 0.2}, {0.0, 1.0}};
  doc["system"]["x0"] = {1.0, 0.0};
  const Experiment e = parse_experiment(doc);
  CHECK(e.model->W[0](0, 1) == doctest::Approx(0.1));
  CHECK(e.model->W[0](1, 0) == doctest::Approx(0.1));
  CHECK(e.warnings.size() >= 1);

  doc["system"]["W"] = {{1.0, 0.1}, {0.1, 1.0}};
  CHECK(parse_experiment(doc).warnings.empty());
}

TEST_CASE("delay, tau0 and observation forms") {
  json doc = scalar_doc();
  doc["delay"] = 3;
  Experiment e = parse_experiment(doc);
  CHECK(e.delay.forward == 2);
  CHECK(e.delay.backward == 1);
  doc["delay"] = {{"forward", 0}, {"backward", 2}};
  e = parse_experiment(doc);
  CHECK(e.delay.forward == 0);
  CHECK(e.delay.backward == 2);
  doc["reliability"]["tau0"] = {{"on_probability", 0.25}};
  CHECK(parse_experiment(doc).chain->tau0_on == 0.25);
  doc["reliability"]["tau0"] = 0;
  CHECK(parse_experiment(doc).chain->tau0_on == 0.0);
  doc["system"]["observation"] = "partial";
  doc["system"]["V"] = 0.5;
  e = parse_experiment(doc);
  CHECK(e.observation == Observation::kPartial);
  CHECK(e.model->V[1](0, 0) == 0.5);
}

TEST_CASE("scenario section builds the tracking model") {
  const json doc = json::parse(R"({"scenario": {"circle": {"stages": 8, "radius": 5, "center": [20, 0]},
                                                "approach": {"stages": 4}, "return": {"stages": 4}},
                                   "reliability": {"p": 0.75},
                                   "simulation": {"sweep": {"p": [0.25, 0.5], "delay": [0, 3]}}})");
  const Experiment e = parse_experiment(doc);
  REQUIRE(e.scenario);
  CHECK(e.model->horizon == 16);
  CHECK(e.model->state_dim == 4);
  CHECK(e.scenario->scenario.rho == doctest::Approx(0.005));
  REQUIRE(e.simulation.sweep);
  CHECK(e.simulation.sweep->p.size() == 2);
  CHECK(e.simulation.sweep->delays.size() == 2);
  CHECK(e.simulation.sweep->delays[1].forward == 2);
  CHECK(e.simulation.mode == ControllerMode::kPaperFaithful);
}

TEST_CASE("round trip through JSON") {
  json doc = json::parse(R"({"system": {"horizon": 2,
                                        "A": [[[0.3, 0.1], [0.0, 0.9]], [[1.0, 0.25], [0.125, 0.5]]],
                                        "B": [[1.0], [0.5]], "Q": [[2.0, 0.3], [0.3, 1.0]], "R": 0.7,
                                        "W": [[0.1, 0.0], [0.0, 0.2]], "C": [[1.0, 0.0]], "V": 0.3,
                                        "drift": [0.1, -0.2], "x0": [1.0, -1.0],
                                        "initial_covariance": [[0.5, 0.1], [0.1, 0.4]],
                                        "observation": "partial"},
                             "reliability": {"p": 0.8, "q": 0.5, "tau0": {"on_probability": 0.6}},
                             "delay": {"forward": 1, "backward": 1},
                             "simulation": {"replications": 17, "seed": 99, "record_traces": true,
                                            "mode": "affine-compensated"},
                             "verify": {"instances": 5, "seed": 3},
                             "placement": {"delta_t": 0.25,
                                           "catalog": [{"name": "edge", "latency": 0.1, "p": 0.95}]}})");
  const Experiment a = parse_experiment(doc);
  const Experiment b = parse_experiment(to_json(a));
  const LinearSystemModel& ma = *a.model;
  const LinearSystemModel& mb = *b.model;
  for (int k = 0; k < 2; ++k) {
    CHECK(max_abs(ma.A[k] - mb.A[k]) <= 1e-12);
    CHECK(max_abs(ma.B[k] - mb.B[k]) <= 1e-12);
    CHECK(max_abs(ma.C[k] - mb.C[k]) <= 1e-12);
    CHECK(max_abs(ma.R[k] - mb.R[k]) <= 1e-12);
    CHECK(max_abs(ma.W[k] - mb.W[k]) <= 1e-12);
    CHECK(max_abs(ma.V[k] - mb.V[k]) <= 1e-12);
    CHECK((ma.drift_at(k) - mb.drift_at(k)).norm() <= 1e-12);
  }
  for (int k = 0; k <= 2; ++k) CHECK(max_abs(ma.Q[k] - mb.Q[k]) <= 1e-12);
  CHECK(max_abs(ma.initial_covariance - mb.initial_covariance) <= 1e-12);
  CHECK((a.x0 - b.x0).norm() <= 1e-12);
  CHECK(a.chain->p == b.chain->p);
  CHECK(a.chain->q == b.chain->q);
  CHECK(a.chain->tau0_on == b.chain->tau0_on);
  CHECK(a.delay.forward == b.delay.forward);
  CHECK(a.delay.backward == b.delay.backward);
  CHECK(a.observation == b.observation);
  CHECK(b.simulation.replications == 17);
  CHECK(b.simulation.seed == 99);
  CHECK(b.simulation.record_traces);
  CHECK(b.simulation.mode == ControllerMode::kAffineCompensated);
  CHECK(b.verify.instances == 5);
  CHECK(b.placement.delta_t == 0.25);
  REQUIRE(b.placement.catalog.size() == 1);
  CHECK(b.placement.catalog[0].name == "edge");
  CHECK(b.placement.catalog[0].p == 0.95);
  CHECK(to_json(b) == to_json(a));

  const Experiment drone = parse_experiment(json::parse(R"({"scenario": {"alpha": 0.2, "start": [1, 2]},
                                                            "reliability": {"p": 0.5}})"));
  const Experiment drone2 = parse_experiment(to_json(drone));
  CHECK(max_abs(drone.model->W[0] - drone2.model->W[0]) <= 1e-12);
  CHECK(drone2.scenario->scenario.alpha == 0.2);
  CHECK(to_json(drone) == to_json(drone2));
}

TEST_CASE("default catalog") {
  const auto c = default_catalog();
  REQUIRE(c.size() == 5);
  CHECK(c.front().latency_seconds == 0.06);
  CHECK(c.back().name == "AWS Tokyo");
  CHECK(c.back().latency_seconds == 1.3);
}
