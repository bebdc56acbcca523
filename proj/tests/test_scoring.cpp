#include <doctest.h>

#include <stdexcept>
#include <vector>

#include "plsim/scoring.hpp"

using namespace plsim;
using scoring::BoxState;
using scoring::Detection;
using scoring::TripletConfig;

namespace {

Detection det(double p, double u, int class_id = 0) {
  Detection d;
  d.class_id = class_id;
  d.p = p;
  d.u = u;
  return d;
}

}  // namespace

TEST_SUITE("scoring") {

TEST_CASE("hybrid score is the stated blend") {
  CHECK(scoring::hybrid_score(0.9, 0.5, 0.3) == doctest::Approx(0.62).epsilon(1e-12));
  CHECK(scoring::hybrid_score(0.9, 0.5, 0.0) == 0.5);
  CHECK(scoring::hybrid_score(0.9, 0.5, 1.0) == 0.9);
  CHECK_THROWS_AS(scoring::hybrid_score(1.2, 0.5, 0.3), std::invalid_argument);
  CHECK_THROWS_AS(scoring::hybrid_score(0.5, -0.1, 0.3), std::invalid_argument);
  CHECK_THROWS_AS(scoring::hybrid_score(0.5, 0.5, 2.0), std::invalid_argument);
}

TEST_CASE("partition boundaries are inclusive on the upper side") {
  TripletConfig cfg;  // t_pos 0.6, t_neg 0.25
  cfg.phi = 0.0;      // o == u, so u drives the state directly
  const auto out = scoring::triplet_partition(
      {det(0.1, 0.6), det(0.1, 0.6 - 1e-9), det(0.1, 0.25), det(0.1, 0.25 - 1e-9)}, cfg);
  REQUIRE(out.size() == 3);
  CHECK(out[0].state == BoxState::Positive);
  CHECK(out[0].score == 0.6);
  CHECK(out[1].state == BoxState::Ignored);
  CHECK(out[2].state == BoxState::Ignored);
  CHECK(out[2].score == 0.25);
}

TEST_CASE("missing quality estimate falls back to confidence") {
  TripletConfig cfg;
  Detection d;
  d.p = 0.7;  // u empty: o = phi*p + (1-phi)*p = p regardless of phi
  const auto out = scoring::triplet_partition({d}, cfg);
  REQUIRE(out.size() == 1);
  CHECK(out[0].state == BoxState::Positive);
  CHECK(out[0].score == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("single-threshold mode removes the ignored band") {
  TripletConfig cfg;
  cfg.single_threshold = true;
  cfg.phi = 0.0;
  const auto out = scoring::triplet_partition({det(0.1, 0.7), det(0.1, 0.4)}, cfg);
  REQUIRE(out.size() == 1);
  CHECK(out[0].state == BoxState::Positive);
}

TEST_CASE("per-class overrides take precedence") {
  TripletConfig cfg;
  cfg.phi = 0.0;
  cfg.class_thresholds[1] = {0.8, 0.5};
  cfg.class_phi[2] = 1.0;  // class 2 trusts confidence alone
  const auto out = scoring::triplet_partition(
      {det(0.1, 0.7, 0), det(0.1, 0.7, 1), det(0.9, 0.0, 2)}, cfg);
  REQUIRE(out.size() == 3);
  CHECK(out[0].state == BoxState::Positive);  // default 0.6 threshold
  CHECK(out[1].state == BoxState::Ignored);   // class-1 threshold is 0.8
  CHECK(out[2].state == BoxState::Positive);  // phi=1 uses p=0.9
}

TEST_CASE("partition preserves order and zeroes the counter") {
  TripletConfig cfg;
  cfg.phi = 0.0;
  const auto out =
      scoring::triplet_partition({det(0.1, 0.9), det(0.1, 0.1), det(0.1, 0.3)}, cfg);
  REQUIRE(out.size() == 2);
  CHECK(out[0].score == doctest::Approx(0.9));
  CHECK(out[1].score == doctest::Approx(0.3));
  CHECK(out[0].cnt == 0);
  CHECK(out[1].cnt == 0);
}

TEST_CASE("state is monotone in the quality estimate") {
  TripletConfig cfg;
  int last = 0;  // 0 dropped, 1 ignored, 2 positive
  for (int i = 0; i <= 10000; ++i) {
    const double u = static_cast<double>(i) / 10000.0;
    const auto out = scoring::triplet_partition({det(0.5, u)}, cfg);
    const int state = out.empty() ? 0 : (out[0].state == BoxState::Ignored ? 1 : 2);
    REQUIRE(state >= last);
    last = state;
  }
  CHECK(last == 2);
}

TEST_CASE("configuration validation") {
  TripletConfig cfg;
  cfg.thresholds = {0.25, 0.6};  // t_pos < t_neg
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TripletConfig{};
  cfg.phi = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TripletConfig{};
  cfg.class_thresholds[0] = {0.5, 0.5};  // empty margin
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  CHECK_NOTHROW(TripletConfig{}.validate());
}

}  // TEST_SUITE
