#include "mmes/analysis.hpp"
#include "mmes/protocol.hpp"
#include "mmes/rotation.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mmes;

namespace {

ProtocolConfig config_for(int n, int repeats = 25, int rounds = 3) {
  ProtocolConfig c;
  c.n_atoms = n;
  c.max_repeats = repeats;
  c.max_rounds = rounds;
  return c;
}

double residual_after_zero_projector(const TwoModeState& s, MeasurementBasis basis) {
  const auto p = projector_apply(s, make_projector(0, 1, basis, s.n_atoms()));
  return (p.amplitudes() - s.amplitudes()).norm();
}

}  // namespace

TEST(AdaptiveAngle, Line) {
  EXPECT_EQ(adaptive_angle(0, 10), 0.0);
  EXPECT_NEAR(adaptive_angle(5, 10), M_PI / 2, 1e-15);
  EXPECT_NEAR(adaptive_angle(10, 10), M_PI, 1e-15);
  EXPECT_THROW(adaptive_angle(11, 10), std::out_of_range);
  EXPECT_THROW(adaptive_angle(-1, 10), std::out_of_range);
}

TEST(AngleRule, TableValidation) {
  EXPECT_THROW(AngleRule::table({0.1, 0.2}), std::invalid_argument);
  const auto t = AngleRule::table({0.0, 0.5, 1.0});
  EXPECT_EQ(t(2, 2), 1.0);
  EXPECT_THROW(t(3, 3), std::out_of_range);
  ProtocolConfig c = config_for(4);
  c.angle_rule = t;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(ProtocolConfig, RejectsBadCaps) {
  ProtocolConfig c = config_for(4, 0);
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = config_for(4, 3, 0);
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = config_for(0);
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Correction, ZeroIsIdentityAndUnitary) {
  const FockBasis b(6);
  const auto psi = x_polarized_state(b);
  const MeasurementRecord zero{make_projector(0, 1, MeasurementBasis::z(), 6), 0.3};
  EXPECT_EQ((apply_correction(psi, zero, MeasurementBasis::z()).amplitudes() - psi.amplitudes()).norm(), 0.0);
  for (int delta = 1; delta <= 6; ++delta) {
    for (auto basis : {MeasurementBasis::z(), MeasurementBasis::x()}) {
      const MeasurementRecord rec{make_projector(delta, 1, basis, 6), 0.1};
      EXPECT_NEAR(apply_correction(psi, rec, basis).norm(), 1.0, 1e-12);
    }
  }
}

TEST(Correction, BasisMismatchIsOrderError) {
  const auto psi = x_polarized_state(FockBasis(4));
  const MeasurementRecord rec{make_projector(2, 1, MeasurementBasis::z(), 4), 0.2};
  EXPECT_THROW(apply_correction(psi, rec, MeasurementBasis::x()), ProtocolOrderError);
}

TEST(Correction, ActsOnFirstEnsembleOnly) {
  const FockBasis b(5);
  const auto psi = fock_state(b, 4, 2);
  const MeasurementRecord rec{make_projector(2, 1, MeasurementBasis::z(), 5), 1.0};
  const auto out = apply_correction(psi, rec, MeasurementBasis::z());
  const Eigen::MatrixXd r = y_rotation_matrix(-adaptive_angle(2, 5), b);
  for (int k1 = 0; k1 <= 5; ++k1)
    for (int k2 = 0; k2 <= 5; ++k2)
      EXPECT_NEAR(std::abs(out.amplitude(k1, k2) - (k2 == 2 ? r(k1, 4) : 0.0)), 0.0, 1e-14);
}

TEST(Correction, ElementPeaksOnLineAtHalfFilling) {
  // |<Delta| e^{i S^y theta/2} |0>| is maximal where sin^2(theta/2) = Delta/N;
  // at Delta = N/2 that is exactly pi Delta / N.
  const int n = 10;
  std::vector<double> thetas;
  for (int i = 0; i <= 720; ++i) thetas.push_back(M_PI * i / 720);
  const Eigen::MatrixXd grid = correction_element_grid(n, 0, thetas);
  Eigen::Index best;
  grid.row(5).maxCoeff(&best);
  EXPECT_NEAR(thetas[best], adaptive_angle(5, n), M_PI / 720);
  grid.row(0).maxCoeff(&best);
  EXPECT_EQ(best, 0);
}

TEST(RepeatUntilSuccess, MmesStopsImmediately) {
  const auto m = mmes_state(FockBasis(8));
  Rng rng = make_stream(0, 0);
  const auto [out, rec] = repeat_until_success(m, MeasurementBasis::z(), config_for(8), rng);
  ASSERT_EQ(rec.measurements.size(), 1u);
  EXPECT_EQ(rec.measurements[0].spec.delta, 0);
  EXPECT_NEAR(rec.measurements[0].born_probability, 1.0, 1e-12);
  EXPECT_FALSE(rec.hit_cap);
  EXPECT_LT((out.amplitudes() - m.amplitudes()).norm(), 1e-12);
}

TEST(RepeatUntilSuccess, TerminalStateIsZeroFixedPoint) {
  const auto psi = x_polarized_state(FockBasis(10));
  int within_five = 0;
  for (std::uint64_t i = 0; i < 200; ++i) {
    Rng rng = make_stream(5, i);
    for (auto basis : {MeasurementBasis::z(), MeasurementBasis::x()}) {
      const auto [out, rec] = repeat_until_success(psi, basis, config_for(10), rng);
      if (rec.hit_cap) continue;
      EXPECT_EQ(rec.measurements.back().spec.delta, 0);
      EXPECT_EQ(rec.corrections.size() + 1, rec.measurements.size());
      EXPECT_LT(residual_after_zero_projector(out, basis), 1e-10);
      EXPECT_TRUE(out.is_normalized(1e-10));
      if (basis == MeasurementBasis::z() && rec.measurements.size() <= 5) ++within_five;
    }
  }
  EXPECT_GT(within_five, 120);
}

TEST(RepeatUntilSuccess, CapIsFlagged) {
  const auto psi = x_polarized_state(FockBasis(10));
  bool saw_cap = false;
  for (std::uint64_t i = 0; i < 50 && !saw_cap; ++i) {
    Rng rng = make_stream(1, i);
    const auto [out, rec] = repeat_until_success(psi, MeasurementBasis::z(), config_for(10, 1), rng);
    EXPECT_EQ(rec.measurements.size(), 1u);
    if (rec.measurements[0].spec.delta != 0) {
      saw_cap = true;
      EXPECT_TRUE(rec.hit_cap);
      EXPECT_EQ(rec.corrections.size(), 1u);
      EXPECT_NEAR(out.norm(), 1.0, 1e-12);
    }
  }
  EXPECT_TRUE(saw_cap);
}

TEST(RepeatUntilSuccess, RejectsUnnormalized) {
  const auto psi = x_polarized_state(FockBasis(3)).scaled(2.0);
  Rng rng = make_stream(0, 0);
  EXPECT_THROW(repeat_until_success(psi, MeasurementBasis::z(), config_for(3), rng), std::invalid_argument);
}

TEST(RunProtocol, MmesIsFixedPoint) {
  const auto m = mmes_state(FockBasis(10));
  Rng rng = make_stream(3, 0);
  const auto rec = run_protocol(m, config_for(10), rng);
  ASSERT_TRUE(rec.converged_at.has_value());
  EXPECT_EQ(*rec.converged_at, 1);
  EXPECT_NEAR(rec.terminal_fidelity, 1.0, 1e-12);
  EXPECT_NEAR(rec.probability, 1.0, 1e-12);
  for (const auto& round : rec.rounds)
    for (const auto& sub : round.sequences) {
      ASSERT_EQ(sub.measurements.size(), 1u);
      EXPECT_EQ(sub.measurements[0].spec.delta, 0);
    }
  EXPECT_LT((rec.terminal.amplitudes() - m.amplitudes()).norm(), 1e-12);
}

TEST(RunProtocol, ProbabilityEqualsReplayedNorm) {
  for (auto model : {SignModel::random_parity, SignModel::all_plus, SignModel::all_minus}) {
    ProtocolConfig c = config_for(6, 6, 3);
    c.sign_model = model;
    const auto psi = x_polarized_state(FockBasis(6));
    for (std::uint64_t i = 0; i < 20; ++i) {
      Rng rng = make_stream(9, i);
      const auto rec = run_protocol(psi, c, rng);
      double product = 1.0;
      for (const auto& round : rec.rounds)
        for (const auto& sub : round.sequences)
          for (const auto& m : sub.measurements) product *= m.born_probability;
      EXPECT_NEAR(rec.probability, product, 1e-15);
      const auto replay = replay_unnormalized(psi, rec, c);
      EXPECT_NEAR(replay.squared_norm(), rec.probability, 1e-10);
      EXPECT_GT(overlap_up_to_phase(replay, rec.terminal), 1 - 1e-10);
    }
  }
}

TEST(RunProtocol, SeedDeterminism) {
  const auto psi = x_polarized_state(FockBasis(10));
  Rng a = make_stream(77, 5), b = make_stream(77, 5);
  const auto ra = run_protocol(psi, config_for(10), a);
  const auto rb = run_protocol(psi, config_for(10), b);
  EXPECT_EQ(ra.probability, rb.probability);
  EXPECT_EQ(ra.converged_at, rb.converged_at);
  EXPECT_EQ((ra.terminal.amplitudes() - rb.terminal.amplitudes()).norm(), 0.0);
  ASSERT_EQ(ra.rounds.size(), rb.rounds.size());
  for (std::size_t r = 0; r < ra.rounds.size(); ++r)
    for (int s = 0; s < 2; ++s) {
      const auto& x = ra.rounds[r].sequences[s].measurements;
      const auto& y = rb.rounds[r].sequences[s].measurements;
      ASSERT_EQ(x.size(), y.size());
      for (std::size_t j = 0; j < x.size(); ++j) EXPECT_EQ(x[j].spec, y[j].spec);
    }
}

TEST(RunProtocol, ConvergenceMatchesFirstOutcomes) {
  const auto psi = x_polarized_state(FockBasis(4));
  for (std::uint64_t i = 0; i < 50; ++i) {
    Rng rng = make_stream(13, i);
    const auto rec = run_protocol(psi, config_for(4), rng);
    std::optional<int> expected;
    for (std::size_t r = 0; r < rec.rounds.size() && !expected; ++r)
      if (rec.rounds[r].sequences[0].first_was_zero() && rec.rounds[r].sequences[1].first_was_zero())
        expected = static_cast<int>(r) + 1;
    EXPECT_EQ(rec.converged_at, expected);
    EXPECT_EQ(rec.rounds.size(), 3u);
  }
}

TEST(RunProtocol, MeanFidelityDoesNotDropAcrossRounds) {
  const auto mc = monte_carlo_estimates(x_polarized_state(FockBasis(10)), config_for(10), 10000);
  for (std::size_t r = 1; r < mc.fidelity.size(); ++r) {
    const double sigma = std::hypot(mc.fidelity[r].standard_error, mc.fidelity[r - 1].standard_error);
    EXPECT_GE(mc.fidelity[r].mean, mc.fidelity[r - 1].mean - 3 * sigma);
  }
}

TEST(RunProtocol, RejectsMismatchedState) {
  Rng rng = make_stream(0, 0);
  EXPECT_THROW(run_protocol(mmes_state(FockBasis(3)), config_for(4), rng), DimensionError);
}

TEST(FidelityScan, EvenInAngleAndBounded) {
  const auto psi = x_polarized_state(FockBasis(10));
  const std::vector<double> thetas{0.3, -0.3, 1.1, -1.1};
  for (int delta = 1; delta <= 10; ++delta) {
    const auto f = correction_fidelity_scan(psi, delta, thetas, MeasurementBasis::z(), SignModel::random_parity);
    EXPECT_NEAR(f[0], f[1], 1e-12);
    EXPECT_NEAR(f[2], f[3], 1e-12);
    for (double v : f) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0 + 1e-12);
    }
  }
}

TEST(FidelityScan, ZeroOutcomeNeedsNoRotation) {
  const auto psi = x_polarized_state(FockBasis(10));
  EXPECT_EQ(fidelity_maximizing_angle(psi, 0, MeasurementBasis::z(), SignModel::random_parity), 0.0);
}

TEST(OptimizedRule, BeatsOrMatchesLineOnItsObjective) {
  const auto psi = x_polarized_state(FockBasis(8));
  const auto rule = optimized_angle_rule(psi, MeasurementBasis::z(), SignModel::random_parity, 181);
  ASSERT_EQ(rule.angles().size(), 9u);
  EXPECT_EQ(rule(0, 8), 0.0);
  for (int delta = 1; delta <= 8; ++delta) {
    const double opt = next_step_zero_probability(psi, delta, rule(delta, 8), MeasurementBasis::z(), SignModel::random_parity);
    const double line = next_step_zero_probability(psi, delta, adaptive_angle(delta, 8), MeasurementBasis::z(), SignModel::random_parity);
    EXPECT_GE(opt, line - 1e-12) << delta;
    EXPECT_GE(rule(delta, 8), 0.0);
    EXPECT_LE(rule(delta, 8), M_PI);
  }
  ProtocolConfig c = config_for(8);
  c.angle_rule = rule;
  EXPECT_NO_THROW(c.validate());
}
