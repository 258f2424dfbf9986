// protocol.hpp
// Adaptive repeat-until-success QND protocol: corrective rotations keyed to
// the measured Delta, the per-basis sequences, and the alternating-basis loop.

#pragma once

#include "mmes/fock.hpp"
#include "mmes/qnd.hpp"
#include "mmes/random.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mmes {

class ProtocolOrderError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Delta -> correction angle. Either the line theta = pi Delta / N or a
/// per-Delta table.
class AngleRule {
 public:
  static AngleRule line();
  static AngleRule table(std::vector<double> angles, std::string name = "table");

  double operator()(int delta, int n_atoms) const;
  const std::string& name() const { return name_; }
  bool is_line() const { return table_.empty(); }
  const std::vector<double>& angles() const { return table_; }

 private:
  AngleRule(std::vector<double> table, std::string name)
      : table_(std::move(table)), name_(std::move(name)) {}

  std::vector<double> table_;
  std::string name_;
};

/// theta_opt = pi Delta / N
double adaptive_angle(int delta, int n_atoms);

struct ProtocolConfig {
  int n_atoms = 10;
  int max_repeats = 25;  // L cap per repeat-until-success sequence
  int max_rounds = 3;    // M
  std::array<MeasurementBasis, 2> basis_order{MeasurementBasis::z(), MeasurementBasis::x()};
  AngleRule angle_rule = AngleRule::line();
  SignModel sign_model = SignModel::random_parity;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument on any violated constraint.
  void validate() const;
};

/// Correction U_Delta = e^{i S^y_1 theta/2} (x) 1 in the frame of `basis`.
/// `preceding` is the measurement that produced Delta; a different basis is
/// a ProtocolOrderError.
TwoModeState apply_correction(const TwoModeState& state, const MeasurementRecord& preceding,
                              MeasurementBasis basis, const AngleRule& rule = AngleRule::line());

struct CorrectionRecord {
  int delta = 0;
  double angle = 0.0;
};

/// One repeat-until-success sequence T_{Delta-vector}.
struct SubSequenceRecord {
  MeasurementBasis basis;
  std::vector<MeasurementRecord> measurements;
  std::vector<CorrectionRecord> corrections;
  std::vector<double> fidelity_after_step;  // MMES fidelity after each measurement(+correction)
  bool hit_cap = false;

  bool first_was_zero() const;
  double probability() const;  // product of Born probabilities
};

struct RoundRecord {
  std::array<SubSequenceRecord, 2> sequences;  // in basis_order
  double fidelity_after = 0.0;
};

struct SequenceRecord {
  std::vector<RoundRecord> rounds;
  TwoModeState terminal;
  double probability = 1.0;
  std::optional<int> converged_at;  // 1-based round index
  double terminal_fidelity = 0.0;
};

/// Precomputed frames and correction matrices for one configuration.
/// Immutable after construction; share freely across threads.
class Protocol {
 public:
  explicit Protocol(ProtocolConfig config);

  const ProtocolConfig& config() const { return config_; }
  const FockBasis& fock() const { return fock_; }
  const MeasurementFrame& frame(int basis_index) const { return frames_[basis_index]; }

  /// e^{i S^y theta_Delta / 2} for the configured angle rule.
  const Eigen::MatrixXcd& correction_matrix(int delta) const { return corrections_[delta]; }

  std::pair<TwoModeState, SubSequenceRecord> repeat_until_success(const TwoModeState& state,
                                                                  int basis_index,
                                                                  Rng& rng) const;

  SequenceRecord run(const TwoModeState& initial, Rng& rng) const;

 private:
  ProtocolConfig config_;
  FockBasis fock_;
  std::array<MeasurementFrame, 2> frames_;
  std::vector<Eigen::MatrixXcd> corrections_;
};

std::pair<TwoModeState, SubSequenceRecord> repeat_until_success(const TwoModeState& state,
                                                                MeasurementBasis basis,
                                                                const ProtocolConfig& config,
                                                                Rng& rng);

SequenceRecord run_protocol(const TwoModeState& initial, const ProtocolConfig& config, Rng& rng);

/// Kraus weight of a recorded outcome under a sign model: 1/sqrt(2) for
/// random-parity branches with Delta != 0, else 1.
double kraus_weight(const ProjectorSpec& spec, SignModel model);

/// Re-applies the recorded operator string to `initial` without
/// renormalizing; the squared norm equals the record's probability.
TwoModeState replay_unnormalized(const TwoModeState& initial, const SequenceRecord& record,
                                 const ProtocolConfig& config);

/// Normalized MMES fidelity of U_theta Pi_Delta psi, mixed over the sign
/// branches of the model, for each angle in `thetas`.
std::vector<double> correction_fidelity_scan(const TwoModeState& state, int delta,
                                             const std::vector<double>& thetas,
                                             MeasurementBasis basis, SignModel model);

/// Grid argmax of correction_fidelity_scan over theta in [0, pi].
double fidelity_maximizing_angle(const TwoModeState& state, int delta, MeasurementBasis basis,
                                 SignModel model, int grid_points = 721);

/// Expected probability of Delta = 0 on the measurement that follows
/// U_theta Pi_Delta psi, mixed over the sign branches.
double next_step_zero_probability(const TwoModeState& state, int delta, double theta,
                                  MeasurementBasis basis, SignModel model);

/// Per-Delta angles maximizing next_step_zero_probability for `reference`
/// over a uniform grid on [0, pi].
AngleRule optimized_angle_rule(const TwoModeState& reference, MeasurementBasis basis,
                               SignModel model, int grid_points = 721);

}  // namespace mmes
