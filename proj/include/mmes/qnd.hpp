// qnd.hpp
// QND measurement layer: the photon-count POVM with its modulating function,
// the idealized band projectors Pi_Delta, rotated measurement bases, Born
// probabilities and outcome sampling.

#pragma once

#include "mmes/fock.hpp"
#include "mmes/random.hpp"

#include <Eigen/Dense>

#include <string>
#include <utility>
#include <vector>

namespace mmes {

/// Measurement basis reached by U(theta, phi) = e^{-i(S^z_1+S^z_2)phi/2} e^{-i(S^y_1+S^y_2)theta/2}.
struct MeasurementBasis {
  double theta = 0.0;
  double phi = 0.0;

  static MeasurementBasis z() { return {0.0, 0.0}; }
  static MeasurementBasis x() { return {M_PI / 2.0, 0.0}; }

  bool operator==(const MeasurementBasis&) const = default;
  std::string label() const;
};

MeasurementBasis parse_basis(const std::string& label);

/// How the unobserved photon-count parity picks the relative band sign of
/// Pi_Delta for Delta != 0.
enum class SignModel {
  random_parity,  // both signs, each with half the band weight
  all_plus,
  all_minus,
};

std::string to_string(SignModel model);
SignModel parse_sign_model(const std::string& text);

/// Pi_Delta with branch sign s. For Delta = 0 the sign is always +1.
struct ProjectorSpec {
  int delta = 0;
  int branch_sign = 1;
  MeasurementBasis basis = MeasurementBasis::z();

  bool operator==(const ProjectorSpec&) const = default;
};

/// Validates delta against N and normalizes the sign for delta = 0.
ProjectorSpec make_projector(int delta, int branch_sign, MeasurementBasis basis, int n_atoms);

struct MeasurementRecord {
  ProjectorSpec spec;
  double born_probability = 0.0;
};

struct PovmParams {
  double alpha = 0.0;
  double tau = 0.0;
  int photon_cutoff = 0;  // inclusive bound on n_c + n_d

  /// Cutoff at mean + 10 sqrt(mean) (+ a floor for weak light).
  static PovmParams with_default_cutoff(double alpha, double tau);
};

int default_photon_cutoff(double alpha);

/// C_{n_c,n_d}(chi) = alpha^{n_c+n_d} e^{-alpha^2/2} cos^{n_c}(chi) sin^{n_d}(chi) / sqrt(n_c! n_d!),
/// evaluated as sign * exp(log magnitude).
double modulating_amplitude(int n_c, int n_d, double chi, const PovmParams& params);

/// psi(k1,k2) <- C_{n_c,n_d}((k1-k2) tau) psi(k1,k2). Unnormalized.
TwoModeState povm_apply(const TwoModeState& state, int n_c, int n_d, const PovmParams& params);

/// Delta whose peak relation sin^2(Delta tau) = n_d/(n_c+n_d) is closest to
/// the observed counts. Zero total photons map to Delta = 0.
int peak_delta(int n_c, int n_d, double tau, int n_atoms);

/// Exact POVM, conditioned on photon counts whose peak Delta equals each
/// Delta, against the random-parity projector mixture (z basis).
struct PovmLimitReport {
  double relative_error = 0.0;  // Frobenius, summed over Delta
  double captured_mass = 0.0;   // photon-count mass inside the cutoff
};

PovmLimitReport povm_projector_distance(const TwoModeState& state, const PovmParams& params);

/// Single-ensemble change of frame for a measurement basis. Amplitudes in
/// the frame are psi_f = (W^dag (x) W^dag) psi, i.e. W^dag psi conj(W).
class MeasurementFrame {
 public:
  MeasurementFrame(MeasurementBasis basis, const FockBasis& fock);

  const MeasurementBasis& basis() const { return basis_; }
  bool is_identity() const { return identity_; }
  const Eigen::MatrixXcd& unitary() const { return w_; }

  Amplitudes to_frame(const Amplitudes& psi) const;
  Amplitudes from_frame(const Amplitudes& psi) const;
  TwoModeState to_frame(const TwoModeState& state) const;
  TwoModeState from_frame(const TwoModeState& state) const;

  /// MMES expressed in this frame.
  const Amplitudes& mmes_in_frame() const { return mmes_frame_; }

 private:
  MeasurementBasis basis_;
  bool identity_;
  Eigen::MatrixXcd w_;
  Amplitudes mmes_frame_;
};

/// Squared weight on each |k1 - k2| = Delta band, Delta = 0..N, of amplitudes
/// already expressed in the measurement frame.
std::vector<double> band_weights(const Amplitudes& frame_amplitudes);

/// Pi_Delta^{s} acting on frame amplitudes: keeps the k1 - k2 = -Delta band,
/// multiplies the k1 - k2 = +Delta band by s.
Amplitudes apply_band_projector(const Amplitudes& frame_amplitudes, int delta, int sign);

TwoModeState projector_apply(const TwoModeState& state, const ProjectorSpec& spec);

/// Every (Delta, sign) outcome allowed by the sign model, with its Born
/// probability, in the order Delta = 0, 1+, 1-, 2+, ...
std::vector<std::pair<ProjectorSpec, double>> outcome_probabilities(
    const TwoModeState& state, MeasurementBasis basis, SignModel model);

/// Same enumeration from precomputed band weights.
std::vector<std::pair<ProjectorSpec, double>> outcomes_from_band_weights(
    const std::vector<double>& weights, MeasurementBasis basis, SignModel model);

struct SampledOutcome {
  MeasurementRecord record;
  TwoModeState state;  // normalized post-measurement state
};

SampledOutcome sample_outcome(const TwoModeState& state, MeasurementBasis basis,
                              SignModel model, Rng& rng);

/// Index into an outcome list drawn with the listed probabilities.
std::size_t draw_outcome(const std::vector<std::pair<ProjectorSpec, double>>& outcomes, Rng& rng);

}  // namespace mmes
