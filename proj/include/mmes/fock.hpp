// fock.hpp
// Two-ensemble Fock space: basis, states, collective spin operators and
// the maximally entangled / singlet state family.

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>

namespace mmes {

using cplx = std::complex<double>;

/// Amplitude grid psi(k1, k2): rows index ensemble 1, columns ensemble 2.
using Amplitudes = Eigen::MatrixXcd;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Fock ladder |k>, k = 0..N, of one ensemble of N two-level atoms.
/// Both ensembles always hold the same number of atoms.
class FockBasis {
 public:
  explicit FockBasis(int n_atoms);

  int n_atoms() const { return n_atoms_; }
  int single_dim() const { return n_atoms_ + 1; }
  int pair_dim() const { return single_dim() * single_dim(); }

  /// S^z |k> = (2k - N) |k>
  int sz_eigenvalue(int k) const { return 2 * k - n_atoms_; }

  bool operator==(const FockBasis&) const = default;

 private:
  int n_atoms_;
};

/// Pure (possibly unnormalized) state of the two ensembles. Unnormalized
/// states carry the Born probability of the branch that produced them as
/// their squared norm.
class TwoModeState {
 public:
  TwoModeState(FockBasis basis, Amplitudes amplitudes);

  static TwoModeState zero(FockBasis basis);
  static TwoModeState product(const Eigen::VectorXcd& first,
                              const Eigen::VectorXcd& second);

  const FockBasis& basis() const { return basis_; }
  int n_atoms() const { return basis_.n_atoms(); }
  const Amplitudes& amplitudes() const { return amps_; }
  cplx amplitude(int k1, int k2) const { return amps_(k1, k2); }

  double squared_norm() const { return amps_.squaredNorm(); }
  double norm() const { return amps_.norm(); }
  bool is_normalized(double tol = 1e-12) const;

  /// Throws std::domain_error on a zero vector.
  TwoModeState normalized() const;
  TwoModeState scaled(cplx factor) const;

 private:
  FockBasis basis_;
  Amplitudes amps_;
};

enum class SpinAxis { x, y, z };

/// Collective spin operator of one ensemble in the Schwinger-boson form,
/// S^x = e^dag g + g^dag e, S^y = -i e^dag g + i g^dag e, S^z = e^dag e - g^dag g.
struct SpinOperator {
  SpinAxis axis;
  Eigen::MatrixXcd matrix;
};

SpinOperator spin_operator(SpinAxis axis, const FockBasis& basis);

/// Single-ensemble spin coherent state |theta, phi>>.
Eigen::VectorXcd coherent_state(double theta, double phi, const FockBasis& basis);

TwoModeState fock_state(const FockBasis& basis, int k1, int k2);

/// Both ensembles polarized along +S^x: |pi/2, 0>> (x) |pi/2, 0>>.
TwoModeState x_polarized_state(const FockBasis& basis);

/// (N+1)^{-1/2} sum_k |k>|k>
TwoModeState mmes_state(const FockBasis& basis);

/// (N+1)^{-1/2} sum_k (-1)^k |k>|N-k>
TwoModeState singlet_state(const FockBasis& basis);

enum class Ensemble { first, second, both };

/// U(theta, phi) = exp(-i S^z phi/2) exp(-i S^y theta/2) applied to the
/// selected ensemble(s).
struct RotationSpec {
  double theta = 0.0;
  double phi = 0.0;
  Ensemble target = Ensemble::both;
};

TwoModeState apply_local_rotation(const TwoModeState& state, const RotationSpec& spec);
TwoModeState apply_inverse_local_rotation(const TwoModeState& state,
                                          const RotationSpec& spec);

/// Applies a single-ensemble operator to one or both ensembles.
TwoModeState apply_local_operator(const TwoModeState& state,
                                  const Eigen::MatrixXcd& op, Ensemble target);

/// sbar_tot^2 = [(S^x_1 - S^x_2)^2 + (S^y_1 + S^y_2)^2 + (S^z_1 - S^z_2)^2] / 4.
/// Annihilates the MMES.
TwoModeState sbar_tot_squared_apply(const TwoModeState& state);

/// s_tot^2 = (S_1 + S_2)^2 / 4. Annihilates the singlet.
TwoModeState stot_squared_apply(const TwoModeState& state);

/// Von Neumann entropy (bits) of the reduced state of one ensemble.
/// Throws std::invalid_argument when the state is not normalized.
double entanglement_entropy(const TwoModeState& state);

/// <a|b>, conjugate-linear in a. Throws DimensionError on mismatched N.
cplx inner_product(const TwoModeState& a, const TwoModeState& b);

/// |<a|b>| / (|a| |b|): equality up to global phase and normalization.
double overlap_up_to_phase(const TwoModeState& a, const TwoModeState& b);

/// |<MMES|psi>|^2 / <psi|psi>
double mmes_fidelity(const TwoModeState& state);

void require_same_basis(const TwoModeState& a, const TwoModeState& b);

}  // namespace mmes
