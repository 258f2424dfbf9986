#include "mmes/fock.hpp"

#include "mmes/rotation.hpp"

#include <cmath>
#include <string>

namespace mmes {

namespace {

// x^n with x possibly zero or negative; 0^0 = 1.
double signed_power(double x, int n) {
  if (n == 0) return 1.0;
  if (x == 0.0) return 0.0;
  const double magnitude = std::exp(n * std::log(std::abs(x)));
  return (x < 0.0 && (n % 2 != 0)) ? -magnitude : magnitude;
}

// (A (x) 1 + sign * 1 (x) B) psi in grid form: A psi + sign * psi B^T.
Amplitudes two_body_sum(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b, double sign,
                        const Amplitudes& psi) {
  return a * psi + sign * (psi * b.transpose());
}

}  // namespace

FockBasis::FockBasis(int n_atoms) : n_atoms_(n_atoms) {
  if (n_atoms < 0) {
    throw std::invalid_argument("FockBasis: atom number must be non-negative, got " +
                                std::to_string(n_atoms));
  }
}

TwoModeState::TwoModeState(FockBasis basis, Amplitudes amplitudes)
    : basis_(basis), amps_(std::move(amplitudes)) {
  if (amps_.rows() != basis_.single_dim() || amps_.cols() != basis_.single_dim()) {
    throw DimensionError("TwoModeState: amplitude grid is " + std::to_string(amps_.rows()) +
                         "x" + std::to_string(amps_.cols()) + ", expected " +
                         std::to_string(basis_.single_dim()) + " per side");
  }
}

TwoModeState TwoModeState::zero(FockBasis basis) {
  return TwoModeState(basis, Amplitudes::Zero(basis.single_dim(), basis.single_dim()));
}

TwoModeState TwoModeState::product(const Eigen::VectorXcd& first,
                                   const Eigen::VectorXcd& second) {
  if (first.size() != second.size() || first.size() == 0) {
    throw DimensionError("TwoModeState::product: factor dimensions differ");
  }
  FockBasis basis(static_cast<int>(first.size()) - 1);
  return TwoModeState(basis, first * second.transpose());
}

bool TwoModeState::is_normalized(double tol) const {
  return std::abs(squared_norm() - 1.0) <= tol;
}

TwoModeState TwoModeState::normalized() const {
  const double n = norm();
  if (n == 0.0) throw std::domain_error("TwoModeState::normalized: zero vector");
  return TwoModeState(basis_, amps_ / n);
}

TwoModeState TwoModeState::scaled(cplx factor) const {
  return TwoModeState(basis_, amps_ * factor);
}

SpinOperator spin_operator(SpinAxis axis, const FockBasis& basis) {
  const int n = basis.n_atoms();
  const int d = basis.single_dim();
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(d, d);
  const cplx i(0.0, 1.0);
  for (int k = 0; k < d; ++k) {
    if (axis == SpinAxis::z) m(k, k) = basis.sz_eigenvalue(k);
    if (k == n) continue;
    // e^dag g |k> = sqrt((k+1)(N-k)) |k+1>
    const double raise = std::sqrt(static_cast<double>(k + 1) * (n - k));
    if (axis == SpinAxis::x) {
      m(k + 1, k) = raise;
      m(k, k + 1) = raise;
    } else if (axis == SpinAxis::y) {
      m(k + 1, k) = -i * raise;
      m(k, k + 1) = i * raise;
    }
  }
  return {axis, m};
}

Eigen::VectorXcd coherent_state(double theta, double phi, const FockBasis& basis) {
  const int n = basis.n_atoms();
  const double c = std::cos(theta / 2.0);
  const double s = std::sin(theta / 2.0);
  Eigen::VectorXcd v(basis.single_dim());
  for (int k = 0; k <= n; ++k) {
    const double weight =
        std::exp(0.5 * log_binomial(n, k)) * signed_power(c, k) * signed_power(s, n - k);
    v(k) = weight * std::polar(1.0, -basis.sz_eigenvalue(k) * phi / 2.0);
  }
  return v;
}

TwoModeState fock_state(const FockBasis& basis, int k1, int k2) {
  if (k1 < 0 || k2 < 0 || k1 > basis.n_atoms() || k2 > basis.n_atoms()) {
    throw DimensionError("fock_state: index outside [0, N]");
  }
  auto state = TwoModeState::zero(basis);
  Amplitudes amps = state.amplitudes();
  amps(k1, k2) = 1.0;
  return TwoModeState(basis, amps);
}

TwoModeState x_polarized_state(const FockBasis& basis) {
  const auto factor = coherent_state(M_PI / 2.0, 0.0, basis);
  return TwoModeState::product(factor, factor);
}

TwoModeState mmes_state(const FockBasis& basis) {
  const int d = basis.single_dim();
  Amplitudes amps = Amplitudes::Identity(d, d) / std::sqrt(static_cast<double>(d));
  return TwoModeState(basis, amps);
}

TwoModeState singlet_state(const FockBasis& basis) {
  const int n = basis.n_atoms();
  const int d = basis.single_dim();
  Amplitudes amps = Amplitudes::Zero(d, d);
  const double w = 1.0 / std::sqrt(static_cast<double>(d));
  for (int k = 0; k <= n; ++k) amps(k, n - k) = (k % 2 == 0) ? w : -w;
  return TwoModeState(basis, amps);
}

TwoModeState apply_local_operator(const TwoModeState& state, const Eigen::MatrixXcd& op,
                                  Ensemble target) {
  const int d = state.basis().single_dim();
  if (op.rows() != d || op.cols() != d) {
    throw DimensionError("apply_local_operator: operator does not match the Fock basis");
  }
  Amplitudes amps = state.amplitudes();
  if (target == Ensemble::first || target == Ensemble::both) amps = op * amps;
  if (target == Ensemble::second || target == Ensemble::both) amps = amps * op.transpose();
  return TwoModeState(state.basis(), std::move(amps));
}

TwoModeState apply_local_rotation(const TwoModeState& state, const RotationSpec& spec) {
  return apply_local_operator(state, rotation_unitary(spec.theta, spec.phi, state.basis()),
                              spec.target);
}

TwoModeState apply_inverse_local_rotation(const TwoModeState& state,
                                          const RotationSpec& spec) {
  return apply_local_operator(
      state, rotation_unitary(spec.theta, spec.phi, state.basis()).adjoint(), spec.target);
}

TwoModeState sbar_tot_squared_apply(const TwoModeState& state) {
  const auto& basis = state.basis();
  const auto sx = spin_operator(SpinAxis::x, basis).matrix;
  const auto sy = spin_operator(SpinAxis::y, basis).matrix;
  const auto sz = spin_operator(SpinAxis::z, basis).matrix;
  const Amplitudes& psi = state.amplitudes();

  auto squared = [&](const Eigen::MatrixXcd& op, double sign) {
    return two_body_sum(op, op, sign, two_body_sum(op, op, sign, psi));
  };
  Amplitudes out = squared(sx, -1.0) + squared(sy, +1.0) + squared(sz, -1.0);
  return TwoModeState(basis, out / 4.0);
}

TwoModeState stot_squared_apply(const TwoModeState& state) {
  const auto& basis = state.basis();
  const Amplitudes& psi = state.amplitudes();
  Amplitudes out = Amplitudes::Zero(psi.rows(), psi.cols());
  for (SpinAxis axis : {SpinAxis::x, SpinAxis::y, SpinAxis::z}) {
    const auto op = spin_operator(axis, basis).matrix;
    out += two_body_sum(op, op, +1.0, two_body_sum(op, op, +1.0, psi));
  }
  return TwoModeState(basis, out / 4.0);
}

double entanglement_entropy(const TwoModeState& state) {
  if (!state.is_normalized(1e-10)) {
    throw std::invalid_argument("entanglement_entropy: state is not normalized");
  }
  Eigen::JacobiSVD<Amplitudes> svd(state.amplitudes());
  double entropy = 0.0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) {
    const double lambda = svd.singularValues()(i) * svd.singularValues()(i);
    if (lambda > 1e-300) entropy -= lambda * std::log2(lambda);
  }
  return entropy;
}

void require_same_basis(const TwoModeState& a, const TwoModeState& b) {
  if (!(a.basis() == b.basis())) {
    throw DimensionError("states live in different Fock spaces (N=" +
                         std::to_string(a.n_atoms()) + " vs N=" + std::to_string(b.n_atoms()) +
                         ")");
  }
}

cplx inner_product(const TwoModeState& a, const TwoModeState& b) {
  require_same_basis(a, b);
  return (a.amplitudes().conjugate().cwiseProduct(b.amplitudes())).sum();
}

double overlap_up_to_phase(const TwoModeState& a, const TwoModeState& b) {
  const double denom = a.norm() * b.norm();
  if (denom == 0.0) throw std::domain_error("overlap_up_to_phase: zero vector");
  return std::abs(inner_product(a, b)) / denom;
}

double mmes_fidelity(const TwoModeState& state) {
  const double norm2 = state.squared_norm();
  if (norm2 == 0.0) return 0.0;
  const cplx trace = state.amplitudes().trace();
  return std::norm(trace) / state.basis().single_dim() / norm2;
}

}  // namespace mmes
