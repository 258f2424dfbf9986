#include "mmes/rotation.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace mmes {

namespace {

// Eigenvectors of S^x for a given N; S^x is real symmetric tridiagonal with
// eigenvalues 2m - N, so the eigenvectors come out ordered by m.
const Eigen::MatrixXd& sx_eigenvectors(int n_atoms) {
  static std::mutex mutex;
  static std::map<int, Eigen::MatrixXd> cache;
  std::lock_guard lock(mutex);
  if (auto it = cache.find(n_atoms); it != cache.end()) return it->second;

  const int d = n_atoms + 1;
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd sub(std::max(d - 1, 0));
  for (int k = 0; k + 1 < d; ++k) {
    sub(k) = std::sqrt(static_cast<double>(k + 1) * (n_atoms - k));
  }
  Eigen::MatrixXd vectors = Eigen::MatrixXd::Identity(d, d);
  if (d > 1) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    if (solver.info() != Eigen::Success) {
      throw std::runtime_error("sx_eigenvectors: tridiagonal eigensolver failed");
    }
    vectors = solver.eigenvectors();
  }
  return cache.emplace(n_atoms, std::move(vectors)).first->second;
}

}  // namespace

double log_binomial(int n, int k) {
  if (k < 0 || k > n) throw std::domain_error("log_binomial: k outside [0, n]");
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

Eigen::MatrixXd y_rotation_matrix(double theta, const FockBasis& basis) {
  const int n = basis.n_atoms();
  const int d = basis.single_dim();
  const Eigen::MatrixXd& q = sx_eigenvectors(n);

  // exp(-i S^x theta/2) = Q diag(e^{-i(2m-N)theta/2}) Q^T, then
  // S^y = Z S^x Z^dag with Z = diag(e^{-i(2k-N)pi/4}) contributes the
  // factor e^{-i(k'-k)pi/2} to element (k', k).
  Eigen::VectorXd cos_m(d), sin_m(d);
  for (int m = 0; m < d; ++m) {
    const double phase = -(2.0 * m - n) * theta / 2.0;
    cos_m(m) = std::cos(phase);
    sin_m(m) = std::sin(phase);
  }
  const Eigen::MatrixXd re = q * cos_m.asDiagonal() * q.transpose();
  const Eigen::MatrixXd im = q * sin_m.asDiagonal() * q.transpose();

  Eigen::MatrixXd out(d, d);
  for (int kp = 0; kp < d; ++kp) {
    for (int k = 0; k < d; ++k) {
      // Re[(re + i im) * (-i)^(k'-k)]
      switch (((kp - k) % 4 + 4) % 4) {
        case 0: out(kp, k) = re(kp, k); break;
        case 1: out(kp, k) = im(kp, k); break;
        case 2: out(kp, k) = -re(kp, k); break;
        default: out(kp, k) = -im(kp, k); break;
      }
    }
  }
  return out;
}

Eigen::MatrixXcd z_phase_matrix(double phi, const FockBasis& basis) {
  Eigen::VectorXcd diag(basis.single_dim());
  for (int k = 0; k < basis.single_dim(); ++k) {
    diag(k) = std::polar(1.0, -basis.sz_eigenvalue(k) * phi / 2.0);
  }
  return diag.asDiagonal();
}

Eigen::MatrixXcd rotation_unitary(double theta, double phi, const FockBasis& basis) {
  Eigen::MatrixXcd r = y_rotation_matrix(theta, basis).cast<cplx>();
  if (phi == 0.0) return r;
  return z_phase_matrix(phi, basis) * r;
}

double y_rotation_element_closed_form(int k_out, int k_in, double theta, int n_atoms) {
  if (k_out < 0 || k_in < 0 || k_out > n_atoms || k_in > n_atoms) {
    throw std::domain_error("y_rotation_element_closed_form: index outside [0, N]");
  }
  const double c = std::cos(theta / 2.0);
  const double s = std::sin(theta / 2.0);
  const double log_c = std::log(std::abs(c));
  const double log_s = std::log(std::abs(s));
  const double log_prefactor = 0.5 * (std::lgamma(k_in + 1.0) + std::lgamma(n_atoms - k_in + 1.0) +
                                      std::lgamma(k_out + 1.0) + std::lgamma(n_atoms - k_out + 1.0));

  double sum = 0.0;
  const int lo = std::max(k_out - k_in, 0);
  const int hi = std::min(k_out, n_atoms - k_in);
  for (int j = lo; j <= hi; ++j) {
    const int cos_power = k_out - k_in + n_atoms - 2 * j;
    const int sin_power = 2 * j + k_in - k_out;
    if ((cos_power > 0 && c == 0.0) || (sin_power > 0 && s == 0.0)) continue;
    double log_term = log_prefactor - std::lgamma(k_out - j + 1.0) -
                      std::lgamma(n_atoms - k_in - j + 1.0) - std::lgamma(j + 1.0) -
                      std::lgamma(j + k_in - k_out + 1.0);
    if (cos_power > 0) log_term += cos_power * log_c;
    if (sin_power > 0) log_term += sin_power * log_s;
    int sign_parity = j;
    if (c < 0.0) sign_parity += cos_power;
    if (s < 0.0) sign_parity += sin_power;
    const double term = std::exp(log_term);
    sum += (sign_parity % 2 == 0) ? term : -term;
  }
  return sum;
}

}  // namespace mmes
