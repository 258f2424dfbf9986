// rotation.hpp
// Matrix elements of single-ensemble spin rotations.
//
// The production route diagonalizes S^x (real symmetric tridiagonal, exact
// spectrum 2m - N) and maps it to S^y with a diagonal phase, which stays
// accurate well past N = 150. The binomial sum form is exposed separately and
// loses precision to cancellation for large N.

#pragma once

#include "mmes/fock.hpp"

#include <Eigen/Dense>

namespace mmes {

/// exp(-i S^y theta / 2) on one ensemble. Real orthogonal.
Eigen::MatrixXd y_rotation_matrix(double theta, const FockBasis& basis);

/// exp(-i S^z phi / 2), diagonal.
Eigen::MatrixXcd z_phase_matrix(double phi, const FockBasis& basis);

/// U(theta, phi) = exp(-i S^z phi/2) exp(-i S^y theta/2) on one ensemble.
Eigen::MatrixXcd rotation_unitary(double theta, double phi, const FockBasis& basis);

/// <k_out| exp(-i S^y theta/2) |k_in> from the finite binomial sum, with all
/// factorials evaluated as log-gamma. Valid for any N but subject to
/// cancellation once N grows past a few tens.
double y_rotation_element_closed_form(int k_out, int k_in, double theta, int n_atoms);

/// log C(n, k) via lgamma.
double log_binomial(int n, int k);

}  // namespace mmes
