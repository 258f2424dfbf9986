// Density-operator form of the outcome tree. Every reported statistic is
// linear in the branch projectors |psi_b><psi_b|, so branches that share a
// protocol class (converged earlier, first outcomes of this round all zero)
// can be summed without losing anything.

#include "mmes/analysis.hpp"

#include <array>
#include <cstdlib>
#include <stdexcept>

namespace mmes {

namespace {

using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

// Row-major vectorization: index k1 * d + k2.
Vector vectorize(const Amplitudes& psi) {
  const int d = static_cast<int>(psi.rows());
  Vector v(d * d);
  for (int k1 = 0; k1 < d; ++k1) {
    for (int k2 = 0; k2 < d; ++k2) v(k1 * d + k2) = psi(k1, k2);
  }
  return v;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

struct ClassState {
  Matrix rho;
  bool converged = false;
  bool round_ok = true;
};

void merge_into(std::vector<ClassState>& classes, ClassState c) {
  for (auto& existing : classes) {
    if (existing.converged == c.converged && existing.round_ok == c.round_ok) {
      existing.rho += c.rho;
      return;
    }
  }
  classes.push_back(std::move(c));
}

// Band index sets in the vectorized frame: minus = k1 - k2 = -Delta,
// plus = k1 - k2 = +Delta.
struct Band {
  std::vector<int> index;
  std::vector<bool> on_plus;
};

std::vector<Band> make_bands(int d) {
  std::vector<Band> bands(d);
  for (int k1 = 0; k1 < d; ++k1) {
    for (int k2 = 0; k2 < d; ++k2) {
      const int diff = k1 - k2;
      Band& b = bands[std::abs(diff)];
      b.index.push_back(k1 * d + k2);
      b.on_plus.push_back(diff > 0);
    }
  }
  return bands;
}

// Sign-averaged Pi_Delta rho Pi_Delta^dag restricted to the band support.
Matrix band_block(const Matrix& rho, const Band& band, int delta, SignModel model) {
  const int m = static_cast<int>(band.index.size());
  Matrix block(m, m);
  for (int a = 0; a < m; ++a) {
    for (int b = 0; b < m; ++b) {
      cplx v = rho(band.index[a], band.index[b]);
      if (delta != 0 && band.on_plus[a] != band.on_plus[b]) {
        switch (model) {
          case SignModel::random_parity: v = 0.0; break;
          case SignModel::all_plus: break;
          case SignModel::all_minus: v = -v; break;
        }
      }
      block(a, b) = v;
    }
  }
  return block;
}

}  // namespace

ProtocolStatistics enumerate_ensemble(const TwoModeState& initial, const ProtocolConfig& config) {
  config.validate();
  if (!initial.is_normalized(1e-10)) {
    throw std::invalid_argument("enumerate_ensemble: initial state not normalized");
  }
  const Protocol protocol(config);
  if (!(initial.basis() == protocol.fock())) {
    throw DimensionError("enumerate_ensemble: state/config N mismatch");
  }
  const FockBasis& fock = protocol.fock();
  const int d = fock.single_dim();
  const int dim = d * d;
  const int L = config.max_repeats;
  const auto bands = make_bands(d);

  // Columns of (C_Delta (x) 1) restricted to each band's support.
  std::vector<Matrix> kraus_columns(d);
  for (int delta = 1; delta < d; ++delta) {
    const Matrix k = kron(protocol.correction_matrix(delta), Matrix::Identity(d, d));
    Matrix cols(dim, bands[delta].index.size());
    for (std::size_t a = 0; a < bands[delta].index.size(); ++a) cols.col(a) = k.col(bands[delta].index[a]);
    kraus_columns[delta] = std::move(cols);
  }
  std::array<Matrix, 2> frame_unitary;
  std::array<Vector, 2> mmes_frame;
  for (int bi = 0; bi < 2; ++bi) {
    const Matrix& w = protocol.frame(bi).unitary();
    frame_unitary[bi] = kron(w, w);
    mmes_frame[bi] = vectorize(protocol.frame(bi).mmes_in_frame());
  }
  const Vector mmes_lab = vectorize(mmes_state(fock).amplitudes());

  ProtocolStatistics stats;
  stats.n_atoms = fock.n_atoms();
  stats.initial_fidelity = mmes_fidelity(initial);

  const Vector psi0 = vectorize(initial.amplitudes());
  std::vector<ClassState> classes{{psi0 * psi0.adjoint(), false, true}};

  for (int round = 1; round <= config.max_rounds; ++round) {
    for (int bi = 0; bi < 2; ++bi) {
      const bool identity = protocol.frame(bi).is_identity();
      const Matrix& wk = frame_unitary[bi];
      const Vector& mf = mmes_frame[bi];
      SequenceStats seq;
      seq.round = round;
      seq.basis_index = bi;
      seq.basis = protocol.frame(bi).basis();
      seq.marginals.assign(L, std::vector<double>(d, 0.0));
      seq.fidelity.assign(L, 0.0);

      std::vector<ClassState> next_classes;
      for (auto& c : classes) {
        Matrix active = identity ? c.rho : Matrix(wk.adjoint() * c.rho * wk);
        Matrix first_zero = Matrix::Zero(dim, dim);
        Matrix later = Matrix::Zero(dim, dim);  // stopped at a later step
        double done_mass = 0.0;
        for (int step = 0; step < L; ++step) {
          auto& row = seq.marginals[step];
          row[0] += done_mass;
          Matrix next = Matrix::Zero(dim, dim);
          for (int delta = 0; delta < d; ++delta) {
            const Band& band = bands[delta];
            const Matrix block = band_block(active, band, delta, config.sign_model);
            const double mass = block.trace().real();
            row[delta] += mass;
            if (mass <= 0.0) continue;
            if (delta == 0) {
              Matrix& target = step == 0 ? first_zero : later;
              for (std::size_t a = 0; a < band.index.size(); ++a) {
                for (std::size_t b = 0; b < band.index.size(); ++b) {
                  target(band.index[a], band.index[b]) += block(a, b);
                }
              }
              done_mass += mass;
            } else {
              const Matrix& cols = kraus_columns[delta];
              next.noalias() += cols * block * cols.adjoint();
            }
          }
          active = std::move(next);
          seq.fidelity[step] +=
              (mf.adjoint() * (first_zero + later + active) * mf)(0, 0).real();
        }
        seq.flagged_mass += active.trace().real();
        Matrix rest = later + active;
        if (!identity) {
          first_zero = wk * first_zero * wk.adjoint();
          rest = wk * rest * wk.adjoint();
        }
        merge_into(next_classes, {std::move(first_zero), c.converged, c.round_ok});
        merge_into(next_classes, {std::move(rest), c.converged, false});
      }
      classes = std::move(next_classes);
      stats.sequences.push_back(std::move(seq));
    }

    double fid = 0.0;
    double conv = 0.0;
    double converged = 0.0;
    std::vector<ClassState> merged;
    for (auto& c : classes) {
      fid += (mmes_lab.adjoint() * c.rho * mmes_lab)(0, 0).real();
      const double mass = c.rho.trace().real();
      if (c.round_ok) {
        conv += mass;
        c.converged = true;
      }
      if (c.converged) converged += mass;
      c.round_ok = true;
      merge_into(merged, std::move(c));
    }
    classes = std::move(merged);
    stats.round_fidelity.push_back(fid);
    stats.round_convergence.push_back(conv);
    stats.converged_by.push_back(converged);
  }

  double accounted = 0.0;
  for (const auto& c : classes) accounted += c.rho.trace().real();
  stats.accounted_mass = accounted;
  stats.pruned_mass = 0.0;
  return stats;
}

}  // namespace mmes
