#include "mmes/qnd.hpp"

#include "mmes/rotation.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace mmes {

std::string MeasurementBasis::label() const {
  if (*this == z()) return "z";
  if (*this == x()) return "x";
  std::ostringstream out;
  out << "(" << theta << "," << phi << ")";
  return out.str();
}

MeasurementBasis parse_basis(const std::string& label) {
  if (label == "z") return MeasurementBasis::z();
  if (label == "x") return MeasurementBasis::x();
  throw std::invalid_argument("unknown measurement basis '" + label + "' (expected z or x)");
}

std::string to_string(SignModel model) {
  switch (model) {
    case SignModel::random_parity: return "random";
    case SignModel::all_plus: return "plus";
    case SignModel::all_minus: return "minus";
  }
  return "random";
}

SignModel parse_sign_model(const std::string& text) {
  if (text == "random") return SignModel::random_parity;
  if (text == "plus") return SignModel::all_plus;
  if (text == "minus") return SignModel::all_minus;
  throw std::invalid_argument("unknown sign model '" + text + "' (expected random|plus|minus)");
}

ProjectorSpec make_projector(int delta, int branch_sign, MeasurementBasis basis, int n_atoms) {
  if (delta < 0 || delta > n_atoms) {
    throw std::out_of_range("projector Delta=" + std::to_string(delta) + " outside [0, " +
                            std::to_string(n_atoms) + "]");
  }
  if (branch_sign != 1 && branch_sign != -1) {
    throw std::invalid_argument("projector branch sign must be +1 or -1");
  }
  return {delta, delta == 0 ? 1 : branch_sign, basis};
}

int default_photon_cutoff(double alpha) {
  const double mean = alpha * alpha;
  return static_cast<int>(std::ceil(mean + 10.0 * std::sqrt(mean) + 30.0));
}

PovmParams PovmParams::with_default_cutoff(double alpha, double tau) {
  return {alpha, tau, default_photon_cutoff(alpha)};
}

double modulating_amplitude(int n_c, int n_d, double chi, const PovmParams& params) {
  if (n_c < 0 || n_d < 0) throw std::domain_error("modulating_amplitude: negative photon count");
  const double c = std::cos(chi);
  const double s = std::sin(chi);
  const int n = n_c + n_d;
  if ((n_c > 0 && c == 0.0) || (n_d > 0 && s == 0.0) || (n > 0 && params.alpha == 0.0)) {
    return 0.0;
  }
  double log_mag = -0.5 * params.alpha * params.alpha -
                   0.5 * (std::lgamma(n_c + 1.0) + std::lgamma(n_d + 1.0));
  if (n > 0) log_mag += n * std::log(std::abs(params.alpha));
  if (n_c > 0) log_mag += n_c * std::log(std::abs(c));
  if (n_d > 0) log_mag += n_d * std::log(std::abs(s));
  int parity = 0;
  if (c < 0.0) parity += n_c;
  if (s < 0.0) parity += n_d;
  if (params.alpha < 0.0) parity += n;
  const double mag = std::exp(log_mag);
  return (parity % 2 == 0) ? mag : -mag;
}

TwoModeState povm_apply(const TwoModeState& state, int n_c, int n_d, const PovmParams& params) {
  const int d = state.basis().single_dim();
  std::vector<double> by_difference(2 * d - 1);
  for (int diff = -(d - 1); diff <= d - 1; ++diff) {
    by_difference[diff + d - 1] = modulating_amplitude(n_c, n_d, diff * params.tau, params);
  }
  Amplitudes out = state.amplitudes();
  for (int k1 = 0; k1 < d; ++k1) {
    for (int k2 = 0; k2 < d; ++k2) out(k1, k2) *= by_difference[k1 - k2 + d - 1];
  }
  return TwoModeState(state.basis(), std::move(out));
}

int peak_delta(int n_c, int n_d, double tau, int n_atoms) {
  const int n = n_c + n_d;
  if (n == 0) return 0;
  const double ratio = static_cast<double>(n_d) / n;
  int best = 0;
  double best_gap = std::abs(ratio);
  for (int delta = 1; delta <= n_atoms; ++delta) {
    const double s = std::sin(delta * tau);
    const double gap = std::abs(s * s - ratio);
    if (gap < best_gap) {
      best_gap = gap;
      best = delta;
    }
  }
  return best;
}

PovmLimitReport povm_projector_distance(const TwoModeState& state, const PovmParams& params) {
  const int n = state.n_atoms();
  const int d = n + 1;
  const int span = 2 * n + 1;  // k1 - k2 in [-N, N]
  std::vector<Eigen::MatrixXd> gram(d, Eigen::MatrixXd::Zero(span, span));
  Eigen::VectorXd c(span);
  for (int total = 0; total <= params.photon_cutoff; ++total) {
    for (int n_d = 0; n_d <= total; ++n_d) {
      const int n_c = total - n_d;
      for (int m = -n; m <= n; ++m) c(m + n) = modulating_amplitude(n_c, n_d, m * params.tau, params);
      gram[peak_delta(n_c, n_d, params.tau, n)].noalias() += c * c.transpose();
    }
  }

  const Amplitudes& psi = state.amplitudes();
  double diff2 = 0.0;
  double ref2 = 0.0;
  double mass = 0.0;
  for (int delta = 0; delta < d; ++delta) {
    for (int i = 0; i < d * d; ++i) {
      const int a1 = i / d, a2 = i % d, ma = a1 - a2;
      for (int j = 0; j < d * d; ++j) {
        const int b1 = j / d, b2 = j % d, mb = b1 - b2;
        const cplx outer = psi(a1, a2) * std::conj(psi(b1, b2));
        const cplx povm = gram[delta](ma + n, mb + n) * outer;
        const bool in_band = std::abs(ma) == delta && std::abs(mb) == delta &&
                             (delta == 0 || (ma > 0) == (mb > 0));
        const cplx proj = in_band ? outer : cplx(0.0);
        diff2 += std::norm(povm - proj);
        ref2 += std::norm(proj);
        if (i == j) mass += povm.real();
      }
    }
  }
  return {std::sqrt(diff2 / ref2), mass};
}

MeasurementFrame::MeasurementFrame(MeasurementBasis basis, const FockBasis& fock)
    : basis_(basis),
      identity_(basis.theta == 0.0 && basis.phi == 0.0),
      w_(rotation_unitary(basis.theta, basis.phi, fock)),
      mmes_frame_(to_frame(mmes_state(fock).amplitudes())) {}

Amplitudes MeasurementFrame::to_frame(const Amplitudes& psi) const {
  if (identity_) return psi;
  return w_.adjoint() * psi * w_.conjugate();
}

Amplitudes MeasurementFrame::from_frame(const Amplitudes& psi) const {
  if (identity_) return psi;
  return w_ * psi * w_.transpose();
}

TwoModeState MeasurementFrame::to_frame(const TwoModeState& state) const {
  return TwoModeState(state.basis(), to_frame(state.amplitudes()));
}

TwoModeState MeasurementFrame::from_frame(const TwoModeState& state) const {
  return TwoModeState(state.basis(), from_frame(state.amplitudes()));
}

std::vector<double> band_weights(const Amplitudes& psi) {
  const int d = static_cast<int>(psi.rows());
  std::vector<double> weights(d, 0.0);
  for (int k1 = 0; k1 < d; ++k1) {
    for (int k2 = 0; k2 < d; ++k2) weights[std::abs(k1 - k2)] += std::norm(psi(k1, k2));
  }
  return weights;
}

Amplitudes apply_band_projector(const Amplitudes& psi, int delta, int sign) {
  const int d = static_cast<int>(psi.rows());
  Amplitudes out = Amplitudes::Zero(d, d);
  if (delta == 0) {
    out.diagonal() = psi.diagonal();
    return out;
  }
  for (int k = 0; k + delta < d; ++k) {
    out(k, k + delta) = psi(k, k + delta);                            // k1 - k2 = -Delta
    out(k + delta, k) = static_cast<double>(sign) * psi(k + delta, k);  // k1 - k2 = +Delta
  }
  return out;
}

TwoModeState projector_apply(const TwoModeState& state, const ProjectorSpec& spec) {
  const auto checked = make_projector(spec.delta, spec.branch_sign, spec.basis, state.n_atoms());
  const MeasurementFrame frame(checked.basis, state.basis());
  const Amplitudes projected =
      apply_band_projector(frame.to_frame(state.amplitudes()), checked.delta, checked.branch_sign);
  return TwoModeState(state.basis(), frame.from_frame(projected));
}

std::vector<std::pair<ProjectorSpec, double>> outcomes_from_band_weights(
    const std::vector<double>& weights, MeasurementBasis basis, SignModel model) {
  std::vector<std::pair<ProjectorSpec, double>> out;
  out.reserve(2 * weights.size());
  out.push_back({ProjectorSpec{0, 1, basis}, weights[0]});
  for (int delta = 1; delta < static_cast<int>(weights.size()); ++delta) {
    switch (model) {
      case SignModel::random_parity:
        out.push_back({ProjectorSpec{delta, 1, basis}, 0.5 * weights[delta]});
        out.push_back({ProjectorSpec{delta, -1, basis}, 0.5 * weights[delta]});
        break;
      case SignModel::all_plus:
        out.push_back({ProjectorSpec{delta, 1, basis}, weights[delta]});
        break;
      case SignModel::all_minus:
        out.push_back({ProjectorSpec{delta, -1, basis}, weights[delta]});
        break;
    }
  }
  return out;
}

std::vector<std::pair<ProjectorSpec, double>> outcome_probabilities(
    const TwoModeState& state, MeasurementBasis basis, SignModel model) {
  const MeasurementFrame frame(basis, state.basis());
  return outcomes_from_band_weights(band_weights(frame.to_frame(state.amplitudes())), basis,
                                    model);
}

std::size_t draw_outcome(const std::vector<std::pair<ProjectorSpec, double>>& outcomes,
                         Rng& rng) {
  double total = 0.0;
  for (const auto& o : outcomes) total += o.second;
  if (!(total > 0.0)) throw std::domain_error("draw_outcome: no outcome has positive weight");
  const double target = uniform01(rng) * total;
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].second <= 0.0) continue;
    cumulative += outcomes[i].second;
    last_positive = i;
    if (target < cumulative) return i;
  }
  return last_positive;
}

SampledOutcome sample_outcome(const TwoModeState& state, MeasurementBasis basis,
                              SignModel model, Rng& rng) {
  const MeasurementFrame frame(basis, state.basis());
  const Amplitudes psi = frame.to_frame(state.amplitudes());
  const auto outcomes = outcomes_from_band_weights(band_weights(psi), basis, model);
  const auto& [spec, probability] = outcomes[draw_outcome(outcomes, rng)];
  Amplitudes projected = apply_band_projector(psi, spec.delta, spec.branch_sign);
  projected /= projected.norm();
  return {MeasurementRecord{spec, probability},
          TwoModeState(state.basis(), frame.from_frame(projected))};
}

}  // namespace mmes
