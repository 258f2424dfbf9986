#include "mmes/protocol.hpp"

#include "mmes/rotation.hpp"

#include <cmath>

namespace mmes {

namespace {

struct SignBranch {
  int sign;
  double weight;
};

std::vector<SignBranch> sign_branches(int delta, SignModel model) {
  if (delta == 0) return {{1, 1.0}};
  switch (model) {
    case SignModel::random_parity: return {{1, 0.5}, {-1, 0.5}};
    case SignModel::all_plus: return {{1, 1.0}};
    case SignModel::all_minus: return {{-1, 1.0}};
  }
  return {{1, 1.0}};
}

double frame_fidelity(const Amplitudes& mmes_frame, const Amplitudes& psi) {
  return std::norm((mmes_frame.conjugate().cwiseProduct(psi)).sum());
}

// e^{+i S^y theta/2} = exp(-i S^y (-theta)/2)
Eigen::MatrixXcd correction_operator(double theta, const FockBasis& fock) {
  return y_rotation_matrix(-theta, fock).cast<cplx>();
}

}  // namespace

AngleRule AngleRule::line() { return AngleRule({}, "line"); }

AngleRule AngleRule::table(std::vector<double> angles, std::string name) {
  if (angles.empty()) throw std::invalid_argument("AngleRule::table: empty angle table");
  if (angles[0] != 0.0) throw std::invalid_argument("AngleRule::table: angle for Delta=0 must be 0");
  return AngleRule(std::move(angles), std::move(name));
}

double AngleRule::operator()(int delta, int n_atoms) const {
  if (table_.empty()) return adaptive_angle(delta, n_atoms);
  if (delta < 0 || delta >= static_cast<int>(table_.size()) || delta > n_atoms) {
    throw std::out_of_range("AngleRule: Delta=" + std::to_string(delta) + " not covered by table");
  }
  return table_[delta];
}

double adaptive_angle(int delta, int n_atoms) {
  if (delta < 0 || delta > n_atoms) {
    throw std::out_of_range("adaptive_angle: Delta=" + std::to_string(delta) + " outside [0, " +
                            std::to_string(n_atoms) + "]");
  }
  if (delta == 0) return 0.0;
  return M_PI * delta / n_atoms;
}

void ProtocolConfig::validate() const {
  if (n_atoms < 1) throw std::invalid_argument("n_atoms must be >= 1");
  if (max_repeats < 1) throw std::invalid_argument("max_repeats (L) must be >= 1");
  if (max_rounds < 1) throw std::invalid_argument("max_rounds (M) must be >= 1");
  if (!angle_rule.is_line() && static_cast<int>(angle_rule.angles().size()) != n_atoms + 1) {
    throw std::invalid_argument("angle table must have N+1 entries");
  }
  for (int delta = 0; delta <= n_atoms; ++delta) {
    if (!std::isfinite(angle_rule(delta, n_atoms))) {
      throw std::invalid_argument("angle rule produced a non-finite angle");
    }
  }
}

TwoModeState apply_correction(const TwoModeState& state, const MeasurementRecord& preceding,
                              MeasurementBasis basis, const AngleRule& rule) {
  if (!(preceding.spec.basis == basis)) {
    throw ProtocolOrderError("correction in basis " + basis.label() +
                             " follows a measurement in basis " + preceding.spec.basis.label());
  }
  const int delta = preceding.spec.delta;
  if (delta == 0) return state;
  const MeasurementFrame frame(basis, state.basis());
  const Amplitudes corrected = correction_operator(rule(delta, state.n_atoms()), state.basis()) *
                               frame.to_frame(state.amplitudes());
  return TwoModeState(state.basis(), frame.from_frame(corrected));
}

bool SubSequenceRecord::first_was_zero() const {
  return !measurements.empty() && measurements.front().spec.delta == 0;
}

double SubSequenceRecord::probability() const {
  double p = 1.0;
  for (const auto& m : measurements) p *= m.born_probability;
  return p;
}

Protocol::Protocol(ProtocolConfig config)
    : config_(std::move(config)),
      fock_(config_.n_atoms),
      frames_{MeasurementFrame(config_.basis_order[0], fock_),
              MeasurementFrame(config_.basis_order[1], fock_)} {
  config_.validate();
  corrections_.reserve(fock_.single_dim());
  for (int delta = 0; delta <= fock_.n_atoms(); ++delta) {
    corrections_.push_back(correction_operator(config_.angle_rule(delta, fock_.n_atoms()), fock_));
  }
}

std::pair<TwoModeState, SubSequenceRecord> Protocol::repeat_until_success(
    const TwoModeState& state, int basis_index, Rng& rng) const {
  if (!(state.basis() == fock_)) throw DimensionError("repeat_until_success: state/config N mismatch");
  const MeasurementFrame& frame = frames_[basis_index];
  SubSequenceRecord record;
  record.basis = frame.basis();

  Amplitudes psi = frame.to_frame(state.amplitudes());
  for (int step = 1; step <= config_.max_repeats; ++step) {
    const auto outcomes =
        outcomes_from_band_weights(band_weights(psi), frame.basis(), config_.sign_model);
    const auto& [spec, probability] = outcomes[draw_outcome(outcomes, rng)];
    psi = apply_band_projector(psi, spec.delta, spec.branch_sign);
    psi /= psi.norm();
    record.measurements.push_back({spec, probability});

    if (spec.delta != 0) {
      psi = corrections_[spec.delta] * psi;
      record.corrections.push_back(
          {spec.delta, config_.angle_rule(spec.delta, fock_.n_atoms())});
    }
    record.fidelity_after_step.push_back(frame_fidelity(frame.mmes_in_frame(), psi));
    if (spec.delta == 0) break;
    if (step == config_.max_repeats) record.hit_cap = true;
  }
  return {TwoModeState(fock_, frame.from_frame(psi)), std::move(record)};
}

SequenceRecord Protocol::run(const TwoModeState& initial, Rng& rng) const {
  if (!initial.is_normalized(1e-10)) throw std::invalid_argument("run_protocol: initial state not normalized");
  if (!(initial.basis() == fock_)) throw DimensionError("run_protocol: state/config N mismatch");

  SequenceRecord out{{}, initial, 1.0, std::nullopt, 0.0};
  TwoModeState state = initial;
  for (int round = 1; round <= config_.max_rounds; ++round) {
    RoundRecord rr;
    for (int b = 0; b < 2; ++b) {
      auto [next, sub] = repeat_until_success(state, b, rng);
      state = std::move(next);
      out.probability *= sub.probability();
      rr.sequences[b] = std::move(sub);
    }
    rr.fidelity_after = mmes_fidelity(state);
    if (!out.converged_at && rr.sequences[0].first_was_zero() && rr.sequences[1].first_was_zero()) {
      out.converged_at = round;
    }
    out.rounds.push_back(std::move(rr));
  }
  out.terminal_fidelity = mmes_fidelity(state);
  out.terminal = std::move(state);
  return out;
}

std::pair<TwoModeState, SubSequenceRecord> repeat_until_success(const TwoModeState& state,
                                                                MeasurementBasis basis,
                                                                const ProtocolConfig& config,
                                                                Rng& rng) {
  if (!state.is_normalized(1e-10)) {
    throw std::invalid_argument("repeat_until_success: state not normalized");
  }
  ProtocolConfig single = config;
  single.basis_order = {basis, basis};
  return Protocol(single).repeat_until_success(state, 0, rng);
}

SequenceRecord run_protocol(const TwoModeState& initial, const ProtocolConfig& config, Rng& rng) {
  return Protocol(config).run(initial, rng);
}

double kraus_weight(const ProjectorSpec& spec, SignModel model) {
  return (spec.delta != 0 && model == SignModel::random_parity) ? std::sqrt(0.5) : 1.0;
}

TwoModeState replay_unnormalized(const TwoModeState& initial, const SequenceRecord& record,
                                 const ProtocolConfig& config) {
  const FockBasis& fock = initial.basis();
  Amplitudes psi = initial.amplitudes();
  for (const auto& round : record.rounds) {
    for (const auto& sub : round.sequences) {
      const MeasurementFrame frame(sub.basis, fock);
      Amplitudes f = frame.to_frame(psi);
      std::size_t next_correction = 0;
      for (const auto& m : sub.measurements) {
        f = kraus_weight(m.spec, config.sign_model) *
            apply_band_projector(f, m.spec.delta, m.spec.branch_sign);
        if (m.spec.delta != 0) {
          f = correction_operator(sub.corrections.at(next_correction++).angle, fock) * f;
        }
      }
      psi = frame.from_frame(f);
    }
  }
  return TwoModeState(fock, psi);
}

std::vector<double> correction_fidelity_scan(const TwoModeState& state, int delta,
                                             const std::vector<double>& thetas,
                                             MeasurementBasis basis, SignModel model) {
  const auto spec = make_projector(delta, 1, basis, state.n_atoms());
  const MeasurementFrame frame(basis, state.basis());
  const Amplitudes psi = frame.to_frame(state.amplitudes());
  const auto branches = sign_branches(spec.delta, model);

  std::vector<double> out;
  out.reserve(thetas.size());
  for (double theta : thetas) {
    const Eigen::MatrixXcd u = correction_operator(theta, state.basis());
    double overlap = 0.0;
    double mass = 0.0;
    for (const auto& b : branches) {
      const Amplitudes h = u * apply_band_projector(psi, delta, b.sign);
      overlap += b.weight * frame_fidelity(frame.mmes_in_frame(), h);
      mass += b.weight * h.squaredNorm();
    }
    out.push_back(mass > 0.0 ? overlap / mass : 0.0);
  }
  return out;
}

double fidelity_maximizing_angle(const TwoModeState& state, int delta, MeasurementBasis basis,
                                 SignModel model, int grid_points) {
  if (grid_points < 2) throw std::invalid_argument("fidelity_maximizing_angle: need >= 2 grid points");
  std::vector<double> thetas(grid_points);
  for (int i = 0; i < grid_points; ++i) thetas[i] = M_PI * i / (grid_points - 1);
  const auto f = correction_fidelity_scan(state, delta, thetas, basis, model);
  std::size_t best = 0;
  for (std::size_t i = 1; i < f.size(); ++i) {
    if (f[i] > f[best] + 1e-15) best = i;
  }
  return thetas[best];
}

double next_step_zero_probability(const TwoModeState& state, int delta, double theta,
                                  MeasurementBasis basis, SignModel model) {
  const auto spec = make_projector(delta, 1, basis, state.n_atoms());
  const MeasurementFrame frame(basis, state.basis());
  const Amplitudes psi = frame.to_frame(state.amplitudes());
  const Eigen::MatrixXcd u = correction_operator(theta, state.basis());
  double zero = 0.0;
  double mass = 0.0;
  for (const auto& b : sign_branches(spec.delta, model)) {
    const Amplitudes h = u * apply_band_projector(psi, delta, b.sign);
    zero += b.weight * h.diagonal().squaredNorm();
    mass += b.weight * h.squaredNorm();
  }
  return mass > 0.0 ? zero / mass : 0.0;
}

AngleRule optimized_angle_rule(const TwoModeState& reference, MeasurementBasis basis,
                               SignModel model, int grid_points) {
  if (grid_points < 2) throw std::invalid_argument("optimized_angle_rule: need >= 2 grid points");
  const int n = reference.n_atoms();
  std::vector<double> angles(n + 1, 0.0);
  for (int delta = 1; delta <= n; ++delta) {
    double best_theta = adaptive_angle(delta, n);
    double best = -1.0;
    for (int i = 0; i < grid_points; ++i) {
      const double theta = M_PI * i / (grid_points - 1);
      const double p = next_step_zero_probability(reference, delta, theta, basis, model);
      if (p > best + 1e-15) {
        best = p;
        best_theta = theta;
      }
    }
    if (best > 0.0) angles[delta] = best_theta;
    else angles[delta] = adaptive_angle(delta, n);
  }
  return AngleRule::table(std::move(angles), "optimized");
}

}  // namespace mmes
