#include "mmes/analysis.hpp"

#include "mmes/rotation.hpp"

#include <stdexcept>
#include <string>

namespace mmes {

Eigen::MatrixXd fock_grid(const std::vector<OperatorStep>& ops, const TwoModeState& initial,
                          const AngleRule& rule, MeasurementBasis grid_basis) {
  const FockBasis& fock = initial.basis();
  Amplitudes psi = initial.amplitudes();
  for (const auto& op : ops) {
    const MeasurementFrame frame(op.basis, fock);
    Amplitudes f = frame.to_frame(psi);
    if (op.kind == OperatorStep::Kind::projector) {
      const auto spec = make_projector(op.delta, op.sign, op.basis, fock.n_atoms());
      f = apply_band_projector(f, spec.delta, spec.branch_sign);
    } else {
      const double theta = rule(op.delta, fock.n_atoms());
      f = y_rotation_matrix(-theta, fock).cast<cplx>() * f;
    }
    psi = frame.from_frame(f);
  }
  return MeasurementFrame(grid_basis, fock).to_frame(psi).cwiseAbs2();
}

Eigen::MatrixXd correction_element_grid(int n_atoms, int k, const std::vector<double>& thetas) {
  const FockBasis fock(n_atoms);
  if (k < 0 || k > n_atoms) throw std::out_of_range("correction_element_grid: k outside [0, N]");
  Eigen::MatrixXd out(n_atoms - k + 1, thetas.size());
  for (std::size_t t = 0; t < thetas.size(); ++t) {
    const Eigen::MatrixXd r = y_rotation_matrix(-thetas[t], fock);
    for (int delta = 0; delta <= n_atoms - k; ++delta) out(delta, t) = std::abs(r(k + delta, k));
  }
  return out;
}

const SequenceStats& ProtocolStatistics::sequence(int round, int basis_index) const {
  const int index = 2 * (round - 1) + basis_index;
  if (round < 1 || basis_index < 0 || basis_index > 1 ||
      index >= static_cast<int>(sequences.size())) {
    throw std::out_of_range("no statistics for round " + std::to_string(round) + ", basis " +
                            std::to_string(basis_index));
  }
  return sequences[index];
}

double marginal_probability(const ProtocolStatistics& stats, int round, int basis_index, int step,
                            int delta) {
  const auto& seq = stats.sequence(round, basis_index);
  if (step < 1 || step > static_cast<int>(seq.marginals.size())) {
    throw std::out_of_range("marginal_probability: step " + std::to_string(step) +
                            " beyond enumerated depth " + std::to_string(seq.marginals.size()));
  }
  const auto& row = seq.marginals[step - 1];
  if (delta < 0 || delta >= static_cast<int>(row.size())) {
    throw std::out_of_range("marginal_probability: Delta out of range");
  }
  return row[delta];
}

double success_probability(const ProtocolStatistics& stats, int round) {
  return stats.sequence(round, 1).success();
}

double average_fidelity(const ProtocolStatistics& stats, int round) {
  if (round == 0) return stats.initial_fidelity;
  if (round < 1 || round > stats.rounds()) {
    throw std::out_of_range("average_fidelity: round " + std::to_string(round) + " not enumerated");
  }
  return stats.round_fidelity[round - 1];
}

namespace {

struct Branch {
  TreeNode node;
  Amplitudes frame_amplitudes;
  bool round_ok = true;
};

}  // namespace

TreeResult enumerate_tree(const TwoModeState& initial, const ProtocolConfig& config,
                          const TreeOptions& options) {
  config.validate();
  if (!(options.prune_threshold >= 0.0)) throw std::invalid_argument("prune threshold must be >= 0");
  if (!initial.is_normalized(1e-10)) throw std::invalid_argument("enumerate_tree: initial state not normalized");
  const Protocol protocol(config);
  if (!(initial.basis() == protocol.fock())) throw DimensionError("enumerate_tree: state/config N mismatch");
  const FockBasis& fock = protocol.fock();
  const int d = fock.single_dim();
  const int L = config.max_repeats;

  TreeResult result{{}, {}};
  ProtocolStatistics& stats = result.stats;
  stats.n_atoms = fock.n_atoms();
  stats.initial_fidelity = mmes_fidelity(initial);

  std::vector<Branch> branches;
  branches.push_back({TreeNode{initial, {}, 1.0, 0, 0, 0, false, std::nullopt}, {}, true});
  double pruned = 0.0;

  auto finish = [&](std::vector<Branch>& bs) {
    double accounted = 0.0;
    for (auto& b : bs) {
      accounted += b.node.mass;
      result.terminals.push_back(std::move(b.node));
    }
    stats.pruned_mass = pruned;
    stats.accounted_mass = accounted;
    return result;
  };

  for (int round = 1; round <= config.max_rounds; ++round) {
    for (auto& b : branches) b.round_ok = true;
    for (int bi = 0; bi < 2; ++bi) {
      const MeasurementFrame& frame = protocol.frame(bi);
      const Amplitudes& mf = frame.mmes_in_frame();
      SequenceStats seq;
      seq.round = round;
      seq.basis_index = bi;
      seq.basis = frame.basis();

      std::vector<Branch> live;
      std::vector<Branch> done;
      for (auto& b : branches) {
        b.frame_amplitudes = frame.to_frame(b.node.state.amplitudes());
        b.node.round = round;
        b.node.basis_index = bi;
        b.node.repeat = 0;
        live.push_back(std::move(b));
      }
      branches.clear();

      double done_mass = 0.0;
      for (int step = 1; step <= L; ++step) {
        std::vector<double> row(d, 0.0);
        row[0] = done_mass;
        std::vector<Branch> next;
        for (auto& parent : live) {
          const auto outcomes = outcomes_from_band_weights(band_weights(parent.frame_amplitudes),
                                                           frame.basis(), config.sign_model);
          for (const auto& [spec, mass] : outcomes) {
            if (mass <= 0.0) continue;
            if (mass < options.prune_threshold) {
              pruned += mass;
              continue;
            }
            Branch child{parent.node, {}, parent.round_ok};
            child.frame_amplitudes =
                kraus_weight(spec, config.sign_model) *
                apply_band_projector(parent.frame_amplitudes, spec.delta, spec.branch_sign);
            child.node.mass = mass;
            child.node.repeat = step;
            child.node.path.push_back({spec, mass / parent.node.mass});
            row[spec.delta] += mass;
            if (spec.delta == 0) {
              done_mass += mass;
              done.push_back(std::move(child));
              continue;
            }
            if (step == 1) child.round_ok = false;
            child.frame_amplitudes = protocol.correction_matrix(spec.delta) * child.frame_amplitudes;
            if (step == L) {
              child.node.flagged = true;
              seq.flagged_mass += mass;
              done.push_back(std::move(child));
            } else {
              next.push_back(std::move(child));
            }
          }
        }
        double fid = 0.0;
        for (const auto* group : {&done, &next}) {
          for (const auto& b : *group) fid += std::norm(mf.conjugate().cwiseProduct(b.frame_amplitudes).sum());
        }
        seq.marginals.push_back(std::move(row));
        seq.fidelity.push_back(fid);

        if (next.size() + done.size() > options.node_cap) {
          stats.node_cap_hit = true;
          stats.sequences.push_back(std::move(seq));
          for (auto& b : next) done.push_back(std::move(b));
          for (auto& b : done) b.node.state = TwoModeState(fock, frame.from_frame(b.frame_amplitudes));
          return finish(done);
        }
        live = std::move(next);
      }

      for (auto& b : done) {
        b.node.state = TwoModeState(fock, frame.from_frame(b.frame_amplitudes));
        b.frame_amplitudes.resize(0, 0);
        branches.push_back(std::move(b));
      }
      stats.sequences.push_back(std::move(seq));
    }

    double fid = 0.0;
    double conv = 0.0;
    double converged = 0.0;
    for (auto& b : branches) {
      fid += b.node.mass * mmes_fidelity(b.node.state);
      if (b.round_ok) {
        conv += b.node.mass;
        if (!b.node.converged_at) b.node.converged_at = round;
      }
      if (b.node.converged_at) converged += b.node.mass;
    }
    stats.round_fidelity.push_back(fid);
    stats.round_convergence.push_back(conv);
    stats.converged_by.push_back(converged);
  }
  return finish(branches);
}

}  // namespace mmes
