// analysis.hpp
// Exact and sampled statistics of the protocol: Fock-grid distributions for
// operator strings, marginal and success probabilities, average fidelity.
//
// Two exact engines expand the same outcome tree. enumerate_tree keeps one
// pure state per branch (small configurations only). enumerate_ensemble sums
// the branches of each protocol class into a density operator, which is what
// makes N = 10, M = 3 tractable.

#pragma once

#include "mmes/fock.hpp"
#include "mmes/protocol.hpp"
#include "mmes/qnd.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <vector>

namespace mmes {

/// One factor of an operator string.
struct OperatorStep {
  enum class Kind { projector, correction };
  Kind kind = Kind::projector;
  int delta = 0;
  int sign = 1;  // projector branch sign
  MeasurementBasis basis = MeasurementBasis::z();

  static OperatorStep projector(int delta, MeasurementBasis basis, int sign = 1) {
    return {Kind::projector, delta, sign, basis};
  }
  static OperatorStep correction(int delta, MeasurementBasis basis) {
    return {Kind::correction, delta, 1, basis};
  }
};

/// Applies `ops` to `initial` in list order (first element acts first) and
/// returns p(k1,k2) = |psi(k1,k2)|^2 of the unnormalized result, with
/// (k1,k2) read in the frame of `grid_basis`.
Eigen::MatrixXd fock_grid(const std::vector<OperatorStep>& ops, const TwoModeState& initial,
                          const AngleRule& rule = AngleRule::line(),
                          MeasurementBasis grid_basis = MeasurementBasis::z());

/// |<k+Delta| e^{i S^y theta/2} |k>| for Delta = 0..N-k (rows) over `thetas`
/// (columns).
Eigen::MatrixXd correction_element_grid(int n_atoms, int k, const std::vector<double>& thetas);

/// Statistics of one repeat-until-success sequence position (round, basis).
struct SequenceStats {
  int round = 1;
  int basis_index = 0;
  MeasurementBasis basis;
  // marginals[j][Delta] = p(Delta_{j+1} = Delta); sequences that already
  // stopped on Delta = 0 count as Delta = 0 at every later step.
  std::vector<std::vector<double>> marginals;
  std::vector<double> fidelity;  // average fidelity after each step
  double flagged_mass = 0.0;     // mass that reached the L cap

  double first_zero() const { return marginals.front()[0]; }
  double success() const { return marginals.back()[0]; }
};

struct ProtocolStatistics {
  int n_atoms = 0;
  double initial_fidelity = 0.0;
  std::vector<SequenceStats> sequences;   // round-major, basis_order within a round
  std::vector<double> round_fidelity;     // F_avg after round r
  std::vector<double> round_convergence;  // p(first outcome 0 in both bases of round r)
  std::vector<double> converged_by;       // p(converged_at <= r)
  double pruned_mass = 0.0;
  double accounted_mass = 1.0;
  bool node_cap_hit = false;

  int rounds() const { return static_cast<int>(round_fidelity.size()); }
  const SequenceStats& sequence(int round, int basis_index) const;
};

/// p(Delta_step = delta) for the sequence (round, basis_index); step is 1-based.
/// Throws std::out_of_range when the statistics do not reach that depth.
double marginal_probability(const ProtocolStatistics& stats, int round, int basis_index, int step,
                            int delta);

/// p_suc after round r: p(Delta_L = 0) of the round's last sequence.
double success_probability(const ProtocolStatistics& stats, int round);

/// F_avg after round r (r = 0 gives the initial state's fidelity).
double average_fidelity(const ProtocolStatistics& stats, int round);

struct TreeNode {
  TwoModeState state;  // unnormalized, lab frame
  std::vector<MeasurementRecord> path;
  double mass = 0.0;
  int round = 0;
  int repeat = 0;
  int basis_index = 0;
  bool flagged = false;
  std::optional<int> converged_at;
};

struct TreeOptions {
  double prune_threshold = 1e-10;
  std::size_t node_cap = 1'000'000;
};

struct TreeResult {
  std::vector<TreeNode> terminals;
  ProtocolStatistics stats;
};

/// Breadth-first expansion over (Delta, sign) outcomes. Branches lighter than
/// the threshold are dropped and tallied. Exceeding the node cap stops the
/// expansion and returns partial statistics with node_cap_hit set.
TreeResult enumerate_tree(const TwoModeState& initial, const ProtocolConfig& config,
                          const TreeOptions& options = {});

/// Same statistics from class-aggregated density operators. Exact; nothing
/// is pruned.
ProtocolStatistics enumerate_ensemble(const TwoModeState& initial, const ProtocolConfig& config);

struct Estimate {
  double mean = 0.0;
  double standard_error = 0.0;
};

struct MonteCarloResult {
  std::size_t trajectories = 0;
  std::vector<Estimate> success;      // per round
  std::vector<Estimate> fidelity;     // per round
  std::vector<Estimate> converged_by; // per round
  // first_zero[s] and marginals[s][j][Delta] per sequence position s
  std::vector<Estimate> first_zero;
  std::vector<std::vector<std::vector<Estimate>>> marginals;
  std::size_t flagged_sequences = 0;
};

/// Samples `n_trajectories` protocol runs. Trajectory i draws from
/// make_stream(config.seed, i); work is split into fixed chunks reduced in
/// order, so results do not depend on `threads` (0 = hardware concurrency).
MonteCarloResult monte_carlo_estimates(const TwoModeState& initial, const ProtocolConfig& config,
                                       std::size_t n_trajectories, unsigned threads = 0);

}  // namespace mmes
