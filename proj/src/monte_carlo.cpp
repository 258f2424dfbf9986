#include "mmes/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace mmes {

namespace {

constexpr std::size_t kChunk = 512;

struct Tally {
  std::vector<double> success;       // per round, counts
  std::vector<double> fidelity;      // per round, sum
  std::vector<double> fidelity_sq;   // per round, sum of squares
  std::vector<double> converged_by;  // per round, counts
  std::vector<double> first_zero;    // per sequence position, counts
  std::vector<std::vector<std::vector<double>>> marginals;  // [seq][step][Delta] counts
  std::size_t flagged = 0;

  Tally(int rounds, int steps, int d)
      : success(rounds, 0.0),
        fidelity(rounds, 0.0),
        fidelity_sq(rounds, 0.0),
        converged_by(rounds, 0.0),
        first_zero(2 * rounds, 0.0),
        marginals(2 * rounds, std::vector<std::vector<double>>(steps, std::vector<double>(d, 0.0))) {}

  void add(const Tally& o) {
    auto acc = [](std::vector<double>& a, const std::vector<double>& b) {
      for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    };
    acc(success, o.success);
    acc(fidelity, o.fidelity);
    acc(fidelity_sq, o.fidelity_sq);
    acc(converged_by, o.converged_by);
    acc(first_zero, o.first_zero);
    for (std::size_t s = 0; s < marginals.size(); ++s) {
      for (std::size_t j = 0; j < marginals[s].size(); ++j) acc(marginals[s][j], o.marginals[s][j]);
    }
    flagged += o.flagged;
  }
};

void record(Tally& t, const SequenceRecord& rec) {
  for (std::size_t r = 0; r < rec.rounds.size(); ++r) {
    const auto& round = rec.rounds[r];
    const auto& last = round.sequences[1];
    if (!last.hit_cap) t.success[r] += 1.0;
    t.fidelity[r] += round.fidelity_after;
    t.fidelity_sq[r] += round.fidelity_after * round.fidelity_after;
    if (rec.converged_at && *rec.converged_at <= static_cast<int>(r) + 1) t.converged_by[r] += 1.0;
    for (int b = 0; b < 2; ++b) {
      const auto& sub = round.sequences[b];
      const std::size_t s = 2 * r + b;
      if (sub.hit_cap) ++t.flagged;
      if (sub.first_was_zero()) t.first_zero[s] += 1.0;
      auto& rows = t.marginals[s];
      for (std::size_t j = 0; j < rows.size(); ++j) {
        const int delta = j < sub.measurements.size() ? sub.measurements[j].spec.delta : 0;
        rows[j][delta] += 1.0;
      }
    }
  }
}

Estimate proportion(double count, double n) {
  const double p = count / n;
  return {p, std::sqrt(std::max(p * (1.0 - p), 0.0) / n)};
}

}  // namespace

MonteCarloResult monte_carlo_estimates(const TwoModeState& initial, const ProtocolConfig& config,
                                       std::size_t n_trajectories, unsigned threads) {
  if (n_trajectories < 1) throw std::invalid_argument("monte_carlo_estimates: need >= 1 trajectory");
  if (!initial.is_normalized(1e-10)) {
    throw std::invalid_argument("monte_carlo_estimates: initial state not normalized");
  }
  const Protocol protocol(config);
  if (!(initial.basis() == protocol.fock())) throw DimensionError("monte_carlo_estimates: state/config N mismatch");
  const int rounds = config.max_rounds;
  const int steps = config.max_repeats;
  const int d = protocol.fock().single_dim();

  const std::size_t n_chunks = (n_trajectories + kChunk - 1) / kChunk;
  std::vector<Tally> chunks(n_chunks, Tally(rounds, steps, d));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t c = next++; c < n_chunks; c = next++) {
      const std::size_t end = std::min(n_trajectories, (c + 1) * kChunk);
      for (std::size_t i = c * kChunk; i < end; ++i) {
        Rng rng = make_stream(config.seed, i);
        record(chunks[c], protocol.run(initial, rng));
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n_chunks));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  Tally total(rounds, steps, d);
  for (const auto& c : chunks) total.add(c);

  const double n = static_cast<double>(n_trajectories);
  MonteCarloResult out;
  out.trajectories = n_trajectories;
  out.flagged_sequences = total.flagged;
  for (int r = 0; r < rounds; ++r) {
    out.success.push_back(proportion(total.success[r], n));
    const double mean = total.fidelity[r] / n;
    const double var = n > 1 ? std::max(total.fidelity_sq[r] / n - mean * mean, 0.0) * n / (n - 1) : 0.0;
    out.fidelity.push_back({mean, std::sqrt(var / n)});
    out.converged_by.push_back(proportion(total.converged_by[r], n));
  }
  for (std::size_t s = 0; s < total.first_zero.size(); ++s) {
    out.first_zero.push_back(proportion(total.first_zero[s], n));
    std::vector<std::vector<Estimate>> rows;
    for (const auto& row : total.marginals[s]) {
      std::vector<Estimate> est;
      for (double count : row) est.push_back(proportion(count, n));
      rows.push_back(std::move(est));
    }
    out.marginals.push_back(std::move(rows));
  }
  return out;
}

}  // namespace mmes
