// commands.hpp
// simulate / enumerate / figures subcommands.

#pragma once

#include "mmes/protocol.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mmes::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kInvalidArguments = 2,
  kNodeCapExceeded = 3,
};

struct RunOptions {
  int n_atoms = 10;
  double alpha = 20.0;
  std::optional<double> tau;  // default pi / (2N)
  int max_repeats = 25;
  int rounds = 3;
  double prune = 1e-10;
  std::uint64_t seed = 0;
  std::size_t trajectories = 10000;
  std::string basis_order = "zx";
  std::string angle_rule = "line";
  std::string sign_model = "random";
  std::string initial = "x";
  std::string engine = "ensemble";
  std::size_t node_cap = 1'000'000;
  unsigned threads = 0;
  std::filesystem::path out_dir = "out";
  std::vector<std::string> figures;

  double effective_tau() const;
  /// Throws std::invalid_argument on a bad combination.
  ProtocolConfig protocol_config() const;
  TwoModeState initial_state() const;
};

int cmd_simulate(const RunOptions& options);
int cmd_enumerate(const RunOptions& options);
int cmd_figures(const RunOptions& options);

/// Parses argv and dispatches; returns the process exit code.
int run(int argc, char** argv);

const std::vector<std::string>& figure_ids();

}  // namespace mmes::cli
