#include "commands.hpp"

#include "output.hpp"

#include "mmes/analysis.hpp"
#include "mmes/qnd.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <functional>
#include <cmath>
#include <iostream>
#include <stdexcept>

#ifndef MMES_VERSION
#define MMES_VERSION "unknown"
#endif

namespace mmes::cli {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

constexpr int kSchemaVersion = 1;
constexpr int kFig3Atoms = 150;
constexpr int kAngleGrid = 721;
constexpr int kElementGrid = 361;

std::string num(double v) { return format_number(v); }
std::string num(int v) { return std::to_string(v); }
std::string num(std::size_t v) { return std::to_string(v); }

std::vector<double> angle_grid(int points) {
  std::vector<double> out(points);
  for (int i = 0; i < points; ++i) out[i] = M_PI * i / (points - 1);
  return out;
}

json config_echo(const RunOptions& o, const ProtocolConfig& config) {
  json j{{"n_atoms", o.n_atoms},
         {"alpha", o.alpha},
         {"tau", o.effective_tau()},
         {"max_repeats", o.max_repeats},
         {"rounds", o.rounds},
         {"prune", o.prune},
         {"seed", o.seed},
         {"trajectories", o.trajectories},
         {"basis_order", o.basis_order},
         {"angle_rule", o.angle_rule},
         {"sign_model", o.sign_model},
         {"initial", o.initial},
         {"node_cap", o.node_cap}};
  if (!config.angle_rule.is_line()) j["angle_table"] = config.angle_rule.angles();
  return j;
}

json base_manifest(const std::string& command, const std::string& engine, const RunOptions& o,
                   const ProtocolConfig& config) {
  return json{{"schema_version", kSchemaVersion},
              {"command", command},
              {"engine", engine},
              {"version", MMES_VERSION},
              {"config", config_echo(o, config)}};
}

void finish(OutputBundle& bundle, json manifest, const RunOptions& o, Clock::time_point start) {
  auto files = bundle.names();
  files.push_back("manifest.json");
  manifest["files"] = files;
  manifest["wall_clock_seconds"] = std::chrono::duration<double>(Clock::now() - start).count();
  bundle.add("manifest.json", manifest.dump(2) + "\n");
  bundle.commit(o.out_dir);
}

std::string basis_name(const SequenceStats& s) { return s.basis.label(); }

CsvTable marginals_table(const ProtocolStatistics& stats) {
  CsvTable t({"round", "basis", "step", "delta", "probability"});
  for (const auto& s : stats.sequences) {
    for (std::size_t j = 0; j < s.marginals.size(); ++j) {
      for (std::size_t delta = 0; delta < s.marginals[j].size(); ++delta) {
        t.add_row({num(s.round), basis_name(s), num(j + 1), num(delta), num(s.marginals[j][delta])});
      }
    }
  }
  return t;
}

CsvTable steps_table(const ProtocolStatistics& stats) {
  CsvTable t({"round", "basis", "step", "p_delta0", "f_avg"});
  for (const auto& s : stats.sequences) {
    for (std::size_t j = 0; j < s.marginals.size(); ++j) {
      t.add_row({num(s.round), basis_name(s), num(j + 1), num(s.marginals[j][0]), num(s.fidelity[j])});
    }
  }
  return t;
}

CsvTable rounds_table(const ProtocolStatistics& stats) {
  CsvTable t({"round", "p_suc", "f_avg", "first_zero_both", "converged_by", "flagged_mass"});
  for (int r = 1; r <= stats.rounds(); ++r) {
    const double flagged = stats.sequence(r, 0).flagged_mass + stats.sequence(r, 1).flagged_mass;
    t.add_row({num(r), num(success_probability(stats, r)), num(average_fidelity(stats, r)),
               num(stats.round_convergence[r - 1]), num(stats.converged_by[r - 1]), num(flagged)});
  }
  return t;
}

struct Enumeration {
  ProtocolStatistics stats;
  std::string engine;
};

Enumeration enumerate(const RunOptions& o, const ProtocolConfig& config) {
  const TwoModeState psi0 = o.initial_state();
  if (o.engine == "tree") {
    return {enumerate_tree(psi0, config, {o.prune, o.node_cap}).stats, "tree"};
  }
  return {enumerate_ensemble(psi0, config), "ensemble"};
}

void add_enumeration_fields(json& manifest, const ProtocolStatistics& stats) {
  manifest["pruned_mass"] = stats.pruned_mass;
  manifest["accounted_mass"] = stats.accounted_mass;
  manifest["node_cap_hit"] = stats.node_cap_hit;
}

void fig3_elements(OutputBundle& bundle, const std::string& id, int k) {
  const auto thetas = angle_grid(kElementGrid);
  const Eigen::MatrixXd grid = correction_element_grid(kFig3Atoms, k, thetas);
  CsvTable t({"delta", "theta", "magnitude"});
  CsvTable ridge({"delta", "theta_max", "theta_line"});
  for (Eigen::Index delta = 0; delta < grid.rows(); ++delta) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 0; i < grid.cols(); ++i) {
      t.add_row({num(static_cast<int>(delta)), num(thetas[i]), num(grid(delta, i))});
      if (grid(delta, i) > grid(delta, best)) best = i;
    }
    ridge.add_row({num(static_cast<int>(delta)), num(thetas[best]),
                   num(M_PI * static_cast<double>(delta) / kFig3Atoms)});
  }
  bundle.add(id + ".csv", t.str());
  bundle.add(id + "_ridge.csv", ridge.str());
}

struct Fig4Panel {
  std::string label;
  std::vector<OperatorStep> ops;
};

std::vector<Fig4Panel> fig4_panels() {
  const auto z = MeasurementBasis::z();
  const auto x = MeasurementBasis::x();
  using S = OperatorStep;
  return {
      {"a", {S::projector(0, z)}},
      {"b", {S::projector(1, z)}},
      {"c", {S::projector(1, z), S::correction(1, z)}},
      {"d", {S::projector(1, z), S::correction(1, z), S::projector(0, z)}},
      {"e", {S::projector(0, z), S::projector(0, x)}},
      {"f", {S::projector(0, z), S::projector(2, x)}},
      {"g", {S::projector(0, z), S::projector(2, x), S::correction(2, x)}},
      {"h", {S::projector(0, z), S::projector(2, x), S::correction(2, x), S::projector(0, x)}},
  };
}

void add_figure(OutputBundle& bundle, const std::string& id, const RunOptions& o,
                const ProtocolConfig& config, json& manifest) {
  const TwoModeState psi0 = o.initial_state();
  const SignModel model = config.sign_model;
  if (id == "fig3a") return fig3_elements(bundle, id, 0);
  if (id == "fig3b") return fig3_elements(bundle, id, 1);
  if (id == "fig3c") {
    const auto thetas = angle_grid(kAngleGrid);
    CsvTable t({"delta", "theta", "fidelity"});
    for (int delta = 0; delta <= o.n_atoms; ++delta) {
      const auto f = correction_fidelity_scan(psi0, delta, thetas, config.basis_order[0], model);
      for (std::size_t i = 0; i < thetas.size(); ++i) t.add_row({num(delta), num(thetas[i]), num(f[i])});
    }
    return bundle.add("fig3c.csv", t.str());
  }
  if (id == "fig3d") {
    const AngleRule optimized = optimized_angle_rule(psi0, config.basis_order[0], model, kAngleGrid);
    CsvTable t({"delta", "theta_max_fidelity", "theta_line", "theta_max_next_zero"});
    for (int delta = 0; delta <= o.n_atoms; ++delta) {
      t.add_row({num(delta),
                 num(fidelity_maximizing_angle(psi0, delta, config.basis_order[0], model, kAngleGrid)),
                 num(adaptive_angle(delta, o.n_atoms)), num(optimized(delta, o.n_atoms))});
    }
    return bundle.add("fig3d.csv", t.str());
  }
  if (id == "fig4") {
    CsvTable t({"panel", "grid_basis", "k1", "k2", "probability"});
    for (const auto& panel : fig4_panels()) {
      const MeasurementBasis grid_basis = panel.ops.back().basis;
      const Eigen::MatrixXd g = fock_grid(panel.ops, psi0, config.angle_rule, grid_basis);
      for (int k1 = 0; k1 < g.rows(); ++k1) {
        for (int k2 = 0; k2 < g.cols(); ++k2) {
          t.add_row({panel.label, grid_basis.label(), num(k1), num(k2), num(g(k1, k2))});
        }
      }
    }
    return bundle.add("fig4.csv", t.str());
  }
  if (id == "fig5" || id == "fig6" || id == "fig7") {
    const Enumeration e = enumerate(o, config);
    manifest["engine"] = e.engine;
    add_enumeration_fields(manifest, e.stats);
    if (id == "fig5") return bundle.add("fig5.csv", marginals_table(e.stats).str());
    CsvTable t({"round", "basis", "step", id == "fig6" ? "p_suc" : "f_avg"});
    for (const auto& s : e.stats.sequences) {
      for (std::size_t j = 0; j < s.marginals.size(); ++j) {
        const double v = id == "fig6" ? s.marginals[j][0] : s.fidelity[j];
        t.add_row({num(s.round), basis_name(s), num(j + 1), num(v)});
      }
    }
    return bundle.add(id + ".csv", t.str());
  }
  if (id == "povm") {
    CsvTable t({"alpha", "tau", "n_atoms", "relative_error", "captured_mass"});
    for (double a : {o.alpha / 4.0, o.alpha / 2.0, o.alpha}) {
      const auto r = povm_projector_distance(psi0, PovmParams::with_default_cutoff(a, o.effective_tau()));
      t.add_row({num(a), num(o.effective_tau()), num(o.n_atoms), num(r.relative_error), num(r.captured_mass)});
    }
    return bundle.add("povm.csv", t.str());
  }
  throw std::invalid_argument("unknown figure id '" + id + "'");
}

int guarded(const char* command, const std::function<int()>& body) {
  try {
    return body();
  } catch (const std::invalid_argument& e) {
    std::cerr << command << ": " << e.what() << "\n";
    return kInvalidArguments;
  } catch (const std::out_of_range& e) {
    std::cerr << command << ": " << e.what() << "\n";
    return kInvalidArguments;
  } catch (const std::exception& e) {
    std::cerr << command << ": " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace

const std::vector<std::string>& figure_ids() {
  static const std::vector<std::string> ids{"fig3a", "fig3b", "fig3c", "fig3d", "fig4",
                                            "fig5",  "fig6",  "fig7",  "povm"};
  return ids;
}

double RunOptions::effective_tau() const {
  return tau ? *tau : M_PI / (2.0 * n_atoms);
}

ProtocolConfig RunOptions::protocol_config() const {
  if (n_atoms < 1) throw std::invalid_argument("--n-atoms must be >= 1");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("--alpha must be finite and >= 0");
  if (tau && (!(*tau > 0.0) || !std::isfinite(*tau))) throw std::invalid_argument("--tau must be finite and > 0");
  if (!(prune >= 0.0)) throw std::invalid_argument("--prune must be >= 0");
  if (trajectories < 1) throw std::invalid_argument("--trajectories must be >= 1");
  if (engine != "ensemble" && engine != "tree") throw std::invalid_argument("--engine must be ensemble or tree");
  if (initial != "x" && initial != "mmes") throw std::invalid_argument("--initial must be x or mmes");

  ProtocolConfig c;
  c.n_atoms = n_atoms;
  c.max_repeats = max_repeats;
  c.max_rounds = rounds;
  c.seed = seed;
  c.sign_model = parse_sign_model(sign_model);
  if (basis_order == "zx") c.basis_order = {MeasurementBasis::z(), MeasurementBasis::x()};
  else if (basis_order == "xz") c.basis_order = {MeasurementBasis::x(), MeasurementBasis::z()};
  else throw std::invalid_argument("--basis-order must be zx or xz");
  if (angle_rule == "line") c.angle_rule = AngleRule::line();
  else if (angle_rule == "optimized") {
    c.angle_rule = optimized_angle_rule(initial_state(), c.basis_order[0], c.sign_model, kAngleGrid);
  } else {
    throw std::invalid_argument("--angle-rule must be line or optimized");
  }
  c.validate();
  return c;
}

TwoModeState RunOptions::initial_state() const {
  const FockBasis fock(n_atoms);
  return initial == "mmes" ? mmes_state(fock) : x_polarized_state(fock);
}

int cmd_simulate(const RunOptions& o) {
  return guarded("simulate", [&] {
    const auto start = Clock::now();
    const ProtocolConfig config = o.protocol_config();
    const auto mc = monte_carlo_estimates(o.initial_state(), config, o.trajectories, o.threads);

    CsvTable rounds({"round", "p_suc", "p_suc_se", "f_avg", "f_avg_se", "converged_by", "converged_by_se"});
    for (int r = 0; r < config.max_rounds; ++r) {
      rounds.add_row({num(r + 1), num(mc.success[r].mean), num(mc.success[r].standard_error),
                      num(mc.fidelity[r].mean), num(mc.fidelity[r].standard_error),
                      num(mc.converged_by[r].mean), num(mc.converged_by[r].standard_error)});
    }
    CsvTable marginals({"round", "basis", "step", "delta", "probability", "standard_error"});
    for (std::size_t s = 0; s < mc.marginals.size(); ++s) {
      const std::string basis = config.basis_order[s % 2].label();
      for (std::size_t j = 0; j < mc.marginals[s].size(); ++j) {
        for (std::size_t delta = 0; delta < mc.marginals[s][j].size(); ++delta) {
          const auto& e = mc.marginals[s][j][delta];
          marginals.add_row({num(s / 2 + 1), basis, num(j + 1), num(delta), num(e.mean), num(e.standard_error)});
        }
      }
    }
    OutputBundle bundle;
    bundle.add("simulate_rounds.csv", rounds.str());
    bundle.add("simulate_marginals.csv", marginals.str());
    json manifest = base_manifest("simulate", "monte_carlo", o, config);
    manifest["flagged_sequences"] = mc.flagged_sequences;
    finish(bundle, std::move(manifest), o, start);
    return static_cast<int>(kOk);
  });
}

int cmd_enumerate(const RunOptions& o) {
  return guarded("enumerate", [&] {
    const auto start = Clock::now();
    const ProtocolConfig config = o.protocol_config();
    const Enumeration e = enumerate(o, config);
    OutputBundle bundle;
    bundle.add("enumerate_marginals.csv", marginals_table(e.stats).str());
    bundle.add("enumerate_steps.csv", steps_table(e.stats).str());
    if (!e.stats.node_cap_hit) bundle.add("enumerate_rounds.csv", rounds_table(e.stats).str());
    json manifest = base_manifest("enumerate", e.engine, o, config);
    add_enumeration_fields(manifest, e.stats);
    manifest["initial_fidelity"] = e.stats.initial_fidelity;
    finish(bundle, std::move(manifest), o, start);
    if (e.stats.node_cap_hit) {
      std::cerr << "enumerate: node cap " << o.node_cap
                << " exceeded; partial results written, see manifest.json\n";
      return static_cast<int>(kNodeCapExceeded);
    }
    return static_cast<int>(kOk);
  });
}

int cmd_figures(const RunOptions& o) {
  return guarded("figures", [&] {
    const auto start = Clock::now();
    if (o.figures.empty()) throw std::invalid_argument("no figure id given");
    for (const auto& id : o.figures) {
      if (id != "all" && std::find(figure_ids().begin(), figure_ids().end(), id) == figure_ids().end()) {
        throw std::invalid_argument("unknown figure id '" + id + "'");
      }
    }
    std::vector<std::string> ids;
    for (const auto& id : o.figures) {
      if (id == "all") ids = figure_ids();
      else if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
    }
    const ProtocolConfig config = o.protocol_config();
    OutputBundle bundle;
    json manifest = base_manifest("figures", "direct", o, config);
    manifest["figures"] = ids;
    for (const auto& id : ids) add_figure(bundle, id, o, config, manifest);
    const bool cap = manifest.value("node_cap_hit", false);
    finish(bundle, std::move(manifest), o, start);
    return static_cast<int>(cap ? kNodeCapExceeded : kOk);
  });
}

int run(int argc, char** argv) {
  CLI::App app{"Adaptive QND preparation of the maximally entangled two-ensemble state"};
  app.set_version_flag("--version", std::string(MMES_VERSION));
  app.require_subcommand(1);
  RunOptions o;

  auto add_common = [&o](CLI::App* sub) {
    sub->add_option("--n-atoms", o.n_atoms, "atoms per ensemble N")->capture_default_str();
    sub->add_option("--alpha", o.alpha, "coherent amplitude (POVM tables)")->capture_default_str();
    sub->add_option("--tau", o.tau, "interaction time, default pi/(2N)");
    sub->add_option("--max-repeats", o.max_repeats, "L cap per sequence")->capture_default_str();
    sub->add_option("--rounds", o.rounds, "M rounds")->capture_default_str();
    sub->add_option("--seed", o.seed, "RNG seed")->capture_default_str();
    sub->add_option("--basis-order", o.basis_order, "zx or xz")->capture_default_str();
    sub->add_option("--angle-rule", o.angle_rule, "line or optimized")->capture_default_str();
    sub->add_option("--sign-model", o.sign_model, "random, plus or minus")->capture_default_str();
    sub->add_option("--initial", o.initial, "x (S^x-polarized) or mmes")->capture_default_str();
    sub->add_option("--out-dir", o.out_dir, "output directory")->capture_default_str();
  };
  auto add_enum = [&o](CLI::App* sub) {
    sub->add_option("--prune", o.prune, "tree engine: drop branches below this mass")->capture_default_str();
    sub->add_option("--engine", o.engine, "ensemble or tree")->capture_default_str();
    sub->add_option("--node-cap", o.node_cap, "tree engine: live-node limit")->capture_default_str();
  };

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo trajectories");
  add_common(simulate);
  simulate->add_option("--trajectories", o.trajectories, "number of trajectories")->capture_default_str();
  simulate->add_option("--threads", o.threads, "worker threads, 0 = all cores")->capture_default_str();
  // accepted for a uniform flag surface
  simulate->add_option("--prune", o.prune, "unused by simulate");

  auto* enumerate = app.add_subcommand("enumerate", "exact outcome-tree statistics");
  add_common(enumerate);
  add_enum(enumerate);

  auto* figures = app.add_subcommand("figures", "per-figure CSV bundles");
  add_common(figures);
  add_enum(figures);
  figures->add_option("ids", o.figures, "figure ids or 'all'")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(kInvalidArguments);
  }
  if (simulate->parsed()) return cmd_simulate(o);
  if (enumerate->parsed()) return cmd_enumerate(o);
  return cmd_figures(o);
}

}  // namespace mmes::cli
