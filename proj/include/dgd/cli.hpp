#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dgd/envelope.hpp"
#include "dgd/games.hpp"
#include "dgd/solver.hpp"
#include "json.hpp"

namespace dgd::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kNotConverged = 2,
  kIncompatible = 3,
  kBadInitialState = 4,
  kUnsupported = 5,
};

/// Everything a command needs. Serializes to and from one JSON document; unknown keys are rejected.
struct RunConfig {
  std::string command;
  std::string game = "p3";
  /// Family parameters, keys per family (p1: m, alpha[], beta, r, pure_control;
  /// p2: m, alpha, beta[], c_d, k_d, damping, reduction; p3: alpha, eps_target).
  nlohmann::json params = nlohmann::json::object();

  std::vector<Interval> bounds{{-2.0, 2.0}};
  std::vector<std::size_t> res{41};
  std::vector<Interval> query_bounds;
  std::vector<std::size_t> query_res{21};

  double tol = 1e-6;
  std::size_t max_iters = 5000;
  std::string order = "upper";
  std::string sweep = "gauss_seidel";
  std::string boundary = "evasion";
  double time_step = 0.0;
  unsigned threads = 1;
  /// Control samples per axis for solves and for Hamiltonian checks.
  std::size_t solve_control_samples = 3;
  std::size_t control_samples = 21;

  /// 0 selects the full game; j selects the reduced game for target label j.
  int reduced = 0;
  std::vector<double> point;
  std::vector<std::string> inputs;

  double tol_eq = 0.0;
  std::size_t weights_per_axis = 10;
  double radius = 0.0;
  std::size_t samples = 64;
  double tol_numeric = 0.01;
  std::size_t dirichlet_samples = 200;
  std::size_t max_points = 200;
  bool analytic = false;
  double viscosity_tol = 0.1;

  double dt = 0.0;
  double t_max = 20.0;
  std::string policy = "envelope";

  std::uint64_t seed = 1;
  std::string out = "out";

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
};

/// Command-line entry point; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Commands on resolved configs. Artifacts go to config.out.
int cmd_solve(const RunConfig& config, std::ostream& out);
int cmd_envelope(const RunConfig& config, std::ostream& out);
int cmd_check(const RunConfig& config, std::ostream& out);
int cmd_simulate(const RunConfig& config, std::ostream& out);
int cmd_oracle(const RunConfig& config, std::ostream& out);

}  // namespace dgd::cli
