#pragma once

#include "shapeopt/descent.hpp"
#include "shapeopt/flow.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace shapeopt {

enum class DescentMethod { Winf, Plap };

std::string to_string(DescentMethod m);
DescentMethod parse_method(const std::string& s);

struct RunConfig {
  DescentMethod method = DescentMethod::Winf;
  int steps = 50;
  double sigma0 = 0.3;
  /// Stop once |<J', u>| < sigma * eps1. Off by default.
  std::optional<double> eps1;
  /// Multiplies J' before the descent solve. For p-Laplace without sigma
  /// matching it is also scaled by sigma / sigma0 so that rejections shorten
  /// steps.
  double derivative_scale = 1.0;
  /// p-Laplace only: rescale J' during continuation so that max |Du| lands
  /// near sigma, giving both methods the same gradient budget per step.
  bool plap_match_sigma = true;
  int max_state_failures = 10;
  FlowConfig flow;
  AdmmConfig admm;
  PlapConfig plap;
  /// history.csv, timing.csv and snapshots go here when set.
  std::optional<std::filesystem::path> output_dir;
  bool snapshots = false;
  /// Progress lines (one per step) when set.
  std::ostream* log = nullptr;
  /// Test hook: flip the computed direction to force a rejection.
  bool negate_direction = false;
};

/// One row per outer iteration; row 0 describes the initial geometry.
struct StepRecord {
  int k = 0;
  double J = 0;        ///< energy of the current geometry after the decision
  double J_rel = 1;    ///< J / J0
  double J_trial = 0;  ///< energy of the trial geometry (NaN if the state solve failed)
  double directional = 0;
  double sigma = 0;  ///< sigma used for this step
  bool accepted = true;
  bool descent_converged = true;
  int descent_iterations = 0;
  int doublings = 0;
  int newton_iterations = 0;
  int linear_solves = 0;
  int state_newton = 0;
  double edge_ratio = 1;
  double min_det = 1;
  double max_gradient = 0;
  double max_q = 0;  ///< max cellwise |q| of the ADMM bound variable (winf only)
  double constraint_violation = 0;  ///< max_i |g_i| / scale_i of the step
  double area_drift = 0;            ///< relative to the initial geometry
  double barycenter_drift = 0;      ///< relative to the initial diameter
  double wall_time = 0;             ///< seconds, excluded from history.csv
};

struct RunHistory {
  DescentMethod method = DescentMethod::Winf;
  double J0 = 0;
  std::vector<StepRecord> steps;

  /// Deterministic columns only.
  void write_csv(std::ostream& os) const;
  void write_timing_csv(std::ostream& os) const;
  static std::string csv_header();
};

struct RunResult {
  TriMesh mesh;
  FlowSolution state;
  RunHistory history;
};

/// Descent loop with step rejection and sigma halving.
RunResult optimize(const TriMesh& mesh0, const RunConfig& cfg);

/// Reads a history.csv written by RunHistory::write_csv.
RunHistory read_history_csv(std::istream& is);

}  // namespace shapeopt
