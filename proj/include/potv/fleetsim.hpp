// ============================================================================
// fleetsim.hpp -- Monte Carlo fleet simulator
//
// Plays out the sampling experiment behind the closed forms: a run occupies
// part of a C-chip fleet, involved chips log snapshots at Poisson times, and
// the verifier draws chips every monitoring period, detecting the run when a
// drawn chip holds a snapshot from the incriminating phase inside the
// period's window. Used as the empirical oracle for the sampling calculus
// and the evasion-strategy claims.
//
// Two modeling conventions (see the corresponding closed forms):
//   * Verifier draws are i.i.d. uniform over the fleet -- the independence
//     assumption the closed forms make. The physical audit workflow samples
//     without replacement instead; at fleet scale the difference is below
//     the simulator's resolution.
//   * Fractional chip counts and fractional per-trial draw budgets are
//     realized by unbiased randomized rounding, so the simulated experiment
//     is centered on the closed form rather than biased by up to one chip.
// ============================================================================
#pragma once

#include <cstdint>
#include <vector>

#include "potv/prng.hpp"
#include "potv/sampling.hpp"

namespace potv::sim {

struct ProverStrategy {
  enum class Kind : std::uint8_t { honest_min_chips = 0, stretch = 1, spread = 2, collusion = 3 };
  Kind kind = Kind::honest_min_chips;
  double stretch_factor = 1.0;          ///< k >= 1: 1/k chips for k times as long
  double spread_days = 0.0;             ///< t <= T_mon: H/(a*t) chips for t days
  std::vector<double> collusion_shares; ///< fractions of the run per prover, sum 1

  static ProverStrategy honest() { return {}; }
  static ProverStrategy stretch(double k) {
    ProverStrategy s;
    s.kind = Kind::stretch;
    s.stretch_factor = k;
    return s;
  }
  static ProverStrategy spread(double t_days) {
    ProverStrategy s;
    s.kind = Kind::spread;
    s.spread_days = t_days;
    return s;
  }
  static ProverStrategy collusion(std::vector<double> shares) {
    ProverStrategy s;
    s.kind = Kind::collusion;
    s.collusion_shares = std::move(shares);
    return s;
  }
};

/// What counts as a detection when a drawn chip's log is read.
enum class CountMode : std::uint8_t {
  /// A snapshot logged during the current monitoring window while the run's
  /// incriminating (second-H-FLOP) phase was executing. This is the event
  /// the closed forms price.
  phase_window = 0,
  /// Any snapshot of the run visible in the log at sampling time, including
  /// first-phase ones; a strictly easier event, for sensitivity studies.
  any_snapshot = 1,
};

struct SimConfig {
  CountMode count_mode = CountMode::phase_window;
  unsigned threads = 1;  ///< trials use per-trial seeds; any thread count is deterministic
};

struct SimOutcome {
  std::uint64_t trials = 0;
  std::uint64_t detections = 0;
  double empirical_p = 0.0;
  double ci_halfwidth = 0.0;  ///< 3-sigma normal-approximation half-width
};

/// Runs `trials` independent worlds and counts in how many the verifier,
/// following `plan`, detects the strategy's run. Throws InfeasibleError for
/// strategies that do not fit the fleet.
SimOutcome simulate(const sampling::PolicyParams& params, const ProverStrategy& strategy,
                    const sampling::SamplingPlan& plan, std::uint64_t trials,
                    std::uint64_t seed, const SimConfig& cfg = {});

/// One point of the stretch-strategy study: the closed form, the ratio to
/// the unstretched detection probability, and (when trials > 0) an
/// empirical estimate from a fleet realization with b = involved/fleet.
struct SweepPoint {
  double b = 0.0;
  double stretch_k = 1.0;
  double closed_form = 0.0;
  double closed_ratio = 0.0;  ///< p_d(k) / p_d(1)
  bool simulated = false;
  SimOutcome outcome;
};

/// Evaluates the stretch grid. Empirical points use a fleet of `fleet_chips`
/// chips with a snapshot rate high enough that presence is certain, the
/// regime the stretch closed form assumes.
std::vector<SweepPoint> sweep(const std::vector<double>& b_grid,
                              const std::vector<double>& k_grid, double p,
                              std::uint64_t trials_per_point, double fleet_chips,
                              std::uint64_t seed, const SimConfig& cfg = {});

std::string render_sweep(const std::vector<SweepPoint>& points, const std::string& format);

}  // namespace potv::sim
