// ============================================================================
// sampling.hpp -- closed-form inspection-sampling calculus
//
// How many chips does a verifier have to sample per monitoring period to
// catch, with probability p, at least one snapshot-bearing chip from a
// training run of H FLOPs executed on a fleet of C chips? These are the
// closed forms behind the published sample-count table, plus the two
// evasion-strategy curves (stretching a run over fewer chips, spreading it
// over more chips).
//
// Conventions:
//   * All probability arithmetic uses log1p/expm1 formulations; the
//     involvement odds q can be ~1e-5 and naive 1-x forms would cancel.
//   * The monitoring period (T_mon, days between sampling rounds) and the
//     training duration (T_train, days the run spans) are distinct
//     parameters. Sample counts scale with T_mon/T_train.
// ============================================================================
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace potv::sampling {

/// Raised when a scenario cannot be realized (e.g. the training run would
/// need more chips than the fleet contains).
class InfeasibleError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Parameters of one monitoring scenario.
struct PolicyParams {
  double training_flops = 0;      ///< H, total FLOPs of the run to detect
  double fleet_chips = 0;         ///< C, chips owned by the audited party
  double chip_flops_per_day = 0;  ///< a, per-chip throughput (FLOPs/day)
  double snapshot_rate = 0;       ///< f, expected snapshots per chip-day
  double detect_prob = 0;         ///< p, target detection probability in [0,1)
  double monitoring_days = 0;     ///< T_mon, days between sampling rounds
  double training_days = 0;       ///< T_train, days the run spans (>= T_mon)

  /// Throws std::domain_error on out-of-range fields and InfeasibleError
  /// when the run cannot fit on the fleet.
  void validate() const;
};

/// The sampling schedule implied by a PolicyParams.
struct SamplingPlan {
  double samples_per_period = 0;            ///< s, real-valued
  std::uint64_t samples_per_period_int = 0; ///< ceil(s)
  double annual_samples = 0;                ///< 365 * s / T_mon
  double snapshot_presence = 0;             ///< p_w = 1 - exp(-f*T_mon)
};

/// Minimum chips needed to run H FLOPs in t_days at a FLOPs/day each.
/// Real-valued; callers round up when they need whole chips.
double chips_required(double training_flops, double chip_flops_per_day, double t_days);

/// Probability that a chip participating for t_days logged at least one
/// snapshot: 1 - exp(-f * t_days).
double snapshot_presence_prob(double snapshot_rate, double t_days);

/// Samples per monitoring period so that a run of H FLOPs spread over
/// T_train days on a C-chip fleet is detected with probability p:
///
///   q = (H / (a * T_train * C)) * (1 - exp(-f * T_mon))
///   s = log(1-p) / log(1-q) * T_mon / T_train
///
/// p = 0 yields s = 0. Throws InfeasibleError when the run needs more chips
/// than the fleet has (q would reach 1).
SamplingPlan samples_per_period(const PolicyParams& params);

/// Detection probability when the prover stretches the run k-fold (1/k as
/// many chips for k times as long), relative to a plan sized for k = 1:
///
///   s(p) = log(1-p)/log(1-b),   p_d(k) = 1 - (1 - b/k)^(k*s)
///
/// where b is the fraction of the fleet the unstretched run occupies
/// (snapshot presence taken as certain). k = 1 returns p.
double detection_prob_stretched(double stretch_k, double b, double p);

/// Detection probability when the prover compresses the run into t days on
/// H/(a*t) chips, all sampled once with s draws at the period's end:
///
///   p_d(t) = 1 - (1 - H/(a*C*t) * (1 - exp(-f*t)))^s
///
/// Non-increasing in t on its feasible domain. Throws InfeasibleError when
/// H/(a*t) exceeds the fleet.
double detection_prob_spread(double t_days, const PolicyParams& params, double samples);

/// g*(1 - b^(1/g)) - (1 - b) for g >= 1, 0 < b < 1. Nonnegative on its whole
/// domain; the monotonicity of detection_prob_spread reduces to this.
double lemma_gap(double g, double b);

// ---------------------------------------------------------------------------
// Sample-count table
// ---------------------------------------------------------------------------

struct Table1Cell {
  bool feasible = false;     ///< false => the run needs more chips than C
  double annual_samples = 0; ///< real-valued; display rounds up
};

struct Table1Row {
  std::string model;
  double training_flops = 0;
  double h100_days = 0;      ///< H / a
  double chips_one_year = 0; ///< chips to run H in 365 days (real)
  std::vector<Table1Cell> cells;  ///< one per fleet size
};

struct Table1 {
  std::vector<double> fleet_sizes;
  std::vector<Table1Row> rows;
};

/// Annual-sample table for a row set and fleet-size list, at fixed
/// a, f, T_mon, p and T_train.
Table1 table1(const std::vector<std::pair<std::string, double>>& models,
              const std::vector<double>& fleet_sizes, double chip_flops_per_day,
              double snapshot_rate, double monitoring_days, double detect_prob,
              double training_days);

/// The published configuration: six reference models; C in {1e3, 1e5, 1e7};
/// a = 1e15 * 86400 FLOPs/day (H100 dense 16-bit throughput), f = 0.1/day,
/// T_mon = 30 days, p = 0.9, runs spread over one year.
Table1 table1_reference();

/// Display form used by the table: counts are rounded up; values below 1000
/// print as plain integers, larger ones as three-significant-figure
/// scientific notation (e.g. "2.43e+04").
std::string format_count(double value);

/// Render as aligned text ("human") or comma-separated values ("csv").
/// CSV column order: model, H, H100_days, chips_1yr, then one samples/yr
/// column per fleet size; infeasible cells are empty in csv and "---" in
/// human output.
std::string render_table1(const Table1& table, const std::string& format);

}  // namespace potv::sampling
