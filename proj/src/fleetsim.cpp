#include "potv/fleetsim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_map>

namespace potv::sim {

namespace {

// Resolved experiment geometry, fixed for a simulate() call.
struct Experiment {
  std::uint64_t fleet = 0;       // C
  double involved_mean = 0;      // expected chips carrying the run
  double draws_mean = 0;         // expected verifier draws over the horizon
  std::vector<double> round_times;
  double window_days = 0;        // T_mon
  double act_start = 0;          // incriminating-phase span
  double act_end = 0;
  double full_start = 0;         // includes the first-H phase (any_snapshot mode)
  double mat_start = 0;          // span over which chip event streams are drawn
  double mat_end = 0;
  double rate = 0;               // snapshot rate f
  CountMode mode = CountMode::phase_window;
};

Experiment build_experiment(const sampling::PolicyParams& params,
                            const ProverStrategy& strategy, const sampling::SamplingPlan& plan,
                            const SimConfig& cfg) {
  params.validate();
  Experiment ex;
  ex.mode = cfg.count_mode;
  ex.rate = params.snapshot_rate;
  ex.fleet = static_cast<std::uint64_t>(std::llround(params.fleet_chips));
  if (ex.fleet < 1) throw std::domain_error("simulate: fleet must hold at least one chip");

  const double chips_full = sampling::chips_required(
      params.training_flops, params.chip_flops_per_day, params.training_days);

  double span = 0;
  switch (strategy.kind) {
    case ProverStrategy::Kind::honest_min_chips:
    case ProverStrategy::Kind::collusion: {
      ex.involved_mean = chips_full;
      span = params.training_days;
      break;
    }
    case ProverStrategy::Kind::stretch: {
      if (strategy.stretch_factor < 1) {
        throw std::domain_error("simulate: stretch factor must be >= 1");
      }
      ex.involved_mean = chips_full / strategy.stretch_factor;
      span = params.training_days * strategy.stretch_factor;
      break;
    }
    case ProverStrategy::Kind::spread: {
      const double t = strategy.spread_days;
      if (t <= 0 || t > params.monitoring_days) {
        throw std::domain_error("simulate: spread days must be in (0, T_mon]");
      }
      ex.involved_mean =
          sampling::chips_required(params.training_flops, params.chip_flops_per_day, t);
      if (ex.involved_mean > params.fleet_chips) {
        throw sampling::InfeasibleError("simulate: spread run does not fit on the fleet");
      }
      span = t;
      break;
    }
  }
  if (strategy.kind == ProverStrategy::Kind::collusion) {
    double sum = std::accumulate(strategy.collusion_shares.begin(),
                                 strategy.collusion_shares.end(), 0.0);
    if (strategy.collusion_shares.empty() || std::abs(sum - 1.0) > 1e-9) {
      throw std::domain_error("simulate: collusion shares must sum to 1");
    }
    for (double s : strategy.collusion_shares) {
      if (s < 0) throw std::domain_error("simulate: collusion shares must be >= 0");
    }
  }

  ex.window_days = params.monitoring_days;
  ex.act_start = 0.0;
  ex.act_end = span;
  ex.full_start = -span;  // the first-H phase: same chips, same duration

  if (strategy.kind == ProverStrategy::Kind::spread) {
    // One sampling round at the period's end. Events are drawn over the
    // whole period and filtered to the run's [0, t] activity, so different
    // spread values share one underlying realization (paired comparisons).
    ex.round_times = {params.monitoring_days};
    ex.draws_mean = plan.samples_per_period;
    ex.mat_start = cfg.count_mode == CountMode::any_snapshot ? ex.full_start : 0.0;
    ex.mat_end = params.monitoring_days;
  } else {
    const std::uint64_t rounds =
        static_cast<std::uint64_t>(std::ceil(span / params.monitoring_days - 1e-9));
    for (std::uint64_t j = 1; j <= rounds; ++j) {
      ex.round_times.push_back(std::min(static_cast<double>(j) * params.monitoring_days, span));
    }
    // The plan's sampling effort, prorated over the horizon the run spans.
    ex.draws_mean = plan.annual_samples * span / 365.0;
    ex.mat_start = cfg.count_mode == CountMode::any_snapshot ? ex.full_start : 0.0;
    ex.mat_end = span;
  }
  return ex;
}

// floor(x) + Bernoulli(frac(x)): integer realization with mean exactly x.
std::uint64_t randomized_round(double x, Rng& rng) {
  const double f = std::floor(x);
  const double frac = x - f;
  std::uint64_t n = static_cast<std::uint64_t>(f);
  if (frac > 0 && rng.next_bernoulli(frac)) ++n;
  return n;
}

bool run_trial(const Experiment& ex, const ProverStrategy& strategy, const Rng& trial_rng) {
  Rng rounding = trial_rng.child("rounding");

  std::uint64_t involved = 0;
  if (strategy.kind == ProverStrategy::Kind::collusion) {
    for (double share : strategy.collusion_shares) {
      involved += randomized_round(share * ex.involved_mean, rounding);
    }
  } else {
    involved = randomized_round(ex.involved_mean, rounding);
  }
  involved = std::min(involved, ex.fleet);
  if (involved == 0) return false;

  const std::uint64_t draws = randomized_round(ex.draws_mean, rounding);
  if (draws == 0) return false;

  const std::uint64_t rounds = ex.round_times.size();
  const std::uint64_t base = draws / rounds;
  const std::uint64_t extra = draws % rounds;

  Rng verifier = trial_rng.child("verifier");
  // Snapshot times for involved chips, materialized only when first sampled.
  std::unordered_map<std::uint64_t, std::vector<double>> logs;

  for (std::uint64_t j = 0; j < rounds; ++j) {
    const double t = ex.round_times[j];
    const double window_start = t - ex.window_days;
    const std::uint64_t samples = base + (j < extra ? 1 : 0);
    for (std::uint64_t s = 0; s < samples; ++s) {
      const std::uint64_t c = verifier.next_below(ex.fleet);
      if (c >= involved) continue;
      auto it = logs.find(c);
      if (it == logs.end()) {
        Rng chip_rng = trial_rng.child(c);
        it = logs.emplace(c, poisson_event_times(chip_rng, ex.rate, ex.mat_start, ex.mat_end))
                 .first;
      }
      for (double e : it->second) {
        bool hit;
        if (ex.mode == CountMode::any_snapshot) {
          hit = e >= ex.full_start && e <= ex.act_end && e <= t;
        } else {
          hit = e >= ex.act_start && e <= ex.act_end && e > window_start && e <= t;
        }
        if (hit) return true;
      }
    }
  }
  return false;
}

}  // namespace

SimOutcome simulate(const sampling::PolicyParams& params, const ProverStrategy& strategy,
                    const sampling::SamplingPlan& plan, std::uint64_t trials,
                    std::uint64_t seed, const SimConfig& cfg) {
  if (trials < 1) throw std::domain_error("simulate: trials must be >= 1");
  const Experiment ex = build_experiment(params, strategy, plan, cfg);

  const unsigned threads = std::max(1u, cfg.threads);
  std::vector<std::uint64_t> counts(threads, 0);
  auto worker = [&](unsigned w) {
    const std::uint64_t begin = trials * w / threads;
    const std::uint64_t end = trials * (w + 1) / threads;
    std::uint64_t hits = 0;
    const Rng master(seed, "fleet-sim");
    for (std::uint64_t trial = begin; trial < end; ++trial) {
      if (run_trial(ex, strategy, master.child(trial))) ++hits;
    }
    counts[w] = hits;
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(worker, w);
    for (auto& t : pool) t.join();
  }

  SimOutcome out;
  out.trials = trials;
  out.detections = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
  out.empirical_p = static_cast<double>(out.detections) / static_cast<double>(trials);
  out.ci_halfwidth =
      3.0 * std::sqrt(std::max(out.empirical_p * (1.0 - out.empirical_p), 1e-12) /
                      static_cast<double>(trials));
  return out;
}

std::vector<SweepPoint> sweep(const std::vector<double>& b_grid,
                              const std::vector<double>& k_grid, double p,
                              std::uint64_t trials_per_point, double fleet_chips,
                              std::uint64_t seed, const SimConfig& cfg) {
  std::vector<SweepPoint> points;
  std::uint64_t point_index = 0;
  for (double b : b_grid) {
    const double p1 = sampling::detection_prob_stretched(1.0, b, p);
    for (double k : k_grid) {
      SweepPoint pt;
      pt.b = b;
      pt.stretch_k = k;
      pt.closed_form = sampling::detection_prob_stretched(k, b, p);
      pt.closed_ratio = pt.closed_form / p1;
      if (trials_per_point > 0) {
        // Fleet realization in the regime the closed form assumes: one
        // sampling round per training period and certain snapshot presence.
        sampling::PolicyParams params;
        params.monitoring_days = 30.0;
        params.training_days = 30.0;
        params.chip_flops_per_day = 1.0;
        params.fleet_chips = fleet_chips;
        params.training_flops = b * fleet_chips * params.training_days;
        params.snapshot_rate = 40.0 / params.monitoring_days;  // 1 - e^-40 == 1 in double
        params.detect_prob = p;
        const auto plan = sampling::samples_per_period(params);
        pt.outcome = simulate(params, ProverStrategy::stretch(k), plan, trials_per_point,
                              splitmix64_mix(seed ^ point_index), cfg);
        pt.simulated = true;
      }
      ++point_index;
      points.push_back(pt);
    }
  }
  return points;
}

std::string render_sweep(const std::vector<SweepPoint>& points, const std::string& format) {
  std::ostringstream out;
  const bool csv = format == "csv";
  if (csv) {
    out << "b,k,closed_form,ratio_to_k1,empirical_p,ci_halfwidth,trials\n";
  } else {
    out << "stretch-strategy detection study (ratio = p_d(k)/p_d(1))\n";
    out << "       b        k   closed    ratio   empirical       3s-ci\n";
  }
  char line[160];
  for (const auto& pt : points) {
    if (csv) {
      out << pt.b << ',' << pt.stretch_k << ',' << pt.closed_form << ',' << pt.closed_ratio
          << ',';
      if (pt.simulated) {
        out << pt.outcome.empirical_p << ',' << pt.outcome.ci_halfwidth << ','
            << pt.outcome.trials;
      } else {
        out << ",,0";
      }
      out << '\n';
    } else {
      if (pt.simulated) {
        std::snprintf(line, sizeof line, "%8.4f %8.4g %8.5f %8.5f    %8.5f   +-%8.5f\n", pt.b,
                      pt.stretch_k, pt.closed_form, pt.closed_ratio, pt.outcome.empirical_p,
                      pt.outcome.ci_halfwidth);
      } else {
        std::snprintf(line, sizeof line, "%8.4f %8.4g %8.5f %8.5f           -           -\n",
                      pt.b, pt.stretch_k, pt.closed_form, pt.closed_ratio);
      }
      out << line;
    }
  }
  return out.str();
}

}  // namespace potv::sim
