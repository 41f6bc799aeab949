// ============================================================================
// scenario.hpp -- declarative audit scenarios
//
// A scenario file describes a fleet, a toy training run placed on part of
// it, the prover's reporting behavior, the rule set and the audit schedule.
// build_world() realizes the chips, logs and prover; run_scenario_audit()
// executes one seeded audit over that world.
// ============================================================================
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "potv/inspection.hpp"

namespace potv::scenario {

struct ScenarioConfig {
  // Fleet
  std::uint64_t fleet_chips = 0;
  std::string owner = "prover-1";
  double chip_flops_per_day = 1.0;
  double snapshot_rate = 0.1;

  // The training run and its placement
  training::Hyperparams trainer;
  double noise_sigma = 0.0;
  std::uint64_t involved_chips = 1;
  double run_start_day = 0.0;
  double run_end_day = 0.0;
  bool precommit = true;

  // Prover reporting behavior: "report_prefixes" serves a truthful
  // prefix transcript for every logged snapshot; "withhold" refuses all.
  std::string reporting = "report_prefixes";

  // Verifier side
  audit::RuleSet rules;
  pott::VerificationConfig verification;
  audit::AuditConfig audit;
  double plan_annual_samples = 0.0;  ///< sampling effort (samples per 365 days)
  double plan_samples_per_period = 0.0;

  std::uint64_t world_seed = 1;
  std::uint64_t audit_seed = 1;

  void validate() const;
};

ScenarioConfig load_scenario(const std::string& json_text);
ScenarioConfig load_scenario_file(const std::string& path);

/// A realized world: directory, chips with populated logs, and the prover.
struct World {
  registry::Directory directory;
  std::vector<std::unique_ptr<chip::Chip>> chips;
  std::map<std::string, const chip::Chip*> fleet;
  std::shared_ptr<const training::Transcript> transcript;
  std::unique_ptr<audit::Prover> prover;
};

/// Builds the world: fabricates the fleet into the directory, trains the
/// run (deterministic in the trainer seed), attaches it to the involved
/// chips, and advances every involved chip over the run's span so their
/// logs carry snapshot entries. `world_seed_override`, when nonzero,
/// replaces the config's world seed (fresh snapshot randomness per
/// repetition; the transcript itself is seed-independent of it).
World build_world(const ScenarioConfig& cfg, std::uint64_t world_seed_override = 0);

audit::DetectionReport run_scenario_audit(const World& world, const ScenarioConfig& cfg,
                                          std::uint64_t audit_seed_override = 0);

}  // namespace potv::scenario
