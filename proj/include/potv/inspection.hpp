// ============================================================================
// inspection.hpp -- end-to-end verifier workflow
//
// sampling -> physical inspection -> commit-reveal sessions on a trusted
// cluster -> rule evaluation -> DetectionReport. The trusted cluster is the
// confidentiality boundary: everything the verifier sees is digests,
// booleans, counts, distances and rule scalars.
// ============================================================================
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "potv/chip.hpp"
#include "potv/pott.hpp"
#include "potv/registry.hpp"
#include "potv/sampling.hpp"
#include "potv/training.hpp"

namespace potv::audit {

// ---------------------------------------------------------------------------
// Rules
// ---------------------------------------------------------------------------

struct DataRule {
  std::string predicate_id;  ///< "input_linf_above" | "target_mean_above"
  double threshold = 0.0;    ///< predicate parameter
  double max_fraction = 0.0; ///< allowed fraction of flagged batches
};

struct BenchmarkRule {
  std::string dataset_id;       ///< names the held-out set (seed derived from it)
  double max_score = 1.0;       ///< capability cap; score = exp(-heldout loss)
  std::uint64_t eval_batches = 16;
};

struct RuleSet {
  /// Total-compute cap in FLOPs, metered as 6 * params * batch * steps.
  double max_compute_flops = 0.0;
  std::optional<DataRule> data_rule;
  std::optional<BenchmarkRule> benchmark_rule;
  /// Boolean expression over the atoms compute/data/benchmark with
  /// && || ! and parentheses; empty means the conjunction of all three.
  std::string combination;
  /// Batches sampled per transcript for the data predicate.
  std::uint64_t data_sample_batches = 64;
};

struct RuleVerdicts {
  bool compute_ok = true;
  double measured_flops = 0.0;
  bool data_ok = true;
  double flagged_fraction = 0.0;
  bool benchmark_ok = true;
  double benchmark_score = 0.0;
  bool overall_ok = true;
};

/// Evaluates the rule set on a (verified) transcript. Unknown predicate or
/// malformed combination expression throws std::invalid_argument.
RuleVerdicts evaluate_rules(const training::Transcript& transcript, const RuleSet& rules,
                            std::uint64_t sample_seed);

/// Score of the final checkpoint on the held-out set named by the benchmark
/// rule: exp(-loss), in (0, 1], higher = more capable. Exposed so tests can
/// compare against an independent re-evaluation.
double benchmark_score(const training::Transcript& transcript, const BenchmarkRule& rule);

// ---------------------------------------------------------------------------
// Trusted cluster
// ---------------------------------------------------------------------------

/// Everything a session discloses to the verifier. No weights, no data, no
/// hyperparameters cross this boundary; only the verdict, per-check
/// diagnostics and rule scalars.
struct SessionOutput {
  bool pass = false;
  std::string fail_stage;  ///< "", "hash_mismatch" or "verification_reject"
  pott::VerificationReport verification;
  std::optional<RuleVerdicts> rules;  ///< present only when verification accepted
};

/// Commit-before-reveal enforcement plus the in-session check order:
/// re-hash the reveal, verify, evaluate rules.
class TrustedCluster {
 public:
  /// Registers a commitment ahead of any reveal. Keyed by
  /// HashedTranscript::commitment_key().
  void register_commitment(const pott::HashedTranscript& commitment);
  bool has_commitment(const Digest& key) const;

  /// Throws pott::ProtocolError when the commitment was never registered
  /// (reveal-before-commit).
  SessionOutput run_session(const Digest& commitment_key, const training::Transcript& reveal,
                            const pott::VerifyTarget& target,
                            const std::vector<chip::LogEntry>& chip_log,
                            const pott::VerificationConfig& config, const RuleSet& rules,
                            std::uint64_t rule_sample_seed) const;

 private:
  std::map<Digest, pott::HashedTranscript> commitments_;
};

// ---------------------------------------------------------------------------
// Audit
// ---------------------------------------------------------------------------

/// The audited party's reporting side: commitments registered up front and
/// reveals served on demand, addressed by logged shard digest.
class Prover {
 public:
  virtual ~Prover() = default;
  virtual std::vector<pott::HashedTranscript> commitments() const = 0;

  struct Reveal {
    Digest commitment_key;
    std::shared_ptr<const training::Transcript> transcript;
    chip::WeightShard shard;  ///< the raw shard matching the logged digest
  };
  /// nullopt models a withheld transcript (non-cooperation).
  virtual std::optional<Reveal> reveal_for(const Digest& shard_hash) const = 0;
};

struct AuditConfig {
  double start_day = 0.0;        ///< monitoring begins here
  double horizon_days = 0.0;     ///< rounds cover (start, start+horizon]
  double monitoring_days = 30.0; ///< T_mon; also each round's review window
};

enum class Overall : std::uint8_t { compliant = 0, violation = 1, non_cooperation = 2 };
std::string to_string(Overall o);

struct ChipFinding {
  std::string serial;
  double inspected_day = 0;
  bool serial_match = true;
  bool tamper_detected = false;
  std::uint64_t entries_reviewed = 0;
};

struct SessionRecord {
  std::string serial;
  std::uint64_t step = 0;
  Digest shard_hash;
  bool commitment_present = false;
  std::optional<SessionOutput> output;
};

struct DetectionReport {
  std::vector<std::string> sampled_serials;  // in sampling order, with repeats
  std::vector<ChipFinding> findings;
  std::vector<SessionRecord> sessions;
  std::uint64_t missing_commitments = 0;
  std::uint64_t rule_violations = 0;
  std::uint64_t tampered_chips = 0;
  std::uint64_t failed_sessions = 0;
  Overall overall = Overall::compliant;
};

/// Runs the audit: per monitoring period, samples the plan's share of the
/// owner's holdings, physically inspects them, reviews the period's new log
/// entries, and runs one trusted-cluster session per distinct logged shard
/// digest. Violation evidence: a failing rule verdict on a verified
/// transcript, a rejected/spoofed transcript, or physical tamper. Missing
/// commitments yield non_cooperation.
DetectionReport run_audit(const registry::Directory& directory, const std::string& owner,
                          const std::map<std::string, const chip::Chip*>& fleet,
                          const Prover& prover, const sampling::SamplingPlan& plan,
                          const RuleSet& rules, const pott::VerificationConfig& vconfig,
                          const AuditConfig& acfg, Rng& rng);

/// Stable-schema json rendering of the report: the verifier-visible output
/// surface.
std::string render_report(const DetectionReport& report);

/// Checks that a rendered report (json text) carries only allowlisted fields
/// whose values are digests, booleans, counts, distances, rule scalars,
/// enum tokens or identifiers. Returns human-readable problems; empty means
/// the confidentiality schema holds.
std::vector<std::string> confidentiality_scan(const std::string& report_json);

}  // namespace potv::audit
