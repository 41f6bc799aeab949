// ============================================================================
// pott.hpp -- Proof-of-Training-Transcript: commitments, verification and the
// spoof-attack suite.
//
// The prover first reports only digests of a transcript (commit). At
// verification time the revealed transcript must reproduce those digests,
// link to a chip-logged weight-shard snapshot, regenerate its claimed
// initialization from the seed, match any precommitted batch plan, and
// replay selected checkpoint segments to within an L2 tolerance.
// ============================================================================
#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "potv/chip.hpp"
#include "potv/digest.hpp"
#include "potv/training.hpp"

namespace potv::pott {

/// Protocol-order and well-formedness violations: a missing commitment, a
/// reveal before its commitment, a structurally malformed transcript. These
/// are distinct from a reject verdict; refusing to follow the protocol is
/// its own observable outcome.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The batch plan a run precommitted to before training started. A truthful
/// report of the first j steps of the run hashes to the same meta digest and
/// carries a prefix of the planned batch digests.
struct PrecommitPlan {
  Digest meta_hash;
  std::vector<Digest> batch_hashes;

  bool operator==(const PrecommitPlan&) const = default;
};

/// Digest the chip logs for a precommitted plan.
Digest precommitment_digest(const PrecommitPlan& plan);

/// Commitment form of a transcript: digests only, no data.
struct HashedTranscript {
  Digest meta_hash;
  std::vector<Digest> batch_hashes;
  std::vector<Digest> checkpoint_hashes;
  /// Optional L2 distances between adjacent checkpoints, in order; used by
  /// the largest_jump selection heuristic.
  std::vector<double> checkpoint_gaps;
  /// Plan this run precommitted to (digests only). For a full honest report
  /// this equals (meta_hash, batch_hashes).
  std::optional<PrecommitPlan> precommit_plan;

  bool operator==(const HashedTranscript&) const = default;

  /// One digest binding the whole commitment; used to key commitments.
  Digest commitment_key() const;
};

struct CommitOptions {
  bool with_gaps = false;  ///< record adjacent-checkpoint L2 distances
  bool self_plan = true;   ///< precommit_plan = own (meta, batches)
};

HashedTranscript commit(const training::Transcript& t, const CommitOptions& opts = {});

enum class Selection : std::uint8_t { uniform_random = 0, largest_jump = 1, all = 2 };
std::string to_string(Selection s);
Selection selection_from_string(const std::string& s);

struct VerificationConfig {
  double epsilon = 0.0;             ///< per-segment L2 tolerance; must be > 0
  std::uint64_t segments_to_check = 0;  ///< 0 => max(1, 10% of segments)
  Selection selection = Selection::uniform_random;
  double delta1 = 0.01;             ///< documented false-reject budget
  bool check_init = true;
  bool check_precommitment = true;
  bool check_loss_decrease = true;
  std::uint64_t seed = 0;           ///< segment-selection randomness

  void validate() const;
};

/// Default deterministic-mode tolerance: representation noise only.
double deterministic_epsilon(std::uint64_t param_count);

/// Config-generation tool for noisy-mode tolerances: trains `runs` fresh
/// noisy instances of the given shape, replays every segment noise-free, and
/// returns 3x the largest observed segment distance. The verifier fixes this
/// per (model size, checkpoint interval, noise scale) before accepting
/// reveals.
double calibrate_epsilon(const training::Hyperparams& meta, double noise_sigma,
                         std::uint64_t runs = 50, std::uint64_t seed = 1);

enum class Verdict : std::uint8_t { accept = 0, reject = 1 };

struct FailedCheck {
  std::string check_id;    ///< e.g. "segment_replay", "init_regeneration"
  std::uint64_t index = 0; ///< segment / batch / checkpoint index, when relevant
  double measured = 0.0;   ///< measured value (distance etc.), when relevant
};

struct VerificationReport {
  Verdict verdict = Verdict::reject;
  std::vector<FailedCheck> failed_checks;
  std::vector<std::uint64_t> segments_checked;
  std::vector<double> segment_distances;  ///< parallel to segments_checked
  std::uint64_t cost_replay_steps = 0;    ///< J: optimizer steps re-executed

  bool accepted() const { return verdict == Verdict::accept; }
};

/// What the verifier holds from the chip: a weight shard (or the full vector
/// as a single shard spanning the whole range) recovered from storage, to be
/// linked against a checkpoint slice and a logged digest.
using VerifyTarget = chip::WeightShard;

/// Checks, in order: (1) revealed transcript matches the commitment's
/// digests; (2) the target shard equals a checkpoint slice at its range and
/// its digest appears in the chip log; (3) checkpoint 0 regenerates from the
/// seed; (4) logged precommitments match the committed plan and the revealed
/// batches are a prefix of that plan; (5) selected segments replay to within
/// epsilon; (6) recorded checkpoints show decreasing loss. Every enabled
/// check runs; the verdict is accept iff none failed.
///
/// Throws ProtocolError for malformed transcripts (shape inconsistencies).
VerificationReport verify(const training::Transcript& transcript,
                          const HashedTranscript& commitment, const VerifyTarget& target,
                          const std::vector<chip::LogEntry>& chip_log,
                          const VerificationConfig& config);

// ---------------------------------------------------------------------------
// Transcript distance
// ---------------------------------------------------------------------------

struct TranscriptDistance {
  std::uint64_t batch_edit_distance = 0;  ///< d1: insertions + deletions
  std::uint64_t meta_field_distance = 0;  ///< d2: differing hyperparameter fields
};

/// d1 = minimal insertions+deletions between the batch-digest sequences (a
/// substitution costs 2); d2 = number of differing hyperparameter fields.
TranscriptDistance transcript_distance(const training::Transcript& a, const training::Transcript& b);

/// Hash-level variant: d1 as above; d2 degrades to 0/1 (equal/differing meta
/// digest) since fields are not visible.
TranscriptDistance transcript_distance(const HashedTranscript& a, const HashedTranscript& b);

std::uint64_t batch_edit_distance(const std::vector<Digest>& a, const std::vector<Digest>& b);

// ---------------------------------------------------------------------------
// Spoof-attack suite
// ---------------------------------------------------------------------------

struct AttackOutcome {
  std::string attack_id;
  Verdict verdict = Verdict::accept;
  std::vector<FailedCheck> failed_checks;
  std::uint64_t construction_steps = 0;  ///< optimizer steps the attacker spent
  TranscriptDistance distance;           ///< vs. the original transcript
};

struct SuiteReport {
  std::vector<AttackOutcome> attacks;
  std::uint64_t rejected = 0;
};

/// Runs the five canonical spoof constructions against verify():
///   run_splitting      -- re-report the run as a shorter run "initialized"
///                         at an intermediate checkpoint
///   batch_substitution -- swap batches, keep the checkpoints
///   segment_splice     -- perturb one interior checkpoint
///   free_lunch         -- claim the target shard was just the random init
///   stale_precommit    -- precommit to one batch plan, train on another
/// Each attack re-commits its own transcript; the chip log stays the honest
/// one except for stale_precommit, which forges its own precommitted digest.
SuiteReport spoof_suite(const training::Transcript& original, const VerifyTarget& target,
                        const std::vector<chip::LogEntry>& chip_log,
                        const VerificationConfig& config);

// Commitment file format: json with hex digests, stable field set.
std::string render_commitment(const HashedTranscript& c);
HashedTranscript parse_commitment(const std::string& text);

/// Verification report as structured text (json), digests/booleans/counts/
/// distances only.
std::string render_report(const VerificationReport& r);

}  // namespace potv::pott
