// ============================================================================
// chip.hpp -- simulated ML accelerator with snapshot logging
//
// A Chip holds one weight shard of an active training run, fires snapshot
// interrupts at Poisson-random times, and appends the shard's SHA-256 digest
// to an on-chip append-only log. Physical inspection reads the serial, the
// tamper state and the full log.
// ============================================================================
#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "potv/digest.hpp"
#include "potv/prng.hpp"

namespace potv::chip {

/// Contiguous slice [begin, end) of a flattened weight vector.
struct WeightShard {
  std::uint64_t shard_index = 0;
  std::uint64_t begin = 0;
  std::uint64_t end = 0;
  std::vector<float> values;  // length end - begin

  std::uint64_t size() const { return end - begin; }
};

/// SHA-256 over the canonical shard encoding: shard_index, begin and end as
/// 8-byte little-endian words followed by each value as IEEE-754 binary32
/// little-endian.
Digest hash_shard(const WeightShard& shard);

/// One snapshot record. Entries are append-only and strictly increasing in
/// wallclock_day.
struct LogEntry {
  std::uint64_t step = 0;       ///< training step the hashed shard belongs to
  double wallclock_day = 0;     ///< simulated time of the interrupt
  Digest shard_hash;
  std::optional<Digest> precommitment;  ///< run's precommitted-plan digest
};

/// What a chip can observe about the training run executing on it. The run
/// exposes the shard state at checkpointed steps; memory between checkpoints
/// is not modeled, so an interrupt hashes the most recently materialized
/// step.
class ActiveRun {
 public:
  virtual ~ActiveRun() = default;
  /// Most recently completed (checkpointed) step at the given day, or
  /// nullopt when the run is not executing at that time.
  virtual std::optional<std::uint64_t> step_at(double day) const = 0;
  /// This chip's shard of the weights as of the given step.
  virtual WeightShard shard_at_step(std::uint64_t step) const = 0;
  /// Digest the run precommitted to before starting, if any.
  virtual std::optional<Digest> precommitment() const = 0;
};

class Chip {
 public:
  Chip(std::string serial, std::string owner_id, double flops_per_day, double snapshot_rate);

  const std::string& serial() const { return serial_; }
  const std::string& owner_id() const { return owner_id_; }
  double flops_per_day() const { return flops_per_day_; }
  double snapshot_rate() const { return snapshot_rate_; }
  double now() const { return now_; }
  const std::vector<LogEntry>& log() const { return log_; }

  bool firmware_signed() const { return firmware_signed_; }
  bool tampered() const { return tampered_; }
  /// Models a hardware attack: with firmware_signed false the chip stops
  /// logging without any remotely visible sign.
  void tamper(bool strip_firmware_signature) {
    tampered_ = true;
    if (strip_firmware_signature) firmware_signed_ = false;
  }

  void attach_run(std::shared_ptr<const ActiveRun> run) { run_ = std::move(run); }
  void detach_run() { run_.reset(); }

  /// Advances simulated time, drawing snapshot interrupts as a Poisson
  /// process with the chip's snapshot rate. Each interrupt that falls while
  /// a run is executing appends a LogEntry. Returns the new entries.
  std::vector<LogEntry> advance(double duration_days, Rng& rng);

 private:
  std::string serial_;
  std::string owner_id_;
  double flops_per_day_;
  double snapshot_rate_;
  double now_ = 0.0;
  bool firmware_signed_ = true;
  bool tampered_ = false;
  std::shared_ptr<const ActiveRun> run_;
  std::vector<LogEntry> log_;
};

/// Result of a physical inspection: serial comparison, tamper evidence and a
/// copy of the log. Physical inspection always reveals tampering, including
/// attacks that suppressed logging without leaving a remote trace.
struct InspectionFinding {
  std::string serial;
  bool serial_match = false;
  bool tamper_detected = false;
  std::vector<LogEntry> log_copy;
};

InspectionFinding physical_inspect(const Chip& chip, const std::string& expected_serial);

// Log file format: one line per entry, space-separated:
//   <step> <wallclock_day> <shard_hash hex> [<precommitment hex>]
// Field order is stable; wallclock uses enough digits to round-trip.
std::string render_log(const std::vector<LogEntry>& entries);
std::vector<LogEntry> parse_log(std::istream& in);
std::vector<LogEntry> parse_log_string(const std::string& text);

}  // namespace potv::chip
