#include "potv/chip.hpp"

#include <sstream>
#include <stdexcept>

namespace potv::chip {

Digest hash_shard(const WeightShard& shard) {
  if (shard.values.size() != shard.size()) {
    throw std::invalid_argument("hash_shard: values length does not match slice range");
  }
  ByteWriter w;
  w.u64(shard.shard_index);
  w.u64(shard.begin);
  w.u64(shard.end);
  w.f32_array(shard.values);
  return w.sha256();
}

Chip::Chip(std::string serial, std::string owner_id, double flops_per_day, double snapshot_rate)
    : serial_(std::move(serial)),
      owner_id_(std::move(owner_id)),
      flops_per_day_(flops_per_day),
      snapshot_rate_(snapshot_rate) {
  if (flops_per_day_ <= 0) throw std::invalid_argument("Chip: flops_per_day must be > 0");
  if (snapshot_rate_ <= 0) throw std::invalid_argument("Chip: snapshot_rate must be > 0");
}

std::vector<LogEntry> Chip::advance(double duration_days, Rng& rng) {
  if (duration_days <= 0) throw std::invalid_argument("Chip::advance: duration must be > 0");
  const double t0 = now_;
  const double t1 = now_ + duration_days;
  now_ = t1;

  std::vector<LogEntry> fresh;
  // A tampered chip with stripped firmware stops logging; nothing is visible
  // remotely. The interrupt stream is still drawn so that time bookkeeping
  // stays identical for a given rng.
  const auto times = poisson_event_times(rng, snapshot_rate_, t0, t1);
  if (tampered_ && !firmware_signed_) return fresh;

  for (double t : times) {
    if (!run_) continue;
    const auto step = run_->step_at(t);
    if (!step) continue;
    LogEntry entry;
    entry.step = *step;
    entry.wallclock_day = t;
    entry.shard_hash = hash_shard(run_->shard_at_step(*step));
    entry.precommitment = run_->precommitment();
    fresh.push_back(entry);
    log_.push_back(entry);
  }
  return fresh;
}

InspectionFinding physical_inspect(const Chip& chip, const std::string& expected_serial) {
  InspectionFinding finding;
  finding.serial = chip.serial();
  finding.serial_match = chip.serial() == expected_serial;
  finding.tamper_detected = chip.tampered();
  finding.log_copy = chip.log();
  return finding;
}

std::string render_log(const std::vector<LogEntry>& entries) {
  std::ostringstream out;
  char day[40];
  for (const auto& e : entries) {
    std::snprintf(day, sizeof day, "%.17g", e.wallclock_day);
    out << e.step << ' ' << day << ' ' << e.shard_hash.hex();
    if (e.precommitment) out << ' ' << e.precommitment->hex();
    out << '\n';
  }
  return out.str();
}

std::vector<LogEntry> parse_log(std::istream& in) {
  std::vector<LogEntry> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    LogEntry e;
    std::string shard_hex, pre_hex;
    if (!(fields >> e.step >> e.wallclock_day >> shard_hex)) {
      throw std::runtime_error("parse_log: malformed record: " + line);
    }
    e.shard_hash = Digest::from_hex(shard_hex);
    if (fields >> pre_hex) e.precommitment = Digest::from_hex(pre_hex);
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<LogEntry> parse_log_string(const std::string& text) {
  std::istringstream in(text);
  return parse_log(in);
}

}  // namespace potv::chip
