// ============================================================================
// registry.hpp -- chip-owner directory with chain of custody
//
// An append-only event log (fabricated / transferred / damaged / destroyed /
// inspected) per chip serial; the current holder index is a pure fold over
// the log, so any historical state can be reproduced by replaying a prefix.
// ============================================================================
#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "potv/prng.hpp"

namespace potv::registry {

enum class EventKind : std::uint8_t {
  fabricated = 0,
  transferred = 1,
  damaged = 2,
  destroyed = 3,
  inspected = 4,
};

std::string to_string(EventKind k);
EventKind event_kind_from_string(const std::string& s);

struct CustodyEvent {
  std::string serial;
  std::string holder;        ///< party holding the chip after the event
  EventKind kind = EventKind::fabricated;
  double timestamp_day = 0;
  std::string counterparty;  ///< transfers: the sending party (dual acknowledgment)
  std::string note;          ///< damaged: required written justification
};

/// Thrown on inconsistent events. `code` identifies the violation:
/// unknown_serial, duplicate_serial, after_destroyed, timestamp_regression,
/// transfer_ack_mismatch, missing_justification, missing_holder.
class DirectoryError : public std::runtime_error {
 public:
  DirectoryError(std::string code, const std::string& msg)
      : std::runtime_error(msg), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

class Directory {
 public:
  /// Validates the event against the serial's current state and appends it.
  void record(const CustodyEvent& event);

  const std::vector<CustodyEvent>& events() const { return events_; }

  struct ChipState {
    std::string holder;
    bool destroyed = false;
    double last_day = 0;
  };
  /// nullptr when the serial was never fabricated.
  const ChipState* find(const std::string& serial) const;

  /// Serials currently held by `owner` and not destroyed, in fabrication
  /// order. Its size is the C used for sampling plans.
  std::vector<std::string> holdings(const std::string& owner) const;

  /// Uniform sample of `count` of the owner's holdings, without replacement,
  /// reproducible from the rng state.
  std::vector<std::string> sample_for_inspection(const std::string& owner, std::uint64_t count,
                                                 Rng& rng) const;

  /// Rebuilds a directory by folding an event log. The result is identical
  /// to the directory that recorded those events one at a time.
  static Directory replay(const std::vector<CustodyEvent>& log);

 private:
  std::vector<CustodyEvent> events_;
  std::unordered_map<std::string, ChipState> index_;
  std::vector<std::string> fabrication_order_;
};

// Event-log file: one json object per line, stable key set.
std::string render_event(const CustodyEvent& e);
CustodyEvent parse_event(const std::string& line);
std::string render_log(const std::vector<CustodyEvent>& events);
std::vector<CustodyEvent> parse_log(std::istream& in);

}  // namespace potv::registry
