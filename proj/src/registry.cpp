#include "potv/registry.hpp"

#include <algorithm>
#include <istream>
#include <sstream>

#include "json.hpp"

namespace potv::registry {

std::string to_string(EventKind k) {
  switch (k) {
    case EventKind::fabricated: return "fabricated";
    case EventKind::transferred: return "transferred";
    case EventKind::damaged: return "damaged";
    case EventKind::destroyed: return "destroyed";
    case EventKind::inspected: return "inspected";
  }
  return "?";
}

EventKind event_kind_from_string(const std::string& s) {
  if (s == "fabricated") return EventKind::fabricated;
  if (s == "transferred") return EventKind::transferred;
  if (s == "damaged") return EventKind::damaged;
  if (s == "destroyed") return EventKind::destroyed;
  if (s == "inspected") return EventKind::inspected;
  throw std::invalid_argument("unknown custody event kind: " + s);
}

void Directory::record(const CustodyEvent& event) {
  if (event.serial.empty()) {
    throw DirectoryError("unknown_serial", "custody event without a serial");
  }
  auto it = index_.find(event.serial);

  if (event.kind == EventKind::fabricated) {
    if (it != index_.end()) {
      throw DirectoryError("duplicate_serial", "serial already fabricated: " + event.serial);
    }
    if (event.holder.empty()) {
      throw DirectoryError("missing_holder", "fabrication needs an initial holder");
    }
  } else {
    if (it == index_.end()) {
      // The accountability gap: a chip surfaced that no fab ever reported.
      throw DirectoryError("unknown_serial",
                           "event for unregistered serial " + event.serial +
                               "; most recent holder unknown");
    }
    const ChipState& state = it->second;
    if (state.destroyed) {
      throw DirectoryError("after_destroyed",
                           "event after destruction of " + event.serial);
    }
    if (event.timestamp_day < state.last_day) {
      throw DirectoryError("timestamp_regression",
                           "event timestamp precedes the serial's latest record");
    }
    if (event.kind == EventKind::transferred) {
      if (event.holder.empty()) {
        throw DirectoryError("missing_holder", "transfer needs a receiving holder");
      }
      if (event.counterparty != state.holder) {
        throw DirectoryError("transfer_ack_mismatch",
                             "transfer of " + event.serial + " not acknowledged by holder " +
                                 state.holder);
      }
    }
    if (event.kind == EventKind::damaged && event.note.empty()) {
      throw DirectoryError("missing_justification",
                           "damaged state requires a written justification");
    }
  }

  events_.push_back(event);
  ChipState& state = index_[event.serial];
  state.last_day = event.timestamp_day;
  switch (event.kind) {
    case EventKind::fabricated:
      state.holder = event.holder;
      fabrication_order_.push_back(event.serial);
      break;
    case EventKind::transferred:
      state.holder = event.holder;
      break;
    case EventKind::destroyed:
      state.destroyed = true;
      break;
    case EventKind::damaged:
    case EventKind::inspected:
      break;
  }
}

const Directory::ChipState* Directory::find(const std::string& serial) const {
  auto it = index_.find(serial);
  return it == index_.end() ? nullptr : &it->second;
}

std::vector<std::string> Directory::holdings(const std::string& owner) const {
  std::vector<std::string> out;
  for (const auto& serial : fabrication_order_) {
    const auto& state = index_.at(serial);
    if (!state.destroyed && state.holder == owner) out.push_back(serial);
  }
  return out;
}

std::vector<std::string> Directory::sample_for_inspection(const std::string& owner,
                                                          std::uint64_t count, Rng& rng) const {
  auto pool = holdings(owner);
  if (count > pool.size()) {
    throw std::invalid_argument("sample_for_inspection: sample larger than holdings");
  }
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t j = i + rng.next_below(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

Directory Directory::replay(const std::vector<CustodyEvent>& log) {
  Directory d;
  for (const auto& e : log) d.record(e);
  return d;
}

std::string render_event(const CustodyEvent& e) {
  nlohmann::json j;
  j["serial"] = e.serial;
  j["holder"] = e.holder;
  j["event"] = to_string(e.kind);
  j["day"] = e.timestamp_day;
  if (!e.counterparty.empty()) j["counterparty"] = e.counterparty;
  if (!e.note.empty()) j["note"] = e.note;
  return j.dump();
}

CustodyEvent parse_event(const std::string& line) {
  nlohmann::json j = nlohmann::json::parse(line);
  CustodyEvent e;
  e.serial = j.at("serial").get<std::string>();
  e.holder = j.value("holder", "");
  e.kind = event_kind_from_string(j.at("event").get<std::string>());
  e.timestamp_day = j.at("day").get<double>();
  e.counterparty = j.value("counterparty", "");
  e.note = j.value("note", "");
  return e;
}

std::string render_log(const std::vector<CustodyEvent>& events) {
  std::ostringstream out;
  for (const auto& e : events) out << render_event(e) << '\n';
  return out.str();
}

std::vector<CustodyEvent> parse_log(std::istream& in) {
  std::vector<CustodyEvent> events;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    events.push_back(parse_event(line));
  }
  return events;
}

}  // namespace potv::registry
