// Unit tests for the chip-owner directory.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>
#include <sstream>

#include "potv/registry.hpp"

using namespace potv;
using namespace potv::registry;

namespace {

CustodyEvent fab(const std::string& serial, const std::string& holder, double day) {
  return {serial, holder, EventKind::fabricated, day, "", ""};
}
CustodyEvent xfer(const std::string& serial, const std::string& from, const std::string& to,
                  double day) {
  return {serial, to, EventKind::transferred, day, from, ""};
}

}  // namespace

TEST_CASE("fabricate, transfer, query") {
  Directory d;
  d.record(fab("c1", "fab-co", 0));
  d.record(xfer("c1", "fab-co", "acme", 1));
  REQUIRE(d.find("c1") != nullptr);
  CHECK(d.find("c1")->holder == "acme");
  CHECK(d.holdings("acme") == std::vector<std::string>{"c1"});
  CHECK(d.holdings("fab-co").empty());
}

TEST_CASE("violation signals are distinct") {
  Directory d;
  d.record(fab("c1", "acme", 0));

  // Unknown serial: accountability gap.
  try {
    d.record(xfer("ghost", "x", "y", 1));
    FAIL("expected DirectoryError");
  } catch (const DirectoryError& e) {
    CHECK(e.code() == "unknown_serial");
  }

  // Duplicate fabrication.
  try {
    d.record(fab("c1", "other", 1));
    FAIL("expected DirectoryError");
  } catch (const DirectoryError& e) {
    CHECK(e.code() == "duplicate_serial");
  }

  // Transfer must be acknowledged by the current holder.
  try {
    d.record(xfer("c1", "not-the-holder", "b", 1));
    FAIL("expected DirectoryError");
  } catch (const DirectoryError& e) {
    CHECK(e.code() == "transfer_ack_mismatch");
  }

  // Damaged requires a justification.
  try {
    d.record({"c1", "acme", EventKind::damaged, 2, "", ""});
    FAIL("expected DirectoryError");
  } catch (const DirectoryError& e) {
    CHECK(e.code() == "missing_justification");
  }

  // Timestamp regression.
  d.record({"c1", "acme", EventKind::inspected, 5, "", ""});
  try {
    d.record({"c1", "acme", EventKind::inspected, 4, "", ""});
    FAIL("expected DirectoryError");
  } catch (const DirectoryError& e) {
    CHECK(e.code() == "timestamp_regression");
  }

  // Nothing after destruction.
  d.record({"c1", "acme", EventKind::destroyed, 6, "", ""});
  try {
    d.record({"c1", "acme", EventKind::inspected, 7, "", ""});
    FAIL("expected DirectoryError");
  } catch (const DirectoryError& e) {
    CHECK(e.code() == "after_destroyed");
  }
}

TEST_CASE("holdings exclude destroyed chips") {
  Directory d;
  for (int i = 0; i < 4; ++i) d.record(fab("c" + std::to_string(i), "acme", 0));
  d.record({"c2", "acme", EventKind::destroyed, 1, "", ""});
  const auto held = d.holdings("acme");
  CHECK(held == std::vector<std::string>{"c0", "c1", "c3"});
  // Damaged chips are still held and inspectable.
  d.record({"c1", "acme", EventKind::damaged, 2, "", "dropped in transit"});
  CHECK(d.holdings("acme").size() == 3);
}

TEST_CASE("directory state is a pure fold over the event log") {
  Rng rng(11);
  Directory live;
  std::vector<std::string> serials;
  double day = 0;
  const std::vector<std::string> owners = {"a", "b", "c"};
  for (int i = 0; i < 300; ++i) {
    day += rng.next_double();
    const double pick = rng.next_double();
    try {
      if (pick < 0.3 || serials.empty()) {
        const auto serial = "s" + std::to_string(serials.size());
        live.record(fab(serial, owners[rng.next_below(3)], day));
        serials.push_back(serial);
      } else {
        const auto& serial = serials[rng.next_below(serials.size())];
        const auto* state = live.find(serial);
        if (pick < 0.6) {
          live.record(xfer(serial, state->holder, owners[rng.next_below(3)], day));
        } else if (pick < 0.8) {
          live.record({serial, state->holder, EventKind::inspected, day, "", ""});
        } else if (pick < 0.9) {
          live.record({serial, state->holder, EventKind::damaged, day, "", "wear"});
        } else {
          live.record({serial, state->holder, EventKind::destroyed, day, "", ""});
        }
      }
    } catch (const DirectoryError&) {
      // Destroyed chips get follow-up events sometimes; skip those.
    }
  }

  const Directory replayed = Directory::replay(live.events());
  std::uint64_t total_live = 0;
  for (const auto& owner : owners) {
    CHECK(replayed.holdings(owner) == live.holdings(owner));
    total_live += live.holdings(owner).size();
  }
  // Conservation: live chips = fabricated - destroyed.
  std::uint64_t fabricated = 0, destroyed = 0;
  for (const auto& e : live.events()) {
    fabricated += e.kind == EventKind::fabricated;
    destroyed += e.kind == EventKind::destroyed;
  }
  CHECK(total_live == fabricated - destroyed);
}

TEST_CASE("audits of any past day are reproducible from a log prefix") {
  Directory d;
  d.record(fab("c1", "acme", 0));
  d.record(fab("c2", "acme", 0));
  d.record(xfer("c1", "acme", "zeta", 3));
  const auto log = d.events();
  const Directory day0 = Directory::replay({log.begin(), log.begin() + 2});
  CHECK(day0.holdings("acme").size() == 2);
  CHECK(day0.holdings("zeta").empty());
}

TEST_CASE("sampling without replacement, full set, determinism") {
  Directory d;
  for (int i = 0; i < 10; ++i) d.record(fab("c" + std::to_string(i), "acme", 0));

  Rng rng(5);
  auto all = d.sample_for_inspection("acme", 10, rng);
  std::sort(all.begin(), all.end());
  CHECK(all == d.holdings("acme"));

  Rng r1(6), r2(6);
  CHECK(d.sample_for_inspection("acme", 4, r1) == d.sample_for_inspection("acme", 4, r2));

  Rng r3(7);
  CHECK_THROWS_AS(d.sample_for_inspection("acme", 11, r3), std::invalid_argument);
}

TEST_CASE("sampling is uniform: inclusion frequencies within 3 sigma") {
  Directory d;
  const int chips = 20;
  for (int i = 0; i < chips; ++i) d.record(fab("c" + std::to_string(i), "acme", 0));
  const std::uint64_t s = 5, draws = 100000;
  std::map<std::string, std::uint64_t> hits;
  Rng rng(99);
  for (std::uint64_t i = 0; i < draws; ++i) {
    for (const auto& serial : d.sample_for_inspection("acme", s, rng)) ++hits[serial];
  }
  const double expect = static_cast<double>(s) / chips;
  const double sigma = std::sqrt(expect * (1 - expect) / static_cast<double>(draws));
  for (const auto& [serial, count] : hits) {
    const double freq = static_cast<double>(count) / static_cast<double>(draws);
    INFO(serial);
    CHECK(std::abs(freq - expect) < 3 * sigma);
  }
}

TEST_CASE("event log files round-trip") {
  Directory d;
  d.record(fab("c1", "fab-co", 0));
  d.record(xfer("c1", "fab-co", "acme", 1.5));
  d.record({"c1", "acme", EventKind::damaged, 2.25, "", "bent pins"});
  const auto text = render_log(d.events());
  std::istringstream in(text);
  const auto parsed = parse_log(in);
  REQUIRE(parsed.size() == 3);
  CHECK(parsed[1].kind == EventKind::transferred);
  CHECK(parsed[1].counterparty == "fab-co");
  CHECK(parsed[2].note == "bent pins");
  const Directory back = Directory::replay(parsed);
  CHECK(back.holdings("acme") == d.holdings("acme"));
}
