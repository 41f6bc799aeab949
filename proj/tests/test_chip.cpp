// Unit tests for the simulated chip: shard hashing, Poisson logging,
// physical inspection, log files.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "potv/chip.hpp"
#include "potv/sampling.hpp"

using namespace potv;
using namespace potv::chip;

namespace {

// Minimal run stub: a fixed shard, active on [start, end), checkpoints every
// `interval` days starting at step 0.
class StubRun : public ActiveRun {
 public:
  StubRun(WeightShard shard, double start, double end, std::optional<Digest> pre = {})
      : shard_(std::move(shard)), start_(start), end_(end), pre_(pre) {}

  std::optional<std::uint64_t> step_at(double day) const override {
    if (day < start_ || day > end_) return std::nullopt;
    return static_cast<std::uint64_t>(day - start_);  // one step per day
  }
  WeightShard shard_at_step(std::uint64_t step) const override {
    WeightShard s = shard_;
    if (!s.values.empty()) s.values[0] = static_cast<float>(step);  // evolves per step
    return s;
  }
  std::optional<Digest> precommitment() const override { return pre_; }

 private:
  WeightShard shard_;
  double start_, end_;
  std::optional<Digest> pre_;
};

WeightShard small_shard() {
  WeightShard s;
  s.shard_index = 1;
  s.begin = 4;
  s.end = 7;
  s.values = {1.0f, -2.5f, 3.25f};
  return s;
}

}  // namespace

TEST_CASE("hash_shard golden values") {
  // Empty shard: 24 zero bytes of header. Constant computed with an
  // independent SHA-256 implementation.
  WeightShard empty;
  CHECK(hash_shard(empty).hex() ==
        "9d908ecfb6b256def8b49a7c504e6c889c4b0e41fe6ce3e01863dd7b61a20aa0");
  CHECK(hash_shard(small_shard()).hex() ==
        "2e2090a50a56c7e586ae5754c6aa7a3f501e058d07e1cc078c264ab54c0d992a");
}

TEST_CASE("hash_shard determinism and sensitivity") {
  auto s = small_shard();
  CHECK(hash_shard(s) == hash_shard(s));
  auto t = s;
  // Flip one bit of one value.
  std::uint32_t bits;
  std::memcpy(&bits, &t.values[1], 4);
  bits ^= 1u;
  std::memcpy(&t.values[1], &bits, 4);
  CHECK_FALSE(hash_shard(s) == hash_shard(t));

  auto bad = s;
  bad.values.pop_back();
  CHECK_THROWS_AS(hash_shard(bad), std::invalid_argument);
}

TEST_CASE("advance on an idle chip logs nothing") {
  Chip chip("serial-1", "acme", 1e15, 0.5);
  Rng rng(7);
  auto fresh = chip.advance(30.0, rng);
  CHECK(fresh.empty());
  CHECK(chip.log().empty());
  CHECK(chip.now() == doctest::Approx(30.0));
  CHECK_THROWS_AS(chip.advance(0.0, rng), std::invalid_argument);
}

TEST_CASE("advance is deterministic under a fixed rng") {
  auto make = [] {
    Chip chip("serial-1", "acme", 1e15, 0.3);
    chip.attach_run(std::make_shared<StubRun>(small_shard(), 0.0, 100.0));
    return chip;
  };
  auto a = make();
  auto b = make();
  Rng ra(42), rb(42);
  const auto ea = a.advance(50.0, ra);
  const auto eb = b.advance(50.0, rb);
  REQUIRE(ea.size() == eb.size());
  for (size_t i = 0; i < ea.size(); ++i) {
    CHECK(ea[i].wallclock_day == eb[i].wallclock_day);
    CHECK(ea[i].step == eb[i].step);
    CHECK(ea[i].shard_hash == eb[i].shard_hash);
  }
}

TEST_CASE("log is append-only and strictly ordered in time") {
  Chip chip("serial-1", "acme", 1e15, 0.4);
  chip.attach_run(std::make_shared<StubRun>(small_shard(), 0.0, 1000.0));
  Rng rng(3);
  std::vector<LogEntry> prefix;
  for (int i = 0; i < 10; ++i) {
    prefix = chip.log();
    chip.advance(20.0, rng);
    const auto& now = chip.log();
    REQUIRE(now.size() >= prefix.size());
    for (size_t j = 0; j < prefix.size(); ++j) {
      CHECK(now[j].wallclock_day == prefix[j].wallclock_day);
      CHECK(now[j].shard_hash == prefix[j].shard_hash);
    }
  }
  const auto& log = chip.log();
  for (size_t j = 1; j < log.size(); ++j) {
    CHECK(log[j].wallclock_day > log[j - 1].wallclock_day);
  }
}

TEST_CASE("snapshot entries land on completed steps and hash the shard") {
  Chip chip("serial-1", "acme", 1e15, 0.5);
  auto run = std::make_shared<StubRun>(small_shard(), 10.0, 40.0);
  chip.attach_run(run);
  Rng rng(11);
  chip.advance(60.0, rng);
  REQUIRE(!chip.log().empty());
  for (const auto& e : chip.log()) {
    CHECK(e.wallclock_day >= 10.0);
    CHECK(e.wallclock_day <= 40.0);
    CHECK(e.shard_hash == hash_shard(run->shard_at_step(e.step)));
  }
}

TEST_CASE("empirical snapshot presence matches the closed form") {
  // 1e5 chips advanced 30 days at f=0.1; the fraction with at least one
  // entry must agree with 1-exp(-3) within 3 sigma.
  const int n = 100000;
  const double f = 0.1;
  Rng master(2024, "presence");
  int with_entry = 0;
  auto run = std::make_shared<StubRun>(small_shard(), 0.0, 30.0);
  for (int i = 0; i < n; ++i) {
    Chip chip("s", "o", 1.0, f);
    chip.attach_run(run);
    Rng rng = master.child(static_cast<std::uint64_t>(i));
    if (!chip.advance(30.0, rng).empty()) ++with_entry;
  }
  const double expected = sampling::snapshot_presence_prob(f, 30.0);
  const double observed = static_cast<double>(with_entry) / n;
  const double sigma = std::sqrt(expected * (1 - expected) / n);
  CHECK(std::abs(observed - expected) < 3 * sigma);
}

TEST_CASE("event counts over disjoint intervals are uncorrelated") {
  // Sample covariance of per-interval entry counts across many chips.
  const int n = 20000;
  const double f = 0.3;
  auto run = std::make_shared<StubRun>(small_shard(), 0.0, 1e9);
  Rng master(7, "independence");
  double sx = 0, sy = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    Chip chip("s", "o", 1.0, f);
    chip.attach_run(run);
    Rng rng = master.child(static_cast<std::uint64_t>(i));
    const double x = static_cast<double>(chip.advance(10.0, rng).size());
    const double y = static_cast<double>(chip.advance(10.0, rng).size());
    sx += x;
    sy += y;
    sxy += x * y;
  }
  const double cov = sxy / n - (sx / n) * (sy / n);
  // Var of the sample covariance of two Poisson(3) variables ~ lambda^2/n.
  CHECK(std::abs(cov) < 3.0 * std::sqrt(9.0 / n));
  CHECK(sx / n == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("empirical event rate matches f") {
  Chip chip("serial", "o", 1.0, 0.25);
  chip.attach_run(std::make_shared<StubRun>(small_shard(), 0.0, 1e9));
  Rng rng(5);
  chip.advance(40000.0, rng);
  const double rate = static_cast<double>(chip.log().size()) / 40000.0;
  const double sigma = std::sqrt(0.25 / 40000.0);
  CHECK(std::abs(rate - 0.25) < 3 * sigma);
}

TEST_CASE("tampered unsigned chip suppresses logging silently") {
  Chip chip("serial-1", "acme", 1e15, 0.5);
  chip.attach_run(std::make_shared<StubRun>(small_shard(), 0.0, 1000.0));
  chip.tamper(/*strip_firmware_signature=*/true);
  Rng rng(9);
  CHECK(chip.advance(100.0, rng).empty());
  CHECK(chip.log().empty());
  // Remote reads look clean; only physical inspection reveals the attack.
  const auto finding = physical_inspect(chip, "serial-1");
  CHECK(finding.serial_match);
  CHECK(finding.tamper_detected);
  CHECK(finding.log_copy.empty());
}

TEST_CASE("physical inspection flags serial mismatch") {
  Chip chip("serial-1", "acme", 1e15, 0.5);
  const auto finding = physical_inspect(chip, "serial-2");
  CHECK_FALSE(finding.serial_match);
  CHECK_FALSE(finding.tamper_detected);
}

TEST_CASE("log file golden format") {
  LogEntry e;
  e.step = 3;
  e.wallclock_day = 2.5;
  e.shard_hash = hash_shard(small_shard());
  CHECK(render_log({e}) ==
        "3 2.5 2e2090a50a56c7e586ae5754c6aa7a3f501e058d07e1cc078c264ab54c0d992a\n");
  e.precommitment = Digest{};
  const std::string with_pre =
      "3 2.5 2e2090a50a56c7e586ae5754c6aa7a3f501e058d07e1cc078c264ab54c0d992a "
      "0000000000000000000000000000000000000000000000000000000000000000\n";
  CHECK(render_log({e}) == with_pre);
  // Wallclock values round-trip exactly through the text form.
  e.wallclock_day = 0.1 + 0.2;
  const auto back = parse_log_string(render_log({e}));
  CHECK(back[0].wallclock_day == e.wallclock_day);
}

TEST_CASE("log file round-trips with stable field order") {
  Chip chip("serial-1", "acme", 1e15, 0.7);
  Digest pre;
  pre.bytes[0] = 0xab;
  chip.attach_run(std::make_shared<StubRun>(small_shard(), 0.0, 100.0, pre));
  Rng rng(21);
  chip.advance(50.0, rng);
  REQUIRE(!chip.log().empty());

  const auto text = render_log(chip.log());
  // One line per entry: step day hash precommitment.
  std::istringstream lines(text);
  std::string first;
  std::getline(lines, first);
  CHECK(std::count(first.begin(), first.end(), ' ') == 3);

  const auto parsed = parse_log_string(text);
  REQUIRE(parsed.size() == chip.log().size());
  for (size_t i = 0; i < parsed.size(); ++i) {
    CHECK(parsed[i].step == chip.log()[i].step);
    CHECK(parsed[i].wallclock_day == chip.log()[i].wallclock_day);
    CHECK(parsed[i].shard_hash == chip.log()[i].shard_hash);
    REQUIRE(parsed[i].precommitment.has_value());
    CHECK(*parsed[i].precommitment == *chip.log()[i].precommitment);
  }
}
