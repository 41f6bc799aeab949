#include "potv/pott.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "json.hpp"

namespace potv::pott {

namespace {

double l2_distance(std::span<const float> a, std::span<const float> b) {
  double sum = 0.0;
  const size_t n = std::min(a.size(), b.size());
  for (size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += d * d;
  }
  // Length mismatches count as infinite distance.
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  return std::sqrt(sum);
}

std::vector<Digest> recompute_batch_hashes(const training::Transcript& t) {
  std::vector<Digest> hashes;
  hashes.reserve(t.data.size());
  for (const auto& b : t.data) hashes.push_back(training::batch_digest(b));
  return hashes;
}

std::vector<Digest> recompute_checkpoint_hashes(const training::Transcript& t) {
  std::vector<Digest> hashes;
  hashes.reserve(t.checkpoints.size());
  for (const auto& c : t.checkpoints) hashes.push_back(training::checkpoint_digest(c));
  return hashes;
}

}  // namespace

Digest precommitment_digest(const PrecommitPlan& plan) {
  ByteWriter w;
  w.str("potv-precommit-v1");
  w.digest(plan.meta_hash);
  w.u64(plan.batch_hashes.size());
  for (const auto& h : plan.batch_hashes) w.digest(h);
  return w.sha256();
}

Digest HashedTranscript::commitment_key() const {
  ByteWriter w;
  w.str("potv-commitment-v1");
  w.digest(meta_hash);
  w.u64(batch_hashes.size());
  for (const auto& h : batch_hashes) w.digest(h);
  w.u64(checkpoint_hashes.size());
  for (const auto& h : checkpoint_hashes) w.digest(h);
  return w.sha256();
}

HashedTranscript commit(const training::Transcript& t, const CommitOptions& opts) {
  t.validate_shape();
  HashedTranscript c;
  c.meta_hash = training::meta_digest(t.meta);
  c.batch_hashes = recompute_batch_hashes(t);
  c.checkpoint_hashes = recompute_checkpoint_hashes(t);
  if (opts.with_gaps) {
    for (size_t j = 0; j + 1 < t.checkpoints.size(); ++j) {
      c.checkpoint_gaps.push_back(
          l2_distance(t.checkpoints[j].weights, t.checkpoints[j + 1].weights));
    }
  }
  if (opts.self_plan) {
    c.precommit_plan = PrecommitPlan{c.meta_hash, c.batch_hashes};
  }
  return c;
}

std::string to_string(Selection s) {
  switch (s) {
    case Selection::uniform_random: return "uniform_random";
    case Selection::largest_jump: return "largest_jump";
    case Selection::all: return "all";
  }
  return "?";
}

Selection selection_from_string(const std::string& s) {
  if (s == "uniform_random") return Selection::uniform_random;
  if (s == "largest_jump") return Selection::largest_jump;
  if (s == "all") return Selection::all;
  throw std::invalid_argument("unknown segment selection: " + s);
}

void VerificationConfig::validate() const {
  if (!(epsilon > 0)) throw std::invalid_argument("VerificationConfig: epsilon must be > 0");
}

double deterministic_epsilon(std::uint64_t param_count) {
  return 1e-9 * std::sqrt(static_cast<double>(std::max<std::uint64_t>(param_count, 1)));
}

double calibrate_epsilon(const training::Hyperparams& meta, double noise_sigma,
                         std::uint64_t runs, std::uint64_t seed) {
  if (noise_sigma <= 0) return deterministic_epsilon(meta.param_count());
  if (runs == 0) throw std::invalid_argument("calibrate_epsilon: runs must be >= 1");
  Rng stream(seed, "epsilon-calibration");
  double max_seen = 0.0;
  for (std::uint64_t r = 0; r < runs; ++r) {
    auto probe_meta = meta;
    probe_meta.seed = stream.next_u64();
    const auto t = training::train(probe_meta, noise_sigma);
    const std::uint64_t k = t.meta.checkpoint_interval;
    for (std::uint64_t seg = 0; seg < t.segment_count(); ++seg) {
      const auto replayed = training::replay_segment(
          t.checkpoints[seg], std::span<const training::Batch>(t.data).subspan(seg * k, k),
          t.meta);
      max_seen = std::max(max_seen,
                          l2_distance(replayed.weights, t.checkpoints[seg + 1].weights));
    }
  }
  return 3.0 * max_seen;
}

namespace {

std::vector<std::uint64_t> select_segments(const training::Transcript& t,
                                           const HashedTranscript& commitment,
                                           const VerificationConfig& config) {
  const std::uint64_t n = t.segment_count();
  if (n == 0) return {};
  std::uint64_t count = config.segments_to_check;
  if (count == 0) count = std::max<std::uint64_t>(1, (n + 9) / 10);
  count = std::min(count, n);

  std::vector<std::uint64_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  if (config.selection == Selection::all) return all;

  if (config.selection == Selection::largest_jump) {
    // Prefer the distances disclosed with the commitment; recompute from the
    // reveal when absent.
    std::vector<double> gaps = commitment.checkpoint_gaps;
    if (gaps.size() != n) {
      gaps.clear();
      for (std::uint64_t j = 0; j < n; ++j) {
        gaps.push_back(
            l2_distance(t.checkpoints[j].weights, t.checkpoints[j + 1].weights));
      }
    }
    std::stable_sort(all.begin(), all.end(),
                     [&](std::uint64_t x, std::uint64_t y) { return gaps[x] > gaps[y]; });
    all.resize(count);
    std::sort(all.begin(), all.end());
    return all;
  }

  // uniform_random without replacement (partial Fisher-Yates).
  Rng rng(config.seed, "segment-selection");
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t j = i + rng.next_below(n - i);
    std::swap(all[i], all[j]);
  }
  all.resize(count);
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace

VerificationReport verify(const training::Transcript& transcript,
                          const HashedTranscript& commitment, const VerifyTarget& target,
                          const std::vector<chip::LogEntry>& chip_log,
                          const VerificationConfig& config) {
  config.validate();
  try {
    transcript.validate_shape();
  } catch (const std::invalid_argument& e) {
    throw ProtocolError(std::string("malformed transcript: ") + e.what());
  }
  if (target.values.size() != target.size()) {
    throw ProtocolError("malformed target: slice range disagrees with values");
  }

  VerificationReport report;
  auto fail = [&](const char* id, std::uint64_t index, double measured) {
    report.failed_checks.push_back(FailedCheck{id, index, measured});
  };

  // (1) The reveal must reproduce the committed digests.
  const auto batch_hashes = recompute_batch_hashes(transcript);
  const auto ckpt_hashes = recompute_checkpoint_hashes(transcript);
  if (training::meta_digest(transcript.meta) != commitment.meta_hash) fail("hash_meta", 0, 0);
  if (batch_hashes.size() != commitment.batch_hashes.size()) {
    fail("hash_batch_count", batch_hashes.size(), 0);
  } else {
    for (size_t i = 0; i < batch_hashes.size(); ++i) {
      if (batch_hashes[i] != commitment.batch_hashes[i]) fail("hash_batch", i, 0);
    }
  }
  if (ckpt_hashes.size() != commitment.checkpoint_hashes.size()) {
    fail("hash_checkpoint_count", ckpt_hashes.size(), 0);
  } else {
    for (size_t i = 0; i < ckpt_hashes.size(); ++i) {
      if (ckpt_hashes[i] != commitment.checkpoint_hashes[i]) fail("hash_checkpoint", i, 0);
    }
  }

  // (2) The target shard must be a checkpoint slice and appear in the log.
  const Digest target_hash = chip::hash_shard(target);
  bool in_log = false;
  for (const auto& e : chip_log) {
    if (e.shard_hash == target_hash) {
      in_log = true;
      break;
    }
  }
  if (!in_log) fail("target_log_linkage", 0, 0);
  bool slice_found = false;
  const std::uint64_t params = transcript.meta.param_count();
  if (target.end <= params && target.begin <= target.end) {
    for (const auto& c : transcript.checkpoints) {
      chip::WeightShard slice;
      slice.shard_index = target.shard_index;
      slice.begin = target.begin;
      slice.end = target.end;
      slice.values.assign(
          c.weights.begin() + static_cast<std::ptrdiff_t>(target.begin),
          c.weights.begin() + static_cast<std::ptrdiff_t>(target.end));
      if (chip::hash_shard(slice) == target_hash) {
        slice_found = true;
        break;
      }
    }
  }
  if (!slice_found) fail("target_checkpoint_linkage", 0, 0);

  // (3) The claimed initialization must regenerate from the seed.
  if (config.check_init && !transcript.checkpoints.empty()) {
    const auto init = training::regenerate_init(transcript.meta);
    const auto& w0 = transcript.checkpoints.front();
    bool ok = init == w0.weights;
    for (float v : w0.velocity) ok = ok && v == 0.0f;
    if (!ok) fail("init_regeneration", 0, l2_distance(init, w0.weights));
  }

  // (4) Logged precommitments must match the committed plan, and the
  // revealed batches must be a prefix of that plan.
  if (config.check_precommitment) {
    std::optional<Digest> logged;
    bool conflict = false;
    for (const auto& e : chip_log) {
      if (!e.precommitment) continue;
      if (logged && !(*logged == *e.precommitment)) conflict = true;
      logged = e.precommitment;
    }
    if (conflict) {
      fail("precommitment_conflict", 0, 0);
    } else if (logged) {
      if (!commitment.precommit_plan) {
        fail("precommitment_plan_missing", 0, 0);
      } else {
        const auto& plan = *commitment.precommit_plan;
        if (!(precommitment_digest(plan) == *logged)) fail("precommitment_digest", 0, 0);
        if (!(plan.meta_hash == training::meta_digest(transcript.meta))) {
          fail("precommitment_meta", 0, 0);
        }
        if (batch_hashes.size() > plan.batch_hashes.size()) {
          fail("precommitment_prefix", batch_hashes.size(), 0);
        } else {
          for (size_t i = 0; i < batch_hashes.size(); ++i) {
            if (batch_hashes[i] != plan.batch_hashes[i]) {
              fail("precommitment_prefix", i, 0);
              break;
            }
          }
        }
      }
    }
  }

  // (5) Segment replays.
  const auto segments = select_segments(transcript, commitment, config);
  const std::uint64_t k = transcript.meta.checkpoint_interval;
  for (std::uint64_t seg : segments) {
    const auto replayed = training::replay_segment(
        transcript.checkpoints[seg],
        std::span<const training::Batch>(transcript.data).subspan(seg * k, k), transcript.meta);
    const double dist = l2_distance(replayed.weights, transcript.checkpoints[seg + 1].weights);
    report.segments_checked.push_back(seg);
    report.segment_distances.push_back(dist);
    report.cost_replay_steps += k;
    if (!(dist < config.epsilon)) fail("segment_replay", seg, dist);
  }

  // (6) Training loss should decrease over the run. Losses are recomputed
  // from the reveal, never trusted from the report.
  if (config.check_loss_decrease && transcript.checkpoints.size() >= 2 &&
      !transcript.data.empty()) {
    std::vector<double> losses;
    for (const auto& c : transcript.checkpoints) {
      const std::uint64_t bi =
          std::min<std::uint64_t>(c.step, transcript.meta.total_steps - 1);
      losses.push_back(training::batch_loss(c.weights, transcript.meta, transcript.data[bi]));
    }
    const size_t half = losses.size() / 2;
    const double first = std::accumulate(losses.begin(), losses.begin() + half, 0.0) /
                         static_cast<double>(half);
    const double second = std::accumulate(losses.begin() + half, losses.end(), 0.0) /
                          static_cast<double>(losses.size() - half);
    if (!(second < first)) fail("loss_decrease", 0, second - first);
  }

  report.verdict = report.failed_checks.empty() ? Verdict::accept : Verdict::reject;
  return report;
}

// ---------------------------------------------------------------------------
// Distances
// ---------------------------------------------------------------------------

std::uint64_t batch_edit_distance(const std::vector<Digest>& a, const std::vector<Digest>& b) {
  // Insert/delete-only edit distance: n + m - 2*LCS.
  const size_t n = a.size(), m = b.size();
  std::vector<std::uint64_t> prev(m + 1, 0), cur(m + 1, 0);
  for (size_t i = 1; i <= n; ++i) {
    for (size_t j = 1; j <= m; ++j) {
      if (a[i - 1] == b[j - 1]) {
        cur[j] = prev[j - 1] + 1;
      } else {
        cur[j] = std::max(prev[j], cur[j - 1]);
      }
    }
    std::swap(prev, cur);
  }
  const std::uint64_t lcs = prev[m];
  return static_cast<std::uint64_t>(n + m) - 2 * lcs;
}

namespace {

std::uint64_t meta_distance(const training::Hyperparams& a, const training::Hyperparams& b) {
  std::uint64_t d = 0;
  d += a.seed != b.seed;
  d += a.layer_sizes != b.layer_sizes;
  d += a.learning_rate != b.learning_rate;
  d += a.batch_size != b.batch_size;
  d += a.total_steps != b.total_steps;
  d += a.checkpoint_interval != b.checkpoint_interval;
  d += a.loss != b.loss;
  d += a.data_gen != b.data_gen;
  d += a.optimizer != b.optimizer;
  d += a.momentum != b.momentum;
  return d;
}

}  // namespace

TranscriptDistance transcript_distance(const training::Transcript& a, const training::Transcript& b) {
  TranscriptDistance d;
  d.batch_edit_distance = batch_edit_distance(recompute_batch_hashes(a), recompute_batch_hashes(b));
  d.meta_field_distance = meta_distance(a.meta, b.meta);
  return d;
}

TranscriptDistance transcript_distance(const HashedTranscript& a, const HashedTranscript& b) {
  TranscriptDistance d;
  d.batch_edit_distance = batch_edit_distance(a.batch_hashes, b.batch_hashes);
  d.meta_field_distance = a.meta_hash == b.meta_hash ? 0 : 1;
  return d;
}

// ---------------------------------------------------------------------------
// Spoof suite
// ---------------------------------------------------------------------------

namespace {

AttackOutcome run_attack(const std::string& id, const training::Transcript& original,
                         const training::Transcript& spoof, const HashedTranscript& commitment,
                         const VerifyTarget& target, const std::vector<chip::LogEntry>& log,
                         const VerificationConfig& config, std::uint64_t construction_steps) {
  AttackOutcome out;
  out.attack_id = id;
  out.construction_steps = construction_steps;
  out.distance = transcript_distance(original, spoof);
  const auto report = verify(spoof, commitment, target, log, config);
  out.verdict = report.verdict;
  out.failed_checks = report.failed_checks;
  return out;
}

}  // namespace

SuiteReport spoof_suite(const training::Transcript& original, const VerifyTarget& target,
                        const std::vector<chip::LogEntry>& chip_log,
                        const VerificationConfig& config) {
  original.validate_shape();
  if (original.segment_count() < 2) {
    throw std::invalid_argument("spoof_suite: need at least two segments");
  }
  SuiteReport suite;
  const std::uint64_t k = original.meta.checkpoint_interval;
  const std::uint64_t nseg = original.segment_count();

  // (a) run_splitting: report the tail of the run as a standalone run whose
  // "initialization" is the mid-run checkpoint.
  {
    const std::uint64_t cut = nseg / 2;  // checkpoints [cut..] survive
    training::Transcript spoof;
    spoof.meta = original.meta;
    spoof.meta.total_steps = original.meta.total_steps - cut * k;
    spoof.data.assign(original.data.begin() + static_cast<std::ptrdiff_t>(cut * k),
                      original.data.end());
    for (size_t j = cut; j < original.checkpoints.size(); ++j) {
      auto c = original.checkpoints[j];
      c.step = (j - cut) * k;
      spoof.checkpoints.push_back(std::move(c));
    }
    spoof.losses.assign(original.losses.begin() + static_cast<std::ptrdiff_t>(cut),
                        original.losses.end());
    suite.attacks.push_back(run_attack("run_splitting", original, spoof, commit(spoof), target,
                                       chip_log, config, 0));
  }

  // (b) batch_substitution: swap one batch, keep every checkpoint.
  {
    training::Transcript spoof = original;
    auto fake_meta = original.meta;
    fake_meta.seed = splitmix64_mix(original.meta.seed ^ 0x5b4d5c3e2f1a0908ULL);
    fake_meta.total_steps = 1;
    fake_meta.checkpoint_interval = 1;
    const std::uint64_t pos = (nseg / 2) * k;  // first batch of the middle segment
    spoof.data[pos] = training::generate_data(fake_meta)[0];
    suite.attacks.push_back(run_attack("batch_substitution", original, spoof, commit(spoof),
                                       target, chip_log, config, 0));
  }

  // (c) segment_splice: perturb one interior checkpoint.
  {
    training::Transcript spoof = original;
    const size_t j = spoof.checkpoints.size() / 2;
    Rng rng(config.seed, "segment-splice");
    for (auto& v : spoof.checkpoints[j].weights) {
      v = static_cast<float>(static_cast<double>(v) + 0.05 * rng.next_gaussian());
    }
    suite.attacks.push_back(run_attack("segment_splice", original, spoof, commit(spoof), target,
                                       chip_log, config, 0));
  }

  // (d) free_lunch: claim the snapshot is just a random initialization.
  {
    // The checkpoint whose slice the target matches becomes the "init".
    const auto target_hash = chip::hash_shard(target);
    std::vector<float> claimed;
    for (const auto& c : original.checkpoints) {
      if (target.end > c.weights.size()) continue;
      chip::WeightShard slice{target.shard_index, target.begin, target.end, {}};
      slice.values.assign(c.weights.begin() + static_cast<std::ptrdiff_t>(target.begin),
                          c.weights.begin() + static_cast<std::ptrdiff_t>(target.end));
      if (chip::hash_shard(slice) == target_hash) {
        claimed = c.weights;
        break;
      }
    }
    if (claimed.empty()) claimed = original.checkpoints.back().weights;
    training::Transcript spoof;
    spoof.meta = original.meta;
    spoof.meta.seed = splitmix64_mix(original.meta.seed ^ 0x7788aa11cc33ee55ULL);
    spoof.meta.total_steps = 0;
    spoof.checkpoints.push_back(training::Checkpoint{
        0, claimed,
        original.meta.optimizer == training::Optimizer::sgd_momentum
            ? std::vector<float>(claimed.size(), 0.0f)
            : std::vector<float>{}});
    spoof.losses.push_back(0.0);
    suite.attacks.push_back(run_attack("free_lunch", original, spoof, commit(spoof), target,
                                       chip_log, config, 0));
  }

  // (e) stale_precommit: the chip logged a precommitment for one batch plan,
  // the executed run used another. The reveal is internally consistent and
  // replays cleanly; only the precommitment linkage can catch it.
  {
    auto planned_meta = original.meta;
    planned_meta.seed = splitmix64_mix(original.meta.seed ^ 0x1122334455667788ULL);
    PrecommitPlan plan;
    plan.meta_hash = training::meta_digest(original.meta);
    for (const auto& b : training::generate_data(planned_meta)) {
      plan.batch_hashes.push_back(training::batch_digest(b));
    }
    const Digest stale = precommitment_digest(plan);
    std::vector<chip::LogEntry> forged_log = chip_log;
    for (auto& e : forged_log) {
      if (e.precommitment) e.precommitment = stale;
    }
    auto commitment = commit(original);
    commitment.precommit_plan = plan;
    suite.attacks.push_back(run_attack("stale_precommit", original, original, commitment, target,
                                       forged_log, config, original.meta.total_steps));
  }

  for (const auto& a : suite.attacks) {
    if (a.verdict == Verdict::reject) ++suite.rejected;
  }
  return suite;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

std::string render_commitment(const HashedTranscript& c) {
  nlohmann::json j;
  j["format"] = "potv-commitment-v1";
  j["meta_hash"] = c.meta_hash.hex();
  auto hexes = [](const std::vector<Digest>& v) {
    std::vector<std::string> out;
    out.reserve(v.size());
    for (const auto& d : v) out.push_back(d.hex());
    return out;
  };
  j["batch_hashes"] = hexes(c.batch_hashes);
  j["checkpoint_hashes"] = hexes(c.checkpoint_hashes);
  if (!c.checkpoint_gaps.empty()) j["checkpoint_gaps"] = c.checkpoint_gaps;
  if (c.precommit_plan) {
    j["precommit_plan"] = {{"meta_hash", c.precommit_plan->meta_hash.hex()},
                           {"batch_hashes", hexes(c.precommit_plan->batch_hashes)}};
  }
  return j.dump(2) + "\n";
}

HashedTranscript parse_commitment(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (j.value("format", "") != "potv-commitment-v1") {
    throw std::runtime_error("parse_commitment: unknown format");
  }
  HashedTranscript c;
  c.meta_hash = Digest::from_hex(j.at("meta_hash").get<std::string>());
  for (const auto& h : j.at("batch_hashes")) c.batch_hashes.push_back(Digest::from_hex(h.get<std::string>()));
  for (const auto& h : j.at("checkpoint_hashes")) {
    c.checkpoint_hashes.push_back(Digest::from_hex(h.get<std::string>()));
  }
  if (j.contains("checkpoint_gaps")) {
    c.checkpoint_gaps = j["checkpoint_gaps"].get<std::vector<double>>();
  }
  if (j.contains("precommit_plan")) {
    PrecommitPlan plan;
    plan.meta_hash = Digest::from_hex(j["precommit_plan"].at("meta_hash").get<std::string>());
    for (const auto& h : j["precommit_plan"].at("batch_hashes")) {
      plan.batch_hashes.push_back(Digest::from_hex(h.get<std::string>()));
    }
    c.precommit_plan = std::move(plan);
  }
  return c;
}

std::string render_report(const VerificationReport& r) {
  nlohmann::json j;
  j["verdict"] = r.verdict == Verdict::accept ? "accept" : "reject";
  j["failed_checks"] = nlohmann::json::array();
  for (const auto& f : r.failed_checks) {
    j["failed_checks"].push_back(
        {{"check_id", f.check_id}, {"index", f.index}, {"measured", f.measured}});
  }
  j["segments_checked"] = r.segments_checked;
  j["segment_distances"] = r.segment_distances;
  j["cost_replay_steps"] = r.cost_replay_steps;
  return j.dump(2) + "\n";
}

}  // namespace potv::pott
