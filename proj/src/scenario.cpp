#include "potv/scenario.hpp"

#include <cmath>
#include <fstream>
#include <unordered_map>

#include "json.hpp"

namespace potv::scenario {

void ScenarioConfig::validate() const {
  trainer.validate();
  if (fleet_chips < 1) throw std::invalid_argument("scenario: fleet must have chips");
  if (involved_chips < 1 || involved_chips > fleet_chips) {
    throw std::invalid_argument("scenario: involved_chips out of range");
  }
  if (!(run_end_day > run_start_day)) {
    throw std::invalid_argument("scenario: run must span positive time");
  }
  if (reporting != "report_prefixes" && reporting != "withhold") {
    throw std::invalid_argument("scenario: unknown reporting behavior " + reporting);
  }
  if (plan_annual_samples < 0 || plan_samples_per_period < 0) {
    throw std::invalid_argument("scenario: sampling plan must be nonnegative");
  }
  verification.validate();
}

// ---------------------------------------------------------------------------
// The run as chips see it
// ---------------------------------------------------------------------------

namespace {

// Maps wallclock time onto checkpointed steps and serves per-chip shards.
// Chip memory between checkpoints is not modeled, so an interrupt observes
// the most recently completed checkpoint's weights.
class ShardedRun : public chip::ActiveRun {
 public:
  ShardedRun(std::shared_ptr<const training::Transcript> t, std::uint64_t chip_count,
             std::uint64_t chip_index, double start_day, double end_day,
             std::optional<Digest> precommitment)
      : transcript_(std::move(t)),
        chip_count_(chip_count),
        chip_index_(chip_index),
        start_day_(start_day),
        end_day_(end_day),
        precommitment_(precommitment) {}

  std::optional<std::uint64_t> step_at(double day) const override {
    if (day < start_day_ || day > end_day_) return std::nullopt;
    const auto& meta = transcript_->meta;
    const double frac = (day - start_day_) / (end_day_ - start_day_);
    auto completed = static_cast<std::uint64_t>(frac * static_cast<double>(meta.total_steps));
    completed = std::min(completed, meta.total_steps);
    return completed - completed % meta.checkpoint_interval;
  }

  chip::WeightShard shard_at_step(std::uint64_t step) const override {
    const auto& meta = transcript_->meta;
    const auto& ckpt = transcript_->checkpoints.at(step / meta.checkpoint_interval);
    const std::uint64_t n = ckpt.weights.size();
    const std::uint64_t base = n / chip_count_;
    const std::uint64_t extra = n % chip_count_;
    const std::uint64_t begin =
        chip_index_ * base + std::min<std::uint64_t>(chip_index_, extra);
    const std::uint64_t len = base + (chip_index_ < extra ? 1 : 0);
    chip::WeightShard shard;
    shard.shard_index = chip_index_;
    shard.begin = begin;
    shard.end = begin + len;
    shard.values.assign(ckpt.weights.begin() + static_cast<std::ptrdiff_t>(begin),
                        ckpt.weights.begin() + static_cast<std::ptrdiff_t>(begin + len));
    return shard;
  }

  std::optional<Digest> precommitment() const override { return precommitment_; }

 private:
  std::shared_ptr<const training::Transcript> transcript_;
  std::uint64_t chip_count_;
  std::uint64_t chip_index_;
  double start_day_;
  double end_day_;
  std::optional<Digest> precommitment_;
};

// Prover that reports, for every logged snapshot, the truthful transcript
// prefix up to the snapshot's step, or withholds everything.
class ScenarioProver : public audit::Prover {
 public:
  ScenarioProver(std::shared_ptr<const training::Transcript> t, std::uint64_t chip_count,
                 bool withhold)
      : transcript_(std::move(t)), chip_count_(chip_count), withhold_(withhold) {
    const auto& full = *transcript_;
    meta_hash_ = training::meta_digest(full.meta);
    for (const auto& b : full.data) batch_hashes_.push_back(training::batch_digest(b));
    for (const auto& c : full.checkpoints) {
      checkpoint_hashes_.push_back(training::checkpoint_digest(c));
    }
    plan_ = pott::PrecommitPlan{meta_hash_, batch_hashes_};

    const std::uint64_t k = full.meta.checkpoint_interval;
    for (std::uint64_t ci = 0; ci < full.checkpoints.size(); ++ci) {
      const std::uint64_t step = ci * k;
      // Commitment for the prefix ending at this checkpoint, assembled from
      // the precomputed digest lists.
      pott::HashedTranscript c;
      c.meta_hash = meta_hash_;
      c.batch_hashes.assign(batch_hashes_.begin(),
                            batch_hashes_.begin() + static_cast<std::ptrdiff_t>(step));
      c.checkpoint_hashes.assign(checkpoint_hashes_.begin(),
                                 checkpoint_hashes_.begin() + static_cast<std::ptrdiff_t>(ci + 1));
      c.precommit_plan = plan_;
      prefix_commitments_.push_back(std::move(c));

      // Index every chip's shard digest at this checkpoint.
      const auto shards = training::shard_weights(full.checkpoints[ci].weights, chip_count_);
      for (const auto& shard : shards) {
        shard_index_.emplace(chip::hash_shard(shard).hex(), std::make_pair(ci, shard.shard_index));
      }
    }
  }

  std::vector<pott::HashedTranscript> commitments() const override {
    if (withhold_) return {};
    return prefix_commitments_;
  }

  std::optional<Reveal> reveal_for(const Digest& shard_hash) const override {
    if (withhold_) return std::nullopt;
    auto it = shard_index_.find(shard_hash.hex());
    if (it == shard_index_.end()) return std::nullopt;
    const auto [ckpt_index, chip_index] = it->second;

    auto cached = prefix_cache_.find(ckpt_index);
    if (cached == prefix_cache_.end()) {
      auto prefix = std::make_shared<training::Transcript>();
      const auto& full = *transcript_;
      const std::uint64_t k = full.meta.checkpoint_interval;
      prefix->meta = full.meta;
      prefix->meta.total_steps = ckpt_index * k;
      prefix->data.assign(full.data.begin(),
                          full.data.begin() + static_cast<std::ptrdiff_t>(ckpt_index * k));
      prefix->checkpoints.assign(
          full.checkpoints.begin(),
          full.checkpoints.begin() + static_cast<std::ptrdiff_t>(ckpt_index + 1));
      prefix->losses.assign(full.losses.begin(),
                            full.losses.begin() + static_cast<std::ptrdiff_t>(ckpt_index + 1));
      cached = prefix_cache_.emplace(ckpt_index, std::move(prefix)).first;
    }

    Reveal r;
    r.transcript = cached->second;
    r.commitment_key = prefix_commitments_[ckpt_index].commitment_key();
    const auto shards =
        training::shard_weights(transcript_->checkpoints[ckpt_index].weights, chip_count_);
    r.shard = shards[chip_index];
    return r;
  }

  const pott::PrecommitPlan& plan() const { return plan_; }

 private:
  std::shared_ptr<const training::Transcript> transcript_;
  std::uint64_t chip_count_;
  bool withhold_;
  Digest meta_hash_;
  std::vector<Digest> batch_hashes_;
  std::vector<Digest> checkpoint_hashes_;
  pott::PrecommitPlan plan_;
  std::vector<pott::HashedTranscript> prefix_commitments_;
  std::unordered_map<std::string, std::pair<std::uint64_t, std::uint64_t>> shard_index_;
  mutable std::unordered_map<std::uint64_t, std::shared_ptr<training::Transcript>> prefix_cache_;
};

std::string serial_name(std::uint64_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "chip-%06llu", static_cast<unsigned long long>(i));
  return buf;
}

}  // namespace

World build_world(const ScenarioConfig& cfg, std::uint64_t world_seed_override) {
  cfg.validate();
  const std::uint64_t world_seed =
      world_seed_override ? world_seed_override : cfg.world_seed;

  World world;

  // Directory: every chip fabricated to the owner before the run begins.
  const double fab_day = std::min(0.0, cfg.run_start_day) - 1.0;
  for (std::uint64_t i = 0; i < cfg.fleet_chips; ++i) {
    world.directory.record(registry::CustodyEvent{
        serial_name(i), cfg.owner, registry::EventKind::fabricated, fab_day, "", ""});
  }

  // The run itself is determined by the trainer seed alone.
  auto transcript = std::make_shared<training::Transcript>(training::train(cfg.trainer, cfg.noise_sigma));
  world.transcript = transcript;

  auto prover = std::make_unique<ScenarioProver>(transcript, cfg.involved_chips,
                                                 cfg.reporting == "withhold");
  const std::optional<Digest> precommit =
      cfg.precommit ? std::optional<Digest>(pott::precommitment_digest(prover->plan()))
                    : std::nullopt;

  // Chips. Only involved chips ever log run snapshots; idle chips keep empty
  // logs, so advancing them is a no-op we skip.
  const Rng chip_events(world_seed, "chip-events");
  for (std::uint64_t i = 0; i < cfg.fleet_chips; ++i) {
    auto c = std::make_unique<chip::Chip>(serial_name(i), cfg.owner, cfg.chip_flops_per_day,
                                          cfg.snapshot_rate);
    if (i < cfg.involved_chips) {
      c->attach_run(std::make_shared<ShardedRun>(transcript, cfg.involved_chips, i,
                                                 cfg.run_start_day, cfg.run_end_day, precommit));
      Rng rng = chip_events.child(i);
      const double horizon =
          std::max(cfg.run_end_day, cfg.audit.start_day + cfg.audit.horizon_days);
      c->advance(horizon - c->now() + 1.0, rng);
      c->detach_run();
    }
    world.fleet.emplace(c->serial(), c.get());
    world.chips.push_back(std::move(c));
  }

  world.prover = std::move(prover);
  return world;
}

audit::DetectionReport run_scenario_audit(const World& world, const ScenarioConfig& cfg,
                                          std::uint64_t audit_seed_override) {
  sampling::SamplingPlan plan;
  plan.annual_samples = cfg.plan_annual_samples;
  plan.samples_per_period = cfg.plan_samples_per_period;
  plan.samples_per_period_int =
      static_cast<std::uint64_t>(std::ceil(cfg.plan_samples_per_period - 1e-12));

  Rng rng(audit_seed_override ? audit_seed_override : cfg.audit_seed, "audit");
  return audit::run_audit(world.directory, cfg.owner, world.fleet, *world.prover, plan,
                          cfg.rules, cfg.verification, cfg.audit, rng);
}

// ---------------------------------------------------------------------------
// Config file
// ---------------------------------------------------------------------------

ScenarioConfig load_scenario(const std::string& json_text) {
  const nlohmann::json j = nlohmann::json::parse(json_text);
  ScenarioConfig cfg;

  const auto& fleet = j.at("fleet");
  cfg.fleet_chips = fleet.at("chips").get<std::uint64_t>();
  cfg.owner = fleet.value("owner", cfg.owner);
  cfg.chip_flops_per_day = fleet.value("flops_per_day", cfg.chip_flops_per_day);
  cfg.snapshot_rate = fleet.value("snapshot_rate", cfg.snapshot_rate);

  const auto& tr = j.at("trainer");
  cfg.trainer.seed = tr.at("seed").get<std::uint64_t>();
  cfg.trainer.layer_sizes = tr.at("layer_sizes").get<std::vector<std::uint64_t>>();
  cfg.trainer.learning_rate = tr.value("learning_rate", cfg.trainer.learning_rate);
  cfg.trainer.batch_size = tr.value("batch_size", cfg.trainer.batch_size);
  cfg.trainer.total_steps = tr.at("total_steps").get<std::uint64_t>();
  cfg.trainer.checkpoint_interval = tr.value("checkpoint_interval", std::uint64_t{1});
  cfg.trainer.loss = training::loss_from_string(tr.value("loss", "mse"));
  cfg.trainer.data_gen = training::data_gen_from_string(tr.value("data_gen", "tanh_teacher"));
  cfg.trainer.optimizer = training::optimizer_from_string(tr.value("optimizer", "sgd"));
  cfg.noise_sigma = tr.value("noise_sigma", 0.0);

  const auto& run = j.at("run");
  cfg.involved_chips = run.at("involved_chips").get<std::uint64_t>();
  cfg.run_start_day = run.at("start_day").get<double>();
  cfg.run_end_day = run.at("end_day").get<double>();
  cfg.precommit = run.value("precommit", true);
  cfg.reporting = run.value("reporting", cfg.reporting);

  const auto& rules = j.at("rules");
  cfg.rules.max_compute_flops = rules.at("max_compute_flops").get<double>();
  if (rules.contains("data")) {
    audit::DataRule d;
    d.predicate_id = rules["data"].at("predicate").get<std::string>();
    d.threshold = rules["data"].at("threshold").get<double>();
    d.max_fraction = rules["data"].at("max_fraction").get<double>();
    cfg.rules.data_rule = d;
  }
  if (rules.contains("benchmark")) {
    audit::BenchmarkRule b;
    b.dataset_id = rules["benchmark"].at("dataset_id").get<std::string>();
    b.max_score = rules["benchmark"].at("max_score").get<double>();
    b.eval_batches = rules["benchmark"].value("eval_batches", b.eval_batches);
    cfg.rules.benchmark_rule = b;
  }
  cfg.rules.combination = rules.value("combination", "");

  const auto& ver = j.at("verification");
  cfg.verification.epsilon = ver.at("epsilon").get<double>();
  cfg.verification.segments_to_check = ver.value("segments_to_check", std::uint64_t{0});
  cfg.verification.selection =
      pott::selection_from_string(ver.value("selection", "uniform_random"));
  cfg.verification.check_init = ver.value("check_init", true);
  cfg.verification.check_precommitment = ver.value("check_precommitment", true);
  cfg.verification.check_loss_decrease = ver.value("check_loss_decrease", true);
  cfg.verification.seed = ver.value("seed", std::uint64_t{0});

  const auto& aud = j.at("audit");
  cfg.audit.start_day = aud.at("start_day").get<double>();
  cfg.audit.horizon_days = aud.at("horizon_days").get<double>();
  cfg.audit.monitoring_days = aud.at("monitoring_days").get<double>();
  cfg.plan_annual_samples = aud.at("annual_samples").get<double>();
  cfg.plan_samples_per_period = aud.value("samples_per_period", 0.0);

  const auto& seeds = j.at("seeds");
  cfg.world_seed = seeds.value("world", std::uint64_t{1});
  cfg.audit_seed = seeds.value("audit", std::uint64_t{1});

  cfg.validate();
  return cfg;
}

ScenarioConfig load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read scenario file " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return load_scenario(text);
}

}  // namespace potv::scenario
