#include "potv/inspection.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>
#include <sstream>

#include "json.hpp"

namespace potv::audit {

// ---------------------------------------------------------------------------
// Rule evaluation
// ---------------------------------------------------------------------------

namespace {

bool batch_flagged(const training::Batch& batch, const DataRule& rule) {
  if (rule.predicate_id == "input_linf_above") {
    float m = 0.0f;
    for (float v : batch.inputs) m = std::max(m, std::abs(v));
    return m > rule.threshold;
  }
  if (rule.predicate_id == "target_mean_above") {
    double sum = 0.0;
    for (float v : batch.targets) sum += v;
    return sum / static_cast<double>(batch.targets.size()) > rule.threshold;
  }
  throw std::invalid_argument("unknown data predicate: " + rule.predicate_id);
}

// Tiny recursive-descent parser for the combination expression.
class CombinationParser {
 public:
  CombinationParser(const std::string& text, const RuleVerdicts& v) : text_(text), v_(v) {}

  bool parse() {
    const bool value = parse_or();
    skip_ws();
    if (pos_ != text_.size()) {
      throw std::invalid_argument("combination: trailing input at " + std::to_string(pos_));
    }
    return value;
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool eat(const char* tok) {
    skip_ws();
    const size_t n = std::strlen(tok);
    if (text_.compare(pos_, n, tok) == 0) {
      pos_ += n;
      return true;
    }
    return false;
  }
  bool parse_or() {
    bool v = parse_and();
    while (eat("||")) v = parse_and() || v;
    return v;
  }
  bool parse_and() {
    bool v = parse_unary();
    while (eat("&&")) v = parse_unary() && v;
    return v;
  }
  bool parse_unary() {
    if (eat("!")) return !parse_unary();
    if (eat("(")) {
      const bool v = parse_or();
      if (!eat(")")) throw std::invalid_argument("combination: missing ')'");
      return v;
    }
    skip_ws();
    size_t start = pos_;
    while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    const std::string word = text_.substr(start, pos_ - start);
    if (word == "compute") return v_.compute_ok;
    if (word == "data") return v_.data_ok;
    if (word == "benchmark") return v_.benchmark_ok;
    throw std::invalid_argument("combination: unknown atom '" + word + "'");
  }

  const std::string& text_;
  const RuleVerdicts& v_;
  size_t pos_ = 0;
};

}  // namespace

double benchmark_score(const training::Transcript& transcript, const BenchmarkRule& rule) {
  // Held-out data comes from the same generator family, seeded by the
  // dataset name, so any party can regenerate it.
  training::Hyperparams held = transcript.meta;
  held.seed = fnv1a64(rule.dataset_id);
  held.total_steps = rule.eval_batches;
  held.checkpoint_interval = 1;
  const auto batches = training::generate_data(held);
  double loss = 0.0;
  for (const auto& b : batches) {
    loss += training::batch_loss(transcript.checkpoints.back().weights, transcript.meta, b);
  }
  loss /= static_cast<double>(batches.size());
  return std::exp(-loss);
}

RuleVerdicts evaluate_rules(const training::Transcript& transcript, const RuleSet& rules,
                            std::uint64_t sample_seed) {
  RuleVerdicts v;

  v.measured_flops = transcript.meta.flops_per_step() *
                     static_cast<double>(transcript.meta.total_steps);
  v.compute_ok = v.measured_flops <= rules.max_compute_flops;

  if (rules.data_rule && !transcript.data.empty()) {
    const std::uint64_t n = transcript.data.size();
    const std::uint64_t want = std::min<std::uint64_t>(rules.data_sample_batches, n);
    std::vector<std::uint64_t> idx(n);
    for (std::uint64_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng(sample_seed, "data-rule-sample");
    for (std::uint64_t i = 0; i < want; ++i) {
      const std::uint64_t j = i + rng.next_below(n - i);
      std::swap(idx[i], idx[j]);
    }
    std::uint64_t flagged = 0;
    for (std::uint64_t i = 0; i < want; ++i) {
      if (batch_flagged(transcript.data[idx[i]], *rules.data_rule)) ++flagged;
    }
    v.flagged_fraction = static_cast<double>(flagged) / static_cast<double>(want);
    v.data_ok = v.flagged_fraction <= rules.data_rule->max_fraction;
  }

  if (rules.benchmark_rule && !transcript.checkpoints.empty()) {
    v.benchmark_score = benchmark_score(transcript, *rules.benchmark_rule);
    v.benchmark_ok = v.benchmark_score <= rules.benchmark_rule->max_score;
  }

  if (rules.combination.empty()) {
    v.overall_ok = v.compute_ok && v.data_ok && v.benchmark_ok;
  } else {
    v.overall_ok = CombinationParser(rules.combination, v).parse();
  }
  return v;
}

// ---------------------------------------------------------------------------
// Trusted cluster
// ---------------------------------------------------------------------------

void TrustedCluster::register_commitment(const pott::HashedTranscript& commitment) {
  commitments_.emplace(commitment.commitment_key(), commitment);
}

bool TrustedCluster::has_commitment(const Digest& key) const {
  return commitments_.count(key) > 0;
}

SessionOutput TrustedCluster::run_session(const Digest& commitment_key,
                                          const training::Transcript& reveal,
                                          const pott::VerifyTarget& target,
                                          const std::vector<chip::LogEntry>& chip_log,
                                          const pott::VerificationConfig& config,
                                          const RuleSet& rules,
                                          std::uint64_t rule_sample_seed) const {
  auto it = commitments_.find(commitment_key);
  if (it == commitments_.end()) {
    throw pott::ProtocolError("trusted cluster: reveal offered before its commitment");
  }
  const pott::HashedTranscript& commitment = it->second;

  SessionOutput out;
  // The cluster first re-hashes the reveal; a mismatch ends the session
  // before any replay work.
  const auto rehashed = pott::commit(reveal, {.with_gaps = false, .self_plan = false});
  if (!(rehashed.meta_hash == commitment.meta_hash) ||
      rehashed.batch_hashes != commitment.batch_hashes ||
      rehashed.checkpoint_hashes != commitment.checkpoint_hashes) {
    out.pass = false;
    out.fail_stage = "hash_mismatch";
    return out;
  }

  out.verification = pott::verify(reveal, commitment, target, chip_log, config);
  if (!out.verification.accepted()) {
    out.pass = false;
    out.fail_stage = "verification_reject";
    return out;
  }

  out.rules = evaluate_rules(reveal, rules, rule_sample_seed);
  out.pass = true;
  return out;
}

// ---------------------------------------------------------------------------
// Audit
// ---------------------------------------------------------------------------

std::string to_string(Overall o) {
  switch (o) {
    case Overall::compliant: return "compliant";
    case Overall::violation: return "violation";
    case Overall::non_cooperation: return "non_cooperation";
  }
  return "?";
}

DetectionReport run_audit(const registry::Directory& directory, const std::string& owner,
                          const std::map<std::string, const chip::Chip*>& fleet,
                          const Prover& prover, const sampling::SamplingPlan& plan,
                          const RuleSet& rules, const pott::VerificationConfig& vconfig,
                          const AuditConfig& acfg, Rng& rng) {
  if (acfg.horizon_days <= 0 || acfg.monitoring_days <= 0) {
    throw std::invalid_argument("run_audit: horizon and monitoring period must be positive");
  }
  DetectionReport report;

  TrustedCluster cluster;
  for (const auto& c : prover.commitments()) cluster.register_commitment(c);

  // Round times: the monitoring grid plus a catch-up round at the horizon
  // end when the grid does not divide it.
  std::vector<double> rounds;
  const std::uint64_t full = static_cast<std::uint64_t>(
      std::ceil(acfg.horizon_days / acfg.monitoring_days - 1e-9));
  for (std::uint64_t j = 1; j <= full; ++j) {
    rounds.push_back(acfg.start_day +
                     std::min(static_cast<double>(j) * acfg.monitoring_days, acfg.horizon_days));
  }

  // The plan's sampling effort over this horizon, spread as evenly as the
  // rounds allow.
  const std::uint64_t holdings_size = directory.holdings(owner).size();
  std::uint64_t draws = static_cast<std::uint64_t>(
      std::llround(plan.annual_samples * acfg.horizon_days / 365.0));
  draws = std::min<std::uint64_t>(draws, holdings_size * rounds.size());
  const std::uint64_t base = draws / rounds.size();
  const std::uint64_t extra = draws % rounds.size();

  std::set<Digest> sessioned;  // one session per distinct logged digest

  for (size_t j = 0; j < rounds.size(); ++j) {
    const double t = rounds[j];
    const double window_start = t - acfg.monitoring_days;
    const std::uint64_t samples = base + (j < extra ? 1 : 0);
    if (samples == 0) continue;
    const auto serials = directory.sample_for_inspection(owner, samples, rng);
    for (const auto& serial : serials) {
      report.sampled_serials.push_back(serial);
      auto chip_it = fleet.find(serial);
      if (chip_it == fleet.end()) {
        // Directory says the owner holds it but no chip was produced for
        // inspection: treat like a missing reveal.
        ++report.missing_commitments;
        continue;
      }
      const chip::Chip& chip = *chip_it->second;
      const auto finding = chip::physical_inspect(chip, serial);

      ChipFinding cf;
      cf.serial = serial;
      cf.inspected_day = t;
      cf.serial_match = finding.serial_match;
      cf.tamper_detected = finding.tamper_detected;
      if (finding.tamper_detected || !finding.serial_match) ++report.tampered_chips;

      // The log as the inspector sees it: entries up to now, reviewed for
      // the period under audit.
      std::vector<chip::LogEntry> visible;
      for (const auto& e : finding.log_copy) {
        if (e.wallclock_day <= t) visible.push_back(e);
      }
      std::vector<const chip::LogEntry*> in_window;
      for (const auto& e : visible) {
        if (e.wallclock_day > window_start && e.wallclock_day <= t) in_window.push_back(&e);
      }
      cf.entries_reviewed = in_window.size();
      report.findings.push_back(cf);

      for (const auto* entry : in_window) {
        if (sessioned.count(entry->shard_hash)) continue;
        sessioned.insert(entry->shard_hash);

        SessionRecord rec;
        rec.serial = serial;
        rec.step = entry->step;
        rec.shard_hash = entry->shard_hash;

        const auto reveal = prover.reveal_for(entry->shard_hash);
        if (!reveal || !cluster.has_commitment(reveal->commitment_key)) {
          rec.commitment_present = false;
          ++report.missing_commitments;
          report.sessions.push_back(std::move(rec));
          continue;
        }
        rec.commitment_present = true;
        const std::uint64_t session_seed =
            splitmix64_mix(vconfig.seed ^ fnv1a64(entry->shard_hash.hex()));
        auto session_config = vconfig;
        session_config.seed = session_seed;
        auto output = cluster.run_session(reveal->commitment_key, *reveal->transcript,
                                          reveal->shard, visible, session_config, rules,
                                          session_seed);
        if (!output.pass) {
          ++report.failed_sessions;
        } else if (output.rules && !output.rules->overall_ok) {
          ++report.rule_violations;
        }
        rec.output = std::move(output);
        report.sessions.push_back(std::move(rec));
      }
    }
  }

  if (report.rule_violations > 0 || report.tampered_chips > 0 || report.failed_sessions > 0) {
    report.overall = Overall::violation;
  } else if (report.missing_commitments > 0) {
    report.overall = Overall::non_cooperation;
  } else {
    report.overall = Overall::compliant;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Report schema
// ---------------------------------------------------------------------------

namespace {

nlohmann::json rules_json(const RuleVerdicts& v) {
  return {
      {"compute_ok", v.compute_ok},       {"measured_flops", v.measured_flops},
      {"data_ok", v.data_ok},             {"flagged_fraction", v.flagged_fraction},
      {"benchmark_ok", v.benchmark_ok},   {"benchmark_score", v.benchmark_score},
      {"overall_ok", v.overall_ok},
  };
}

nlohmann::json session_output_json(const SessionOutput& o) {
  nlohmann::json j;
  j["pass"] = o.pass;
  j["fail_stage"] = o.fail_stage;
  nlohmann::json v;
  v["verdict"] = o.verification.verdict == pott::Verdict::accept ? "accept" : "reject";
  v["failed_checks"] = nlohmann::json::array();
  for (const auto& f : o.verification.failed_checks) {
    v["failed_checks"].push_back(
        {{"check_id", f.check_id}, {"index", f.index}, {"measured", f.measured}});
  }
  v["segments_checked"] = o.verification.segments_checked;
  v["segment_distances"] = o.verification.segment_distances;
  v["cost_replay_steps"] = o.verification.cost_replay_steps;
  j["verification"] = v;
  if (o.rules) j["rules"] = rules_json(*o.rules);
  return j;
}

}  // namespace

std::string render_report(const DetectionReport& report) {
  nlohmann::json j;
  j["overall"] = to_string(report.overall);
  j["sampled_serials"] = report.sampled_serials;
  j["missing_commitments"] = report.missing_commitments;
  j["rule_violations"] = report.rule_violations;
  j["tampered_chips"] = report.tampered_chips;
  j["failed_sessions"] = report.failed_sessions;
  j["findings"] = nlohmann::json::array();
  for (const auto& f : report.findings) {
    j["findings"].push_back({{"serial", f.serial},
                             {"inspected_day", f.inspected_day},
                             {"serial_match", f.serial_match},
                             {"tamper_detected", f.tamper_detected},
                             {"entries_reviewed", f.entries_reviewed}});
  }
  j["sessions"] = nlohmann::json::array();
  for (const auto& s : report.sessions) {
    nlohmann::json rec;
    rec["serial"] = s.serial;
    rec["step"] = s.step;
    rec["shard_hash"] = s.shard_hash.hex();
    rec["commitment_present"] = s.commitment_present;
    if (s.output) rec["session"] = session_output_json(*s.output);
    j["sessions"].push_back(rec);
  }
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Confidentiality scan
// ---------------------------------------------------------------------------

namespace {

enum class FieldKind { digest, boolean, count, scalar, scalar_array, token, identifier };

const std::map<std::string, FieldKind>& field_allowlist() {
  static const std::map<std::string, FieldKind> allow = {
      {"overall", FieldKind::token},
      {"sampled_serials", FieldKind::identifier},
      {"missing_commitments", FieldKind::count},
      {"rule_violations", FieldKind::count},
      {"tampered_chips", FieldKind::count},
      {"failed_sessions", FieldKind::count},
      {"findings", FieldKind::token},  // container
      {"sessions", FieldKind::token},  // container
      {"serial", FieldKind::identifier},
      {"inspected_day", FieldKind::scalar},
      {"serial_match", FieldKind::boolean},
      {"tamper_detected", FieldKind::boolean},
      {"entries_reviewed", FieldKind::count},
      {"step", FieldKind::count},
      {"shard_hash", FieldKind::digest},
      {"commitment_present", FieldKind::boolean},
      {"session", FieldKind::token},       // container
      {"pass", FieldKind::boolean},
      {"fail_stage", FieldKind::token},
      {"verification", FieldKind::token},  // container
      {"verdict", FieldKind::token},
      {"failed_checks", FieldKind::token},  // container
      {"check_id", FieldKind::token},
      {"index", FieldKind::count},
      {"measured", FieldKind::scalar},
      {"segments_checked", FieldKind::scalar_array},
      {"segment_distances", FieldKind::scalar_array},
      {"cost_replay_steps", FieldKind::count},
      {"rules", FieldKind::token},  // container
      {"compute_ok", FieldKind::boolean},
      {"measured_flops", FieldKind::scalar},
      {"data_ok", FieldKind::boolean},
      {"flagged_fraction", FieldKind::scalar},
      {"benchmark_ok", FieldKind::boolean},
      {"benchmark_score", FieldKind::scalar},
      {"overall_ok", FieldKind::boolean},
  };
  return allow;
}

bool is_hex_digest(const std::string& s) {
  if (s.size() != 64) return false;
  for (char c : s) {
    if (!std::isxdigit(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

void scan_value(const std::string& key, const nlohmann::json& value,
                std::vector<std::string>& problems);

void scan_object(const nlohmann::json& obj, std::vector<std::string>& problems) {
  for (const auto& [key, value] : obj.items()) {
    const auto& allow = field_allowlist();
    auto it = allow.find(key);
    if (it == allow.end()) {
      problems.push_back("field not in allowlist: " + key);
      continue;
    }
    scan_value(key, value, problems);
  }
}

void scan_value(const std::string& key, const nlohmann::json& value,
                std::vector<std::string>& problems) {
  const auto kind = field_allowlist().at(key);
  if (value.is_object()) {
    scan_object(value, problems);
    return;
  }
  if (value.is_array()) {
    for (const auto& item : value) {
      if (item.is_object()) {
        scan_object(item, problems);
      } else if (item.is_number()) {
        if (kind != FieldKind::scalar_array) {
          problems.push_back("numeric array not allowed for field: " + key);
        } else if (item.is_number_float() && !std::isfinite(item.get<double>())) {
          problems.push_back("non-finite value in field: " + key);
        }
      } else if (item.is_string()) {
        if (kind != FieldKind::identifier && kind != FieldKind::digest) {
          problems.push_back("string array not allowed for field: " + key);
        }
      } else {
        problems.push_back("unexpected array element in field: " + key);
      }
    }
    return;
  }
  switch (kind) {
    case FieldKind::digest:
      if (!value.is_string() || !is_hex_digest(value.get<std::string>())) {
        problems.push_back("field is not a digest: " + key);
      }
      break;
    case FieldKind::boolean:
      if (!value.is_boolean()) problems.push_back("field is not a boolean: " + key);
      break;
    case FieldKind::count:
      if (!value.is_number_unsigned() && !value.is_number_integer()) {
        problems.push_back("field is not a count: " + key);
      }
      break;
    case FieldKind::scalar:
      if (!value.is_number() ||
          (value.is_number_float() && !std::isfinite(value.get<double>()))) {
        problems.push_back("field is not a finite scalar: " + key);
      }
      break;
    case FieldKind::token:
    case FieldKind::identifier:
      if (!value.is_string() || value.get<std::string>().size() > 128) {
        problems.push_back("field is not a short token: " + key);
      }
      break;
    case FieldKind::scalar_array:
      problems.push_back("field must be an array: " + key);
      break;
  }
}

}  // namespace

std::vector<std::string> confidentiality_scan(const std::string& report_json) {
  std::vector<std::string> problems;
  nlohmann::json j = nlohmann::json::parse(report_json);
  if (!j.is_object()) {
    problems.push_back("report is not an object");
    return problems;
  }
  scan_object(j, problems);
  return problems;
}

}  // namespace potv::audit
