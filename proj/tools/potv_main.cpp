// potv -- command-line front end: sampling plans, the sample-count table,
// fleet simulation, toy training, commit/verify, the spoof suite, the chip
// directory and end-to-end audits.
//
// Exit codes: 0 success, 1 adverse verdict (reject / violation /
// non-cooperation / accepted spoof), 2 usage or configuration errors.
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "potv/fleetsim.hpp"
#include "potv/inspection.hpp"
#include "potv/pott.hpp"
#include "potv/registry.hpp"
#include "potv/sampling.hpp"
#include "potv/scenario.hpp"
#include "potv/training.hpp"

namespace {

using namespace potv;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

std::vector<std::uint64_t> parse_u64_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  for (double v : parse_double_list(text)) out.push_back(static_cast<std::uint64_t>(v));
  return out;
}

nlohmann::json shard_to_json(const chip::WeightShard& s) {
  return {{"shard_index", s.shard_index},
          {"begin", s.begin},
          {"end", s.end},
          {"values", s.values}};
}

chip::WeightShard shard_from_json(const nlohmann::json& j) {
  chip::WeightShard s;
  s.shard_index = j.at("shard_index").get<std::uint64_t>();
  s.begin = j.at("begin").get<std::uint64_t>();
  s.end = j.at("end").get<std::uint64_t>();
  s.values = j.at("values").get<std::vector<float>>();
  return s;
}

sim::ProverStrategy parse_strategy(const std::string& text) {
  if (text == "honest") return sim::ProverStrategy::honest();
  if (text.rfind("stretch:", 0) == 0) {
    return sim::ProverStrategy::stretch(std::stod(text.substr(8)));
  }
  if (text.rfind("spread:", 0) == 0) {
    return sim::ProverStrategy::spread(std::stod(text.substr(7)));
  }
  if (text.rfind("collude:", 0) == 0) {
    return sim::ProverStrategy::collusion(parse_double_list(text.substr(8)));
  }
  throw CLI::ValidationError("--strategy",
                             "expected honest | stretch:K | spread:T | collude:f1,f2,...");
}

struct PolicyFlags {
  sampling::PolicyParams params;
  void attach(CLI::App* cmd) {
    cmd->add_option("--flops,-H", params.training_flops, "training-run FLOPs")->required();
    cmd->add_option("--chips,-C", params.fleet_chips, "fleet size in chips")->required();
    cmd->add_option("--chip-flops-per-day,-a", params.chip_flops_per_day,
                    "per-chip throughput, FLOPs/day")
        ->required();
    cmd->add_option("--snapshot-rate,-f", params.snapshot_rate,
                    "expected snapshots per chip-day")
        ->default_val(0.1);
    cmd->add_option("--detect-prob,-p", params.detect_prob, "target detection probability")
        ->default_val(0.9);
    cmd->add_option("--monitoring-days", params.monitoring_days, "days between sampling rounds")
        ->default_val(30.0);
    cmd->add_option("--training-days", params.training_days, "days the run spans")
        ->default_val(365.0);
  }
};

int run_cli(int argc, char** argv) {
  CLI::App app{"potv: verify rules on large-scale ML training runs"};
  app.require_subcommand(1);
  std::string format = "human";
  app.add_option("--format", format, "output format: human | csv")
      ->check(CLI::IsMember({"human", "csv"}));
  int exit_code = 0;

  // ---- plan ----------------------------------------------------------
  auto* plan_cmd = app.add_subcommand("plan", "samples per period for one scenario");
  auto plan_flags = std::make_shared<PolicyFlags>();
  plan_flags->attach(plan_cmd);
  plan_cmd->callback([&format, plan_flags] {
    const auto plan = sampling::samples_per_period(plan_flags->params);
    if (format == "csv") {
      std::cout << "samples_per_period,samples_per_period_int,annual_samples,snapshot_presence\n"
                << plan.samples_per_period << ',' << plan.samples_per_period_int << ','
                << plan.annual_samples << ',' << plan.snapshot_presence << "\n";
    } else {
      std::printf("samples per %.4g-day period: %.4f (round up: %llu)\n",
                  plan_flags->params.monitoring_days, plan.samples_per_period,
                  static_cast<unsigned long long>(plan.samples_per_period_int));
      std::printf("annual samples:              %.4f (round up: %s)\n", plan.annual_samples,
                  sampling::format_count(plan.annual_samples).c_str());
      std::printf("snapshot presence per chip:  %.6f\n", plan.snapshot_presence);
    }
  });

  // ---- table1 --------------------------------------------------------
  auto* table_cmd = app.add_subcommand("table1", "annual-sample table for the reference models");
  table_cmd->callback(
      [&format] { std::cout << sampling::render_table1(sampling::table1_reference(), format); });

  // ---- simulate ------------------------------------------------------
  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo check of a sampling plan");
  auto sim_flags = std::make_shared<PolicyFlags>();
  sim_flags->attach(sim_cmd);
  auto strategy_text = std::make_shared<std::string>("honest");
  auto trials = std::make_shared<std::uint64_t>(100000);
  auto seed = std::make_shared<std::uint64_t>(1);
  auto threads = std::make_shared<unsigned>(1);
  auto count_mode = std::make_shared<std::string>("phase_window");
  sim_cmd->add_option("--strategy", *strategy_text,
                      "honest | stretch:K | spread:T | collude:f1,f2,...");
  sim_cmd->add_option("--trials", *trials, "Monte Carlo trials");
  sim_cmd->add_option("--seed", *seed, "simulation seed");
  sim_cmd->add_option("--threads", *threads, "worker threads (any count is deterministic)");
  sim_cmd->add_option("--count-mode", *count_mode, "phase_window | any_snapshot")
      ->check(CLI::IsMember({"phase_window", "any_snapshot"}));
  sim_cmd->callback([&format, &exit_code, sim_flags, strategy_text, trials, seed, threads,
                     count_mode] {
    (void)exit_code;
    const auto plan = sampling::samples_per_period(sim_flags->params);
    sim::SimConfig cfg;
    cfg.threads = *threads;
    cfg.count_mode = *count_mode == "any_snapshot" ? sim::CountMode::any_snapshot
                                                   : sim::CountMode::phase_window;
    const auto out = sim::simulate(sim_flags->params, parse_strategy(*strategy_text), plan,
                                   *trials, *seed, cfg);
    if (format == "csv") {
      std::cout << "trials,detections,empirical_p,ci_halfwidth,target_p\n"
                << out.trials << ',' << out.detections << ',' << out.empirical_p << ','
                << out.ci_halfwidth << ',' << sim_flags->params.detect_prob << "\n";
    } else {
      std::printf("trials:      %llu\n", static_cast<unsigned long long>(out.trials));
      std::printf("detections:  %llu\n", static_cast<unsigned long long>(out.detections));
      std::printf("empirical p: %.5f  (3-sigma half-width %.5f, plan target %.3f)\n",
                  out.empirical_p, out.ci_halfwidth, sim_flags->params.detect_prob);
    }
  });

  // ---- sweep ---------------------------------------------------------
  auto* sweep_cmd = app.add_subcommand("sweep", "stretch-strategy study over a (b, k) grid");
  auto b_grid = std::make_shared<std::string>(
      "0.01,0.02,0.03,0.04,0.05,0.06,0.07,0.08,0.09,0.10,"
      "0.11,0.12,0.13,0.14,0.15,0.16,0.17,0.18,0.19,0.20");
  auto k_grid = std::make_shared<std::string>("1,2,5,10,20,50,100");
  auto sweep_p = std::make_shared<double>(0.9);
  auto sweep_trials = std::make_shared<std::uint64_t>(0);
  auto sweep_fleet = std::make_shared<double>(1000.0);
  auto sweep_seed = std::make_shared<std::uint64_t>(1);
  sweep_cmd->add_option("--b-grid", *b_grid, "comma-separated fleet fractions");
  sweep_cmd->add_option("--k-grid", *k_grid, "comma-separated stretch factors");
  sweep_cmd->add_option("--detect-prob,-p", *sweep_p, "plan target probability");
  sweep_cmd->add_option("--trials", *sweep_trials, "trials per point (0 = closed form only)");
  sweep_cmd->add_option("--chips,-C", *sweep_fleet, "fleet size for empirical points");
  sweep_cmd->add_option("--seed", *sweep_seed, "simulation seed");
  sweep_cmd->callback([&format, b_grid, k_grid, sweep_p, sweep_trials, sweep_fleet, sweep_seed] {
    const auto points = sim::sweep(parse_double_list(*b_grid), parse_double_list(*k_grid),
                                   *sweep_p, *sweep_trials, *sweep_fleet, *sweep_seed, {});
    std::cout << sim::render_sweep(points, format);
  });

  // ---- train ---------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "run the toy trainer, save a transcript");
  struct TrainArgs {
    training::Hyperparams meta;
    std::string layers = "4,8,2";
    std::string loss = "mse";
    std::string data_gen = "tanh_teacher";
    std::string optimizer = "sgd";
    double noise = 0.0;
    std::string out;
    std::string demo_log;
    std::string demo_target;
    std::uint64_t demo_shards = 3;
    std::uint64_t demo_shard_index = 0;
  };
  auto ta = std::make_shared<TrainArgs>();
  train_cmd->add_option("--seed", ta->meta.seed, "run seed")->required();
  train_cmd->add_option("--layers", ta->layers, "layer sizes, e.g. 4,8,2");
  train_cmd->add_option("--learning-rate", ta->meta.learning_rate, "SGD step size");
  train_cmd->add_option("--batch-size", ta->meta.batch_size, "rows per batch");
  train_cmd->add_option("--steps", ta->meta.total_steps, "optimizer steps")->required();
  train_cmd->add_option("--checkpoint-interval,-k", ta->meta.checkpoint_interval,
                        "steps between checkpoints");
  train_cmd->add_option("--loss", ta->loss, "mse | cross_entropy");
  train_cmd->add_option("--data-gen", ta->data_gen, "tanh_teacher | argmax_teacher");
  train_cmd->add_option("--optimizer", ta->optimizer, "sgd | sgd_momentum");
  train_cmd->add_option("--noise", ta->noise, "gradient noise scale (models nondeterminism)");
  train_cmd->add_option("--out", ta->out, "transcript output directory")->required();
  train_cmd->add_option("--demo-chip-log", ta->demo_log,
                        "also write a chip log with one entry per checkpoint");
  train_cmd->add_option("--demo-target", ta->demo_target,
                        "also write the final checkpoint's shard as a verify target");
  train_cmd->add_option("--demo-shards", ta->demo_shards, "shard count for the demo log");
  train_cmd->add_option("--demo-shard-index", ta->demo_shard_index, "which shard to log");
  train_cmd->callback([ta] {
    ta->meta.layer_sizes = parse_u64_list(ta->layers);
    ta->meta.loss = training::loss_from_string(ta->loss);
    ta->meta.data_gen = training::data_gen_from_string(ta->data_gen);
    ta->meta.optimizer = training::optimizer_from_string(ta->optimizer);
    const auto t = training::train(ta->meta, ta->noise);
    training::save_transcript(t, ta->out);
    std::printf("transcript: %s (%llu checkpoints, final loss %.6f)\n", ta->out.c_str(),
                static_cast<unsigned long long>(t.checkpoints.size()), t.losses.back());
    if (!ta->demo_log.empty() || !ta->demo_target.empty()) {
      const auto commitment = pott::commit(t);
      const auto pre = pott::precommitment_digest(*commitment.precommit_plan);
      std::vector<chip::LogEntry> log;
      for (const auto& ckpt : t.checkpoints) {
        const auto shard =
            training::shard_weights(ckpt.weights, ta->demo_shards)[ta->demo_shard_index];
        log.push_back(
            {ckpt.step, static_cast<double>(ckpt.step) + 0.5, chip::hash_shard(shard), pre});
      }
      if (!ta->demo_log.empty()) write_file(ta->demo_log, chip::render_log(log));
      if (!ta->demo_target.empty()) {
        const auto shard = training::shard_weights(t.checkpoints.back().weights,
                                                   ta->demo_shards)[ta->demo_shard_index];
        write_file(ta->demo_target, shard_to_json(shard).dump(2) + "\n");
      }
    }
  });

  // ---- commit --------------------------------------------------------
  auto* commit_cmd = app.add_subcommand("commit", "hash a transcript into a commitment");
  auto commit_dir = std::make_shared<std::string>();
  auto commit_out = std::make_shared<std::string>();
  auto commit_gaps = std::make_shared<bool>(false);
  commit_cmd->add_option("--transcript", *commit_dir, "transcript directory")->required();
  commit_cmd->add_option("--out", *commit_out, "commitment file")->required();
  commit_cmd->add_flag("--gaps", *commit_gaps, "record adjacent-checkpoint distances");
  commit_cmd->callback([commit_dir, commit_out, commit_gaps] {
    const auto t = training::load_transcript(*commit_dir);
    const auto c = pott::commit(t, {.with_gaps = *commit_gaps, .self_plan = true});
    write_file(*commit_out, pott::render_commitment(c));
    std::printf("commitment: %s (%llu batches, %llu checkpoints)\n", commit_out->c_str(),
                static_cast<unsigned long long>(c.batch_hashes.size()),
                static_cast<unsigned long long>(c.checkpoint_hashes.size()));
  });

  // ---- verify --------------------------------------------------------
  auto* verify_cmd = app.add_subcommand("verify", "verify a revealed transcript");
  struct VerifyArgs {
    std::string transcript, commitment, chip_log, target, out;
    pott::VerificationConfig config;
    std::string selection = "uniform_random";
    double epsilon = 0.0;
  };
  auto va = std::make_shared<VerifyArgs>();
  verify_cmd->add_option("--transcript", va->transcript, "transcript directory")->required();
  verify_cmd->add_option("--commitment", va->commitment, "commitment file")->required();
  verify_cmd->add_option("--chip-log", va->chip_log, "chip log file")->required();
  verify_cmd->add_option("--target", va->target, "target shard file (json)")->required();
  verify_cmd->add_option("--epsilon", va->epsilon,
                         "segment L2 tolerance (default: deterministic-mode value)");
  verify_cmd->add_option("--segments", va->config.segments_to_check,
                         "segments to replay (0 = 10% rule)");
  verify_cmd->add_option("--selection", va->selection, "uniform_random | largest_jump | all");
  verify_cmd->add_option("--seed", va->config.seed, "segment selection seed");
  verify_cmd->add_flag("!--no-init-check", va->config.check_init, "skip init regeneration");
  verify_cmd->add_flag("!--no-precommitment", va->config.check_precommitment,
                       "skip precommitment linkage");
  verify_cmd->add_flag("!--no-loss-check", va->config.check_loss_decrease,
                       "skip the loss-decrease heuristic");
  verify_cmd->add_option("--out", va->out, "write the report here (default stdout)");
  verify_cmd->callback([&exit_code, va] {
    const auto t = training::load_transcript(va->transcript);
    const auto c = pott::parse_commitment(read_file(va->commitment));
    const auto target = shard_from_json(nlohmann::json::parse(read_file(va->target)));
    std::istringstream log_in(read_file(va->chip_log));
    const auto log = chip::parse_log(log_in);
    va->config.selection = pott::selection_from_string(va->selection);
    va->config.epsilon =
        va->epsilon > 0 ? va->epsilon : pott::deterministic_epsilon(t.meta.param_count());
    const auto report = pott::verify(t, c, target, log, va->config);
    const auto text = pott::render_report(report);
    if (va->out.empty()) {
      std::cout << text;
    } else {
      write_file(va->out, text);
    }
    if (!report.accepted()) exit_code = 1;
  });

  // ---- attack --------------------------------------------------------
  auto* attack_cmd = app.add_subcommand("attack", "run the spoof suite against a transcript");
  auto at_transcript = std::make_shared<std::string>();
  auto at_log = std::make_shared<std::string>();
  auto at_target = std::make_shared<std::string>();
  auto at_seed = std::make_shared<std::uint64_t>(1);
  attack_cmd->add_option("--transcript", *at_transcript, "honest transcript dir")->required();
  attack_cmd->add_option("--chip-log", *at_log, "honest chip log")->required();
  attack_cmd->add_option("--target", *at_target, "target shard file")->required();
  attack_cmd->add_option("--seed", *at_seed, "suite seed");
  attack_cmd->callback([&format, &exit_code, at_transcript, at_log, at_target, at_seed] {
    const auto t = training::load_transcript(*at_transcript);
    std::istringstream log_in(read_file(*at_log));
    const auto log = chip::parse_log(log_in);
    const auto target = shard_from_json(nlohmann::json::parse(read_file(*at_target)));
    pott::VerificationConfig cfg;
    cfg.epsilon = pott::deterministic_epsilon(t.meta.param_count());
    cfg.selection = pott::Selection::all;
    cfg.seed = *at_seed;
    const auto suite = pott::spoof_suite(t, target, log, cfg);
    if (format == "csv") {
      std::cout << "attack,verdict,first_failed_check,d1,d2,construction_steps\n";
      for (const auto& a : suite.attacks) {
        std::cout << a.attack_id << ','
                  << (a.verdict == pott::Verdict::reject ? "reject" : "accept") << ','
                  << (a.failed_checks.empty() ? "" : a.failed_checks.front().check_id) << ','
                  << a.distance.batch_edit_distance << ',' << a.distance.meta_field_distance
                  << ',' << a.construction_steps << "\n";
      }
    } else {
      for (const auto& a : suite.attacks) {
        std::printf("%-20s %-7s d1=%llu d2=%llu F=%llu%s%s\n", a.attack_id.c_str(),
                    a.verdict == pott::Verdict::reject ? "reject" : "ACCEPT",
                    static_cast<unsigned long long>(a.distance.batch_edit_distance),
                    static_cast<unsigned long long>(a.distance.meta_field_distance),
                    static_cast<unsigned long long>(a.construction_steps),
                    a.failed_checks.empty() ? "" : "  caught by: ",
                    a.failed_checks.empty() ? "" : a.failed_checks.front().check_id.c_str());
      }
      std::printf("rejected %llu / %llu\n", static_cast<unsigned long long>(suite.rejected),
                  static_cast<unsigned long long>(suite.attacks.size()));
    }
    if (suite.rejected != suite.attacks.size()) exit_code = 1;
  });

  // ---- registry ------------------------------------------------------
  auto* reg_cmd = app.add_subcommand("registry", "chip-owner directory operations");
  reg_cmd->require_subcommand(1);
  auto reg_log = std::make_shared<std::string>();
  reg_cmd->add_option("--log", *reg_log, "event-log file (json lines)")->required();

  auto* rec_cmd = reg_cmd->add_subcommand("record", "append one custody event");
  struct RecArgs {
    std::string serial, holder, event, counterparty, note;
    double day = 0;
  };
  auto ra = std::make_shared<RecArgs>();
  rec_cmd->add_option("--serial", ra->serial)->required();
  rec_cmd->add_option("--holder", ra->holder);
  rec_cmd->add_option("--event", ra->event,
                      "fabricated | transferred | damaged | destroyed | inspected")
      ->required();
  rec_cmd->add_option("--day", ra->day)->required();
  rec_cmd->add_option("--counterparty", ra->counterparty, "sender acknowledgment for transfers");
  rec_cmd->add_option("--note", ra->note, "justification for damaged");
  rec_cmd->callback([reg_log, ra] {
    std::vector<registry::CustodyEvent> events;
    if (std::ifstream in(*reg_log); in) events = registry::parse_log(in);
    auto dir = registry::Directory::replay(events);
    const registry::CustodyEvent e{ra->serial, ra->holder,
                                   registry::event_kind_from_string(ra->event), ra->day,
                                   ra->counterparty, ra->note};
    dir.record(e);
    std::ofstream out(*reg_log, std::ios::app);
    if (!out) throw std::runtime_error("cannot append to " + *reg_log);
    out << registry::render_event(e) << "\n";
    std::printf("recorded %s for %s\n", ra->event.c_str(), ra->serial.c_str());
  });

  auto* hold_cmd = reg_cmd->add_subcommand("holdings", "list an owner's live chips");
  auto hold_owner = std::make_shared<std::string>();
  hold_cmd->add_option("--owner", *hold_owner)->required();
  hold_cmd->callback([reg_log, hold_owner] {
    std::ifstream in(*reg_log);
    if (!in) throw std::runtime_error("cannot read " + *reg_log);
    const auto dir = registry::Directory::replay(registry::parse_log(in));
    for (const auto& s : dir.holdings(*hold_owner)) std::cout << s << "\n";
  });

  auto* samp_cmd = reg_cmd->add_subcommand("sample", "draw a seeded inspection sample");
  auto samp_owner = std::make_shared<std::string>();
  auto samp_count = std::make_shared<std::uint64_t>(1);
  auto samp_seed = std::make_shared<std::uint64_t>(1);
  samp_cmd->add_option("--owner", *samp_owner)->required();
  samp_cmd->add_option("--count", *samp_count)->required();
  samp_cmd->add_option("--seed", *samp_seed);
  samp_cmd->callback([reg_log, samp_owner, samp_count, samp_seed] {
    std::ifstream in(*reg_log);
    if (!in) throw std::runtime_error("cannot read " + *reg_log);
    const auto dir = registry::Directory::replay(registry::parse_log(in));
    Rng rng(*samp_seed, "inspection-sample");
    for (const auto& s : dir.sample_for_inspection(*samp_owner, *samp_count, rng)) {
      std::cout << s << "\n";
    }
  });

  // ---- audit ---------------------------------------------------------
  auto* audit_cmd = app.add_subcommand("audit", "run a scenario-file audit end to end");
  auto audit_file = std::make_shared<std::string>();
  auto audit_out = std::make_shared<std::string>();
  auto audit_world_seed = std::make_shared<std::uint64_t>(0);
  auto audit_seed = std::make_shared<std::uint64_t>(0);
  auto audit_scan = std::make_shared<bool>(false);
  audit_cmd->add_option("--scenario", *audit_file, "scenario json file")->required();
  audit_cmd->add_option("--out", *audit_out, "write the report here (default stdout)");
  audit_cmd->add_option("--world-seed", *audit_world_seed, "override the world seed");
  audit_cmd->add_option("--seed", *audit_seed, "override the audit sampling seed");
  audit_cmd->add_flag("--scan", *audit_scan, "also run the confidentiality schema scan");
  audit_cmd->callback([&exit_code, audit_file, audit_out, audit_world_seed, audit_seed,
                       audit_scan] {
    const auto cfg = scenario::load_scenario_file(*audit_file);
    const auto world = scenario::build_world(cfg, *audit_world_seed);
    const auto report = scenario::run_scenario_audit(world, cfg, *audit_seed);
    const auto text = audit::render_report(report);
    if (audit_out->empty()) {
      std::cout << text;
    } else {
      write_file(*audit_out, text);
      std::printf("verdict: %s (report: %s)\n", audit::to_string(report.overall).c_str(),
                  audit_out->c_str());
    }
    if (*audit_scan) {
      const auto problems = audit::confidentiality_scan(text);
      for (const auto& p : problems) std::fprintf(stderr, "confidentiality: %s\n", p.c_str());
      if (!problems.empty()) exit_code = 1;
    }
    if (report.overall != audit::Overall::compliant) exit_code = 1;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
