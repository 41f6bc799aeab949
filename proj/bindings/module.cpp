// Python bindings: the sampling calculus, the fleet simulator, the toy
// trainer and commit/verify, plus scenario audits. Thin wrappers returning
// plain dicts where a full class adds nothing.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "potv/fleetsim.hpp"
#include "potv/inspection.hpp"
#include "potv/pott.hpp"
#include "potv/sampling.hpp"
#include "potv/scenario.hpp"
#include "potv/training.hpp"

namespace py = pybind11;
using namespace potv;

namespace {

sampling::PolicyParams make_params(double flops, double chips, double chip_flops_per_day,
                                   double snapshot_rate, double detect_prob,
                                   double monitoring_days, double training_days) {
  return sampling::PolicyParams{flops,       chips,           chip_flops_per_day,
                                snapshot_rate, detect_prob,   monitoring_days,
                                training_days};
}

py::dict plan_dict(const sampling::SamplingPlan& plan) {
  py::dict d;
  d["samples_per_period"] = plan.samples_per_period;
  d["samples_per_period_int"] = plan.samples_per_period_int;
  d["annual_samples"] = plan.annual_samples;
  d["snapshot_presence"] = plan.snapshot_presence;
  return d;
}

training::Hyperparams make_meta(std::uint64_t seed, const std::vector<std::uint64_t>& layers,
                                double learning_rate, std::uint64_t batch_size,
                                std::uint64_t total_steps, std::uint64_t checkpoint_interval,
                                const std::string& loss, const std::string& data_gen,
                                const std::string& optimizer) {
  training::Hyperparams m;
  m.seed = seed;
  m.layer_sizes = layers;
  m.learning_rate = learning_rate;
  m.batch_size = batch_size;
  m.total_steps = total_steps;
  m.checkpoint_interval = checkpoint_interval;
  m.loss = training::loss_from_string(loss);
  m.data_gen = training::data_gen_from_string(data_gen);
  m.optimizer = training::optimizer_from_string(optimizer);
  return m;
}

pott::VerificationConfig make_config(double epsilon, std::uint64_t segments,
                                     const std::string& selection, std::uint64_t seed,
                                     bool check_init, bool check_precommitment,
                                     bool check_loss_decrease) {
  pott::VerificationConfig cfg;
  cfg.epsilon = epsilon;
  cfg.segments_to_check = segments;
  cfg.selection = pott::selection_from_string(selection);
  cfg.seed = seed;
  cfg.check_init = check_init;
  cfg.check_precommitment = check_precommitment;
  cfg.check_loss_decrease = check_loss_decrease;
  return cfg;
}

py::dict report_dict(const pott::VerificationReport& r) {
  py::dict d;
  d["verdict"] = r.verdict == pott::Verdict::accept ? "accept" : "reject";
  py::list failed;
  for (const auto& f : r.failed_checks) {
    py::dict fd;
    fd["check_id"] = f.check_id;
    fd["index"] = f.index;
    fd["measured"] = f.measured;
    failed.append(fd);
  }
  d["failed_checks"] = failed;
  d["segments_checked"] = r.segments_checked;
  d["segment_distances"] = r.segment_distances;
  d["cost_replay_steps"] = r.cost_replay_steps;
  return d;
}

// Demo log: one entry per checkpoint, as a cooperating chip would have
// logged for the given shard of the run.
std::vector<chip::LogEntry> demo_log(const training::Transcript& t, std::uint64_t shard_count,
                                     std::uint64_t shard_index) {
  const auto commitment = pott::commit(t);
  const auto pre = pott::precommitment_digest(*commitment.precommit_plan);
  std::vector<chip::LogEntry> log;
  for (const auto& ckpt : t.checkpoints) {
    const auto shard = training::shard_weights(ckpt.weights, shard_count)[shard_index];
    log.push_back({ckpt.step, static_cast<double>(ckpt.step) + 0.5, chip::hash_shard(shard), pre});
  }
  return log;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Toolkit for verifying rules on large-scale ML training runs";

  // ---- sampling calculus ----------------------------------------------
  m.def("chips_required", &sampling::chips_required, py::arg("flops"),
        py::arg("chip_flops_per_day"), py::arg("days"),
        "Minimum chips to run the given FLOPs in the given time.");
  m.def("snapshot_presence_prob", &sampling::snapshot_presence_prob, py::arg("snapshot_rate"),
        py::arg("days"), "Probability a participating chip logged at least one snapshot.");
  m.def(
      "samples_per_period",
      [](double flops, double chips, double chip_flops_per_day, double snapshot_rate,
         double detect_prob, double monitoring_days, double training_days) {
        return plan_dict(sampling::samples_per_period(
            make_params(flops, chips, chip_flops_per_day, snapshot_rate, detect_prob,
                        monitoring_days, training_days)));
      },
      py::arg("flops"), py::arg("chips"), py::arg("chip_flops_per_day"),
      py::arg("snapshot_rate") = 0.1, py::arg("detect_prob") = 0.9,
      py::arg("monitoring_days") = 30.0, py::arg("training_days") = 365.0,
      "Sampling plan detecting the run with the target probability.");
  m.def("detection_prob_stretched", &sampling::detection_prob_stretched, py::arg("stretch_k"),
        py::arg("b"), py::arg("p"));
  m.def(
      "detection_prob_spread",
      [](double t_days, double flops, double chips, double chip_flops_per_day,
         double snapshot_rate, double detect_prob, double monitoring_days, double training_days,
         double samples) {
        return sampling::detection_prob_spread(
            t_days,
            make_params(flops, chips, chip_flops_per_day, snapshot_rate, detect_prob,
                        monitoring_days, training_days),
            samples);
      },
      py::arg("t_days"), py::arg("flops"), py::arg("chips"), py::arg("chip_flops_per_day"),
      py::arg("snapshot_rate"), py::arg("detect_prob"), py::arg("monitoring_days"),
      py::arg("training_days"), py::arg("samples"));
  m.def("lemma_gap", &sampling::lemma_gap, py::arg("g"), py::arg("b"));
  m.def(
      "table1",
      [](const std::string& format) {
        return sampling::render_table1(sampling::table1_reference(), format);
      },
      py::arg("format") = "human", "The published annual-sample table.");
  m.def("table1_cells", [] {
    py::list rows;
    for (const auto& row : sampling::table1_reference().rows) {
      py::dict r;
      r["model"] = row.model;
      r["flops"] = row.training_flops;
      r["h100_days"] = row.h100_days;
      r["chips_one_year"] = row.chips_one_year;
      py::list cells;
      for (const auto& c : row.cells) {
        cells.append(c.feasible ? py::cast(c.annual_samples) : py::none());
      }
      r["annual_samples"] = cells;
      rows.append(r);
    }
    return rows;
  });

  // ---- fleet simulation -----------------------------------------------
  m.def(
      "simulate",
      [](double flops, double chips, double chip_flops_per_day, double snapshot_rate,
         double detect_prob, double monitoring_days, double training_days,
         const std::string& strategy, double strategy_value, std::uint64_t trials,
         std::uint64_t seed, unsigned threads) {
        const auto params = make_params(flops, chips, chip_flops_per_day, snapshot_rate,
                                        detect_prob, monitoring_days, training_days);
        sim::ProverStrategy strat;
        if (strategy == "honest") {
          strat = sim::ProverStrategy::honest();
        } else if (strategy == "stretch") {
          strat = sim::ProverStrategy::stretch(strategy_value);
        } else if (strategy == "spread") {
          strat = sim::ProverStrategy::spread(strategy_value);
        } else {
          throw std::invalid_argument("strategy must be honest | stretch | spread");
        }
        sim::SimConfig cfg;
        cfg.threads = threads;
        const auto out = sim::simulate(params, strat, sampling::samples_per_period(params),
                                       trials, seed, cfg);
        py::dict d;
        d["trials"] = out.trials;
        d["detections"] = out.detections;
        d["empirical_p"] = out.empirical_p;
        d["ci_halfwidth"] = out.ci_halfwidth;
        return d;
      },
      py::arg("flops"), py::arg("chips"), py::arg("chip_flops_per_day"),
      py::arg("snapshot_rate") = 0.1, py::arg("detect_prob") = 0.9,
      py::arg("monitoring_days") = 30.0, py::arg("training_days") = 365.0,
      py::arg("strategy") = "honest", py::arg("strategy_value") = 1.0,
      py::arg("trials") = 100000, py::arg("seed") = 1, py::arg("threads") = 1,
      "Monte Carlo detection probability under the sampling plan.");

  // ---- trainer and verification ---------------------------------------
  py::class_<training::Transcript>(m, "Transcript")
      .def_property_readonly("losses", [](const training::Transcript& t) { return t.losses; })
      .def_property_readonly("total_steps",
                             [](const training::Transcript& t) { return t.meta.total_steps; })
      .def_property_readonly(
          "checkpoint_count",
          [](const training::Transcript& t) { return t.checkpoints.size(); })
      .def_property_readonly(
          "param_count", [](const training::Transcript& t) { return t.meta.param_count(); })
      .def("save", [](const training::Transcript& t, const std::string& dir) {
        training::save_transcript(t, dir);
      });

  m.def(
      "train",
      [](std::uint64_t seed, const std::vector<std::uint64_t>& layers, double learning_rate,
         std::uint64_t batch_size, std::uint64_t total_steps, std::uint64_t checkpoint_interval,
         const std::string& loss, const std::string& data_gen, const std::string& optimizer,
         double noise_sigma) {
        return training::train(make_meta(seed, layers, learning_rate, batch_size, total_steps,
                                         checkpoint_interval, loss, data_gen, optimizer),
                               noise_sigma);
      },
      py::arg("seed"), py::arg("layers") = std::vector<std::uint64_t>{4, 8, 2},
      py::arg("learning_rate") = 0.05, py::arg("batch_size") = 8, py::arg("total_steps") = 200,
      py::arg("checkpoint_interval") = 20, py::arg("loss") = "mse",
      py::arg("data_gen") = "tanh_teacher", py::arg("optimizer") = "sgd",
      py::arg("noise_sigma") = 0.0, "Run the deterministic toy trainer.");
  m.def("load_transcript", &training::load_transcript, py::arg("directory"));
  m.def(
      "calibrate_epsilon",
      [](std::uint64_t seed, const std::vector<std::uint64_t>& layers, double learning_rate,
         std::uint64_t batch_size, std::uint64_t total_steps, std::uint64_t checkpoint_interval,
         const std::string& loss, const std::string& data_gen, const std::string& optimizer,
         double noise_sigma, std::uint64_t runs) {
        return pott::calibrate_epsilon(
            make_meta(seed, layers, learning_rate, batch_size, total_steps, checkpoint_interval,
                      loss, data_gen, optimizer),
            noise_sigma, runs, seed);
      },
      py::arg("seed"), py::arg("layers") = std::vector<std::uint64_t>{4, 8, 2},
      py::arg("learning_rate") = 0.05, py::arg("batch_size") = 8, py::arg("total_steps") = 200,
      py::arg("checkpoint_interval") = 20, py::arg("loss") = "mse",
      py::arg("data_gen") = "tanh_teacher", py::arg("optimizer") = "sgd",
      py::arg("noise_sigma") = 1e-3, py::arg("runs") = 50,
      "Segment tolerance for noisy-mode verification (3x max observed distance).");

  m.def(
      "verify",
      [](const training::Transcript& t, std::uint64_t shard_count, std::uint64_t shard_index,
         double epsilon, std::uint64_t segments, const std::string& selection,
         std::uint64_t seed) {
        const auto commitment = pott::commit(t);
        const auto target =
            training::shard_weights(t.checkpoints.back().weights, shard_count)[shard_index];
        const auto log = demo_log(t, shard_count, shard_index);
        const auto cfg = make_config(
            epsilon > 0 ? epsilon : pott::deterministic_epsilon(t.meta.param_count()), segments,
            selection, seed, true, true, true);
        return report_dict(pott::verify(t, commitment, target, log, cfg));
      },
      py::arg("transcript"), py::arg("shard_count") = 3, py::arg("shard_index") = 0,
      py::arg("epsilon") = 0.0, py::arg("segments") = 0,
      py::arg("selection") = "uniform_random", py::arg("seed") = 1,
      "Commit-and-verify round trip on a transcript (cooperating-chip log).");

  m.def(
      "spoof_suite",
      [](const training::Transcript& t, std::uint64_t shard_count, std::uint64_t shard_index,
         std::uint64_t seed) {
        const auto target =
            training::shard_weights(t.checkpoints.back().weights, shard_count)[shard_index];
        const auto log = demo_log(t, shard_count, shard_index);
        auto cfg = make_config(pott::deterministic_epsilon(t.meta.param_count()), 0, "all",
                               seed, true, true, true);
        const auto suite = pott::spoof_suite(t, target, log, cfg);
        py::list out;
        for (const auto& a : suite.attacks) {
          py::dict d;
          d["attack"] = a.attack_id;
          d["verdict"] = a.verdict == pott::Verdict::reject ? "reject" : "accept";
          d["d1"] = a.distance.batch_edit_distance;
          d["d2"] = a.distance.meta_field_distance;
          d["construction_steps"] = a.construction_steps;
          out.append(d);
        }
        return out;
      },
      py::arg("transcript"), py::arg("shard_count") = 3, py::arg("shard_index") = 0,
      py::arg("seed") = 1, "Run the five canonical spoof attacks against the verifier.");

  // ---- scenario audits --------------------------------------------------
  m.def(
      "run_audit",
      [](const std::string& scenario_path, std::uint64_t world_seed, std::uint64_t audit_seed) {
        const auto cfg = scenario::load_scenario_file(scenario_path);
        const auto world = scenario::build_world(cfg, world_seed);
        const auto report = scenario::run_scenario_audit(world, cfg, audit_seed);
        py::dict d;
        d["overall"] = audit::to_string(report.overall);
        d["sampled"] = report.sampled_serials.size();
        d["sessions"] = report.sessions.size();
        d["missing_commitments"] = report.missing_commitments;
        d["rule_violations"] = report.rule_violations;
        d["report_json"] = audit::render_report(report);
        return d;
      },
      py::arg("scenario_path"), py::arg("world_seed") = 0, py::arg("audit_seed") = 0,
      "Run one end-to-end audit from a scenario file.");
  m.def("confidentiality_scan", &audit::confidentiality_scan, py::arg("report_json"));
}
