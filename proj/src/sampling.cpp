#include "potv/sampling.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace potv::sampling {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::domain_error(msg);
}

}  // namespace

void PolicyParams::validate() const {
  require(training_flops > 0, "PolicyParams: training_flops must be > 0");
  require(fleet_chips >= 1, "PolicyParams: fleet_chips must be >= 1");
  require(chip_flops_per_day > 0, "PolicyParams: chip_flops_per_day must be > 0");
  require(snapshot_rate > 0, "PolicyParams: snapshot_rate must be > 0");
  require(detect_prob >= 0 && detect_prob < 1, "PolicyParams: detect_prob must be in [0,1)");
  require(monitoring_days > 0, "PolicyParams: monitoring_days must be > 0");
  require(training_days >= monitoring_days,
          "PolicyParams: training_days must be >= monitoring_days");
  if (chips_required(training_flops, chip_flops_per_day, training_days) > fleet_chips) {
    throw InfeasibleError("PolicyParams: run needs more chips than the fleet contains");
  }
}

double chips_required(double training_flops, double chip_flops_per_day, double t_days) {
  require(training_flops > 0, "chips_required: training_flops must be > 0");
  require(chip_flops_per_day > 0, "chips_required: chip_flops_per_day must be > 0");
  require(t_days > 0, "chips_required: t_days must be > 0");
  return training_flops / (chip_flops_per_day * t_days);
}

double snapshot_presence_prob(double snapshot_rate, double t_days) {
  require(snapshot_rate > 0, "snapshot_presence_prob: snapshot_rate must be > 0");
  require(t_days > 0, "snapshot_presence_prob: t_days must be > 0");
  return -std::expm1(-snapshot_rate * t_days);
}

SamplingPlan samples_per_period(const PolicyParams& params) {
  params.validate();
  SamplingPlan plan;
  plan.snapshot_presence = snapshot_presence_prob(params.snapshot_rate, params.monitoring_days);

  const double involvement =
      chips_required(params.training_flops, params.chip_flops_per_day, params.training_days) /
      params.fleet_chips;
  const double q = involvement * plan.snapshot_presence;
  if (q >= 1.0) {
    throw InfeasibleError("samples_per_period: per-sample odds reach 1; fleet too small");
  }

  if (params.detect_prob == 0.0) {
    plan.samples_per_period = 0.0;
    plan.samples_per_period_int = 0;
    plan.annual_samples = 0.0;
    return plan;
  }

  const double draws_total = std::log1p(-params.detect_prob) / std::log1p(-q);
  plan.samples_per_period = draws_total * params.monitoring_days / params.training_days;
  plan.samples_per_period_int =
      static_cast<std::uint64_t>(std::ceil(plan.samples_per_period - 1e-12));
  plan.annual_samples = draws_total * 365.0 / params.training_days;
  return plan;
}

double detection_prob_stretched(double stretch_k, double b, double p) {
  require(stretch_k >= 1, "detection_prob_stretched: stretch_k must be >= 1");
  require(b > 0, "detection_prob_stretched: b must be > 0");
  if (b >= 1) throw std::domain_error("detection_prob_stretched: b must be < 1");
  require(p > 0 && p < 1, "detection_prob_stretched: p must be in (0,1)");
  const double samples = std::log1p(-p) / std::log1p(-b);
  return -std::expm1(stretch_k * samples * std::log1p(-b / stretch_k));
}

double detection_prob_spread(double t_days, const PolicyParams& params, double samples) {
  require(t_days > 0, "detection_prob_spread: t_days must be > 0");
  require(t_days <= params.monitoring_days,
          "detection_prob_spread: t_days must be <= the monitoring period");
  require(samples >= 0, "detection_prob_spread: samples must be >= 0");
  const double chips = chips_required(params.training_flops, params.chip_flops_per_day, t_days);
  if (chips > params.fleet_chips) {
    throw InfeasibleError("detection_prob_spread: run does not fit on the fleet at this t");
  }
  const double q = (chips / params.fleet_chips) *
                   snapshot_presence_prob(params.snapshot_rate, t_days);
  return -std::expm1(samples * std::log1p(-q));
}

double lemma_gap(double g, double b) {
  require(g >= 1, "lemma_gap: g must be >= 1");
  require(b > 0 && b < 1, "lemma_gap: b must be in (0,1)");
  return g * (1.0 - std::pow(b, 1.0 / g)) - (1.0 - b);
}

Table1 table1(const std::vector<std::pair<std::string, double>>& models,
              const std::vector<double>& fleet_sizes, double chip_flops_per_day,
              double snapshot_rate, double monitoring_days, double detect_prob,
              double training_days) {
  Table1 table;
  table.fleet_sizes = fleet_sizes;
  for (const auto& [name, flops] : models) {
    Table1Row row;
    row.model = name;
    row.training_flops = flops;
    row.h100_days = flops / chip_flops_per_day;
    row.chips_one_year = chips_required(flops, chip_flops_per_day, 365.0);
    for (double fleet : fleet_sizes) {
      Table1Cell cell;
      PolicyParams params{flops,          fleet,       chip_flops_per_day, snapshot_rate,
                          detect_prob,    monitoring_days, training_days};
      try {
        cell.annual_samples = samples_per_period(params).annual_samples;
        cell.feasible = true;
      } catch (const InfeasibleError&) {
        cell.feasible = false;
      }
      row.cells.push_back(cell);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

Table1 table1_reference() {
  const std::vector<std::pair<std::string, double>> models = {
      {"GPT-3", 3.14e23},           {"Chinchilla", 5.76e23},
      {"PaLM", 2.56e24},            {"Chinchilla-280B", 9.9e24},
      {"Chinchilla-1T", 1.27e26},   {"Chinchilla-10T", 1.3e28},
  };
  return table1(models, {1e3, 1e5, 1e7}, 1e15 * 86400.0, 0.1, 30.0, 0.9, 365.0);
}

std::string format_count(double value) {
  const double c = std::ceil(value - 1e-9);
  char buf[32];
  if (c < 1000.0) {
    std::snprintf(buf, sizeof buf, "%.0f", c);
  } else {
    std::snprintf(buf, sizeof buf, "%.3g", c);
  }
  return buf;
}

namespace {

std::string format_sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace

std::string render_table1(const Table1& table, const std::string& format) {
  std::ostringstream out;
  const bool csv = format == "csv";
  if (csv) {
    out << "model,H,H100_days,chips_1yr";
    for (double fleet : table.fleet_sizes) out << ",samples_per_yr_C" << format_sci(fleet);
    out << "\n";
    for (const auto& row : table.rows) {
      char h100[32];
      std::snprintf(h100, sizeof h100, "%.6g", row.h100_days);
      out << row.model << ',' << format_sci(row.training_flops) << ',' << h100 << ','
          << static_cast<long long>(std::ceil(row.chips_one_year - 1e-9));
      for (const auto& cell : row.cells) {
        out << ',';
        if (cell.feasible) out << static_cast<long long>(std::ceil(cell.annual_samples - 1e-9));
      }
      out << "\n";
    }
  } else {
    char line[256];
    out << "Annual chip samples to catch a run with p=0.9 (f=0.1/day, 30-day period)\n";
    std::snprintf(line, sizeof line, "%-16s %10s %10s %10s", "model", "H", "H100-days",
                  "chips/1yr");
    out << line;
    for (double fleet : table.fleet_sizes) {
      std::snprintf(line, sizeof line, " %12s", ("C=" + format_sci(fleet)).c_str());
      out << line;
    }
    out << "\n";
    for (const auto& row : table.rows) {
      std::snprintf(line, sizeof line, "%-16s %10s %10s %10s", row.model.c_str(),
                    format_sci(row.training_flops).c_str(), format_count(row.h100_days).c_str(),
                    format_count(row.chips_one_year).c_str());
      out << line;
      for (const auto& cell : row.cells) {
        std::snprintf(line, sizeof line, " %12s",
                      cell.feasible ? format_count(cell.annual_samples).c_str() : "---");
        out << line;
      }
      out << "\n";
    }
  }
  return out.str();
}

}  // namespace potv::sampling
