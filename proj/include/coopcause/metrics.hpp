#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coopcause/decision.hpp"
#include "coopcause/event_log.hpp"
#include "coopcause/rules.hpp"
#include "coopcause/scenario.hpp"

namespace coopcause {

struct TruthWindow {
  Cause cause = Cause::Incident;
  double start = 0.0;
  double end = 0.0;
  std::vector<bool> affected;

  bool covers(SegmentId s, double t) const {
    return t >= start && t < end && s >= 0 && static_cast<std::size_t>(s) < affected.size() && affected[s];
  }
};

struct GroundTruth {
  std::vector<TruthWindow> windows;
  double horizon = 0.0;
  double threshold_factor = 2.0;

  static GroundTruth from_scenario(const ScenarioConfig& cfg);
};

struct AccuracySample {
  double time = 0.0;
  double fraction = 0.0;

  bool operator==(const AccuracySample&) const = default;
};

using AccuracySeries = std::vector<AccuracySample>;

inline constexpr double kSampleInterval = 60.0;

/// Every 60 s from each event start while it is active: the share of
/// equipped vehicles on affected segments whose latest decision names the
/// true cause. Vehicles that never decided count as wrong.
/// Throws DomainError when no window affects any segment.
AccuracySeries accuracy_series(const EventLog& log, const GroundTruth& truth);

/// Earliest correct decision (cooperative methods) or correct RP (BP) made
/// by a vehicle on an affected segment about an affected segment, ignoring
/// vehicles whose initiation was a false alarm.
std::optional<double> detection_time(const EventLog& log, const GroundTruth& truth);

/// Percentage of initiations that fall outside every truth window and
/// outside measured congestion on the initiator's segment. 0 without any.
double false_alarm_rate(const EventLog& log, const GroundTruth& truth);

/// Nearest-rank percentile over all logged gaps. DomainError without gaps.
double gap_percentile(const EventLog& log, double q);

struct RunMetrics {
  AccuracySeries accuracy;
  std::optional<double> detection_time;
  double false_alarm_pct = 0.0;
  /// NaN when the log holds no gap observation.
  double gap_p85 = 0.0;
  Method method = Method::VP;
  std::string scenario_id;
  std::uint64_t seed = 0;
  double penetration = 1.0;

  double final_accuracy() const { return accuracy.empty() ? 0.0 : accuracy.back().fraction; }
};

RunMetrics compute_metrics(const EventLog& log, const GroundTruth& truth, const ScenarioConfig& cfg,
                           std::uint64_t seed);

struct RunKey {
  Method method = Method::VP;
  double penetration = 1.0;
  std::uint64_t seed = 0;
};

/// Runs every key (in parallel when jobs > 1) and returns metrics in key order.
std::vector<RunMetrics> run_batch(const ScenarioConfig& base, std::span<const RunKey> keys, int jobs);

struct Aggregate {
  std::size_t runs = 0;
  std::size_t undetected = 0;
  double mean_detection = 0.0;
  double sd_detection = 0.0;
  double mean_false_alarm = 0.0;
  double sd_false_alarm = 0.0;
  double mean_final_accuracy = 0.0;
  double sd_final_accuracy = 0.0;
};

/// Means and sample standard deviations; undetected runs count as `horizon`.
Aggregate aggregate(std::span<const RunMetrics> runs, double horizon);

struct SweepTable {
  std::vector<double> rates;
  /// Ordered by (rate, seed).
  std::vector<RunMetrics> rows;
  /// One per rate.
  std::vector<Aggregate> summary;
};

SweepTable penetration_sweep(const ScenarioConfig& scenario, std::span<const double> rates,
                             std::span<const std::uint64_t> seeds, Method method, int jobs);

void write_accuracy_csv(std::ostream& out, std::span<const RunMetrics> runs);
void write_metrics_csv(std::ostream& out, std::span<const RunMetrics> runs);
/// One row per method present in `runs`, in method order.
void write_summary_csv(std::ostream& out, std::span<const RunMetrics> runs, double horizon);
void write_sweep_csv(std::ostream& out, const SweepTable& table);

}  // namespace coopcause
