#include "coopcause/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>

#include "coopcause/error.hpp"
#include "coopcause/simulator.hpp"
#include "coopcause/surrogate.hpp"
#include "coopcause/text.hpp"

namespace coopcause {

GroundTruth GroundTruth::from_scenario(const ScenarioConfig& cfg) {
  GroundTruth g;
  g.horizon = cfg.horizon;
  g.threshold_factor = cfg.classifier.threshold_factor;
  const RoadNetwork net = cfg.network.build();
  for (const auto& e : cfg.events) {
    TruthWindow w{e.kind, e.start, std::min(e.end(), cfg.horizon), std::vector<bool>(net.size(), false)};
    for (SegmentId s : affected_segments(e, net)) w.affected[s] = true;
    g.windows.push_back(std::move(w));
  }
  return g;
}

namespace {

bool any_affected(const GroundTruth& truth) {
  for (const auto& w : truth.windows) {
    if (std::find(w.affected.begin(), w.affected.end(), true) != w.affected.end()) return true;
  }
  return false;
}

bool in_truth(const GroundTruth& truth, SegmentId s, double t) {
  return std::any_of(truth.windows.begin(), truth.windows.end(), [&](const auto& w) { return w.covers(s, t); });
}

std::optional<Method> logged_method(const EventLog& log) {
  for (const auto& r : log.records()) {
    if (r.kind != RecordKind::Setup || r.segment >= 0) continue;
    for (auto field : text::split(log.note(r.aux), ';')) {
      if (field.starts_with("method=")) return parse_method(field.substr(7));
    }
  }
  return std::nullopt;
}

// Trailing 60 s mean beacon speed per segment, kept in 10 s bins.
class MeasuredCongestion {
 public:
  MeasuredCongestion(const EventLog& log, double factor) : factor_(factor) {
    for (const auto& r : log.records()) {
      if (r.kind == RecordKind::Setup && r.segment >= 0) {
        if (free_flow_.size() <= static_cast<std::size_t>(r.segment)) free_flow_.resize(r.segment + 1, 0.0);
        free_flow_[r.segment] = r.b;
      } else if (r.kind == RecordKind::BeaconStats && r.segment >= 0) {
        auto& bins = bins_[r.segment];
        const auto bin = static_cast<std::int64_t>(std::floor(r.time / kBin));
        auto& [sum, count] = bins[bin];
        sum += r.b;
        ++count;
      }
    }
  }

  bool congested(SegmentId s, double t) const {
    if (s < 0 || static_cast<std::size_t>(s) >= free_flow_.size()) return false;
    const auto it = bins_.find(s);
    if (it == bins_.end()) return false;
    const auto last = static_cast<std::int64_t>(std::floor(t / kBin));
    double sum = 0.0;
    std::size_t count = 0;
    for (auto b = it->second.lower_bound(last - kBins + 1); b != it->second.end() && b->first <= last; ++b) {
      sum += b->second.first;
      count += b->second.second;
    }
    return count > 0 && sum / static_cast<double>(count) < free_flow_[s] / factor_;
  }

 private:
  static constexpr double kBin = 10.0;
  static constexpr std::int64_t kBins = 6;
  double factor_;
  std::vector<double> free_flow_;
  std::map<SegmentId, std::map<std::int64_t, std::pair<double, std::size_t>>> bins_;
};

std::set<VehicleId> false_alarm_initiators(const EventLog& log, const GroundTruth& truth,
                                           const MeasuredCongestion& measured) {
  std::set<VehicleId> out;
  for (const auto& r : log.records()) {
    if (r.kind != RecordKind::Initiate) continue;
    if (!in_truth(truth, r.segment, r.time) && !measured.congested(r.segment, r.time)) out.insert(r.vehicle);
  }
  return out;
}

}  // namespace

AccuracySeries accuracy_series(const EventLog& log, const GroundTruth& truth) {
  if (!any_affected(truth)) throw DomainError("ground truth has no affected segment");
  std::vector<double> times;
  for (const auto& w : truth.windows) {
    for (double t = w.start; t < w.end - 1e-9 && t <= truth.horizon; t += kSampleInterval) times.push_back(t);
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());

  AccuracySeries out;
  std::vector<std::int8_t> latest;
  const auto& recs = log.records();
  std::size_t i = 0;
  const auto apply = [&](const LogRecord& r) {
    if (r.kind != RecordKind::Decision || r.vehicle < 0) return;
    if (latest.size() <= static_cast<std::size_t>(r.vehicle)) latest.resize(r.vehicle + 1, -1);
    latest[r.vehicle] = r.cause;
  };
  for (double t : times) {
    // sample tick: the first beacon round at or after t
    while (i < recs.size() && !(recs[i].kind == RecordKind::BeaconStats && recs[i].time >= t - 1e-6)) apply(recs[i++]);
    if (i == recs.size() || recs[i].time - t > 1.0) {
      out.push_back({t, 0.0});
      continue;
    }
    const double tick = recs[i].time;
    std::vector<std::pair<VehicleId, SegmentId>> present;
    while (i < recs.size() && recs[i].time <= tick) {
      if (recs[i].kind == RecordKind::BeaconStats) present.emplace_back(recs[i].vehicle, recs[i].segment);
      apply(recs[i++]);
    }
    std::size_t denominator = 0;
    std::size_t correct = 0;
    for (const auto& [v, s] : present) {
      bool counted = false;
      bool right = false;
      for (const auto& w : truth.windows) {
        if (!w.covers(s, t)) continue;
        counted = true;
        const bool has = static_cast<std::size_t>(v) < latest.size() && latest[v] >= 0;
        right = right || (has && latest[v] == cause_code(w.cause));
      }
      denominator += counted ? 1 : 0;
      correct += right ? 1 : 0;
    }
    out.push_back({t, denominator == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(denominator)});
  }
  return out;
}

std::optional<double> detection_time(const EventLog& log, const GroundTruth& truth) {
  const MeasuredCongestion measured(log, truth.threshold_factor);
  const auto excluded = false_alarm_initiators(log, truth, measured);
  const auto method = logged_method(log);
  const bool bp = method ? *method == Method::BP : log.count(RecordKind::Rp) > 0;
  for (const auto& r : log.records()) {
    if (excluded.contains(r.vehicle)) continue;
    SegmentId at = kNoSegment;
    if (bp && r.kind == RecordKind::Rp) {
      at = std::isnan(r.b) ? kNoSegment : static_cast<SegmentId>(r.b);
    } else if (!bp && r.kind == RecordKind::Decision) {
      at = r.aux;
    } else {
      continue;
    }
    for (const auto& w : truth.windows) {
      if (r.cause == cause_code(w.cause) && w.covers(r.segment, r.time) && w.covers(at, r.time)) return r.time;
    }
  }
  return std::nullopt;
}

double false_alarm_rate(const EventLog& log, const GroundTruth& truth) {
  const MeasuredCongestion measured(log, truth.threshold_factor);
  std::size_t total = 0;
  std::size_t false_alarms = 0;
  for (const auto& r : log.records()) {
    if (r.kind != RecordKind::Initiate) continue;
    ++total;
    if (!in_truth(truth, r.segment, r.time) && !measured.congested(r.segment, r.time)) ++false_alarms;
  }
  return total == 0 ? 0.0 : 100.0 * static_cast<double>(false_alarms) / static_cast<double>(total);
}

double gap_percentile(const EventLog& log, double q) {
  if (!(q > 0.0 && q <= 100.0)) throw ConfigError("percentile must lie in (0, 100]");
  std::vector<float> gaps;
  for (const auto& r : log.records()) {
    if (r.kind == RecordKind::BeaconStats && !std::isnan(r.c)) gaps.push_back(r.c);
  }
  if (gaps.empty()) throw DomainError("no gap observations in the log");
  const auto rank = static_cast<std::size_t>(std::ceil(q / 100.0 * static_cast<double>(gaps.size()) - 1e-9));
  const std::size_t k = std::clamp<std::size_t>(rank, 1, gaps.size()) - 1;
  std::nth_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(k), gaps.end());
  return gaps[k];
}

RunMetrics compute_metrics(const EventLog& log, const GroundTruth& truth, const ScenarioConfig& cfg,
                           std::uint64_t seed) {
  RunMetrics m;
  m.method = cfg.method.method;
  m.scenario_id = cfg.id;
  m.seed = seed;
  m.penetration = cfg.comms.penetration;
  if (any_affected(truth)) {
    m.accuracy = accuracy_series(log, truth);
    m.detection_time = detection_time(log, truth);
  }
  m.false_alarm_pct = false_alarm_rate(log, truth);
  try {
    m.gap_p85 = gap_percentile(log, 85.0);
  } catch (const DomainError&) {
    m.gap_p85 = std::nan("");
  }
  return m;
}

std::vector<RunMetrics> run_batch(const ScenarioConfig& base, std::span<const RunKey> keys, int jobs) {
  std::optional<RuleBook> book;
  for (const auto& k : keys) {
    if (k.method == Method::DAT || k.method == Method::BetaDAT) {
      book = scenario_rulebook(base.classifier);
      break;
    }
  }
  const GroundTruth truth = GroundTruth::from_scenario(base);
  std::vector<RunMetrics> out(keys.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= keys.size()) return;
      try {
        ScenarioConfig cfg = base;
        cfg.method.method = keys[i].method;
        cfg.comms.penetration = keys[i].penetration;
        const EventLog log = run(cfg, keys[i].seed, book ? *book : RuleBook{});
        out[i] = compute_metrics(log, truth, cfg, keys[i].seed);
      } catch (...) {
        const std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = keys.size();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(keys.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

namespace {

std::pair<double, double> mean_sd(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

std::string num(double v) { return text::format_fixed(v, 4); }

}  // namespace

Aggregate aggregate(std::span<const RunMetrics> runs, double horizon) {
  Aggregate a;
  a.runs = runs.size();
  std::vector<double> det, fa, acc;
  for (const auto& r : runs) {
    det.push_back(r.detection_time.value_or(horizon));
    a.undetected += r.detection_time ? 0 : 1;
    fa.push_back(r.false_alarm_pct);
    acc.push_back(r.final_accuracy());
  }
  std::tie(a.mean_detection, a.sd_detection) = mean_sd(det);
  std::tie(a.mean_false_alarm, a.sd_false_alarm) = mean_sd(fa);
  std::tie(a.mean_final_accuracy, a.sd_final_accuracy) = mean_sd(acc);
  return a;
}

SweepTable penetration_sweep(const ScenarioConfig& scenario, std::span<const double> rates,
                             std::span<const std::uint64_t> seeds, Method method, int jobs) {
  SweepTable table;
  std::vector<RunKey> keys;
  for (double rate : rates) {
    if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("penetration out of range: " + text::format_double(rate));
    table.rates.push_back(rate);
    for (std::uint64_t seed : seeds) keys.push_back({method, rate, seed});
  }
  table.rows = run_batch(scenario, keys, jobs);
  for (std::size_t i = 0; i < rates.size(); ++i) {
    const std::span<const RunMetrics> block(table.rows.data() + i * seeds.size(), seeds.size());
    table.summary.push_back(aggregate(block, scenario.horizon));
  }
  return table;
}

void write_accuracy_csv(std::ostream& out, std::span<const RunMetrics> runs) {
  out << "time,method,scenario,seed,fraction\n";
  for (const auto& r : runs) {
    for (const auto& s : r.accuracy) {
      out << text::format_double(s.time) << ',' << to_string(r.method) << ',' << text::csv_field(r.scenario_id) << ','
          << r.seed << ',' << num(s.fraction) << '\n';
    }
  }
}

void write_metrics_csv(std::ostream& out, std::span<const RunMetrics> runs) {
  out << "method,scenario,seed,penetration,detection-time,false-alarm-pct,final-accuracy,gap-p85\n";
  for (const auto& r : runs) {
    out << to_string(r.method) << ',' << text::csv_field(r.scenario_id) << ',' << r.seed << ','
        << text::format_double(r.penetration) << ',' << (r.detection_time ? num(*r.detection_time) : "") << ','
        << num(r.false_alarm_pct) << ',' << num(r.final_accuracy()) << ',' << num(r.gap_p85) << '\n';
  }
}

void write_summary_csv(std::ostream& out, std::span<const RunMetrics> runs, double horizon) {
  out << "method,scenario,mean-detection-time,mean-false-alarm-pct,mean-final-accuracy,improvement-vs-BP-pct,"
         "sd-detection-time,sd-false-alarm-pct,sd-final-accuracy,runs,undetected\n";
  std::map<Method, std::vector<RunMetrics>> by_method;
  for (const auto& r : runs) by_method[r.method].push_back(r);
  std::optional<double> bp_accuracy;
  if (by_method.contains(Method::BP)) bp_accuracy = aggregate(by_method[Method::BP], horizon).mean_final_accuracy;
  for (const auto& [method, group] : by_method) {
    const Aggregate a = aggregate(group, horizon);
    std::string improvement;
    if (bp_accuracy && *bp_accuracy > 0.0) {
      improvement = num(100.0 * (a.mean_final_accuracy - *bp_accuracy) / *bp_accuracy);
    } else if (bp_accuracy && method == Method::BP) {
      improvement = num(0.0);
    }
    out << to_string(method) << ',' << text::csv_field(group.front().scenario_id) << ',' << num(a.mean_detection)
        << ',' << num(a.mean_false_alarm) << ',' << num(a.mean_final_accuracy) << ',' << improvement << ','
        << num(a.sd_detection) << ',' << num(a.sd_false_alarm) << ',' << num(a.sd_final_accuracy) << ',' << a.runs
        << ',' << a.undetected << '\n';
  }
}

void write_sweep_csv(std::ostream& out, const SweepTable& table) {
  out << "rate,seed,detection-time,false-alarm-pct,final-accuracy,gap-p85\n";
  const std::size_t per_rate = table.rates.empty() ? 0 : table.rows.size() / table.rates.size();
  for (std::size_t i = 0; i < table.rates.size(); ++i) {
    const std::string rate = text::format_double(table.rates[i]);
    for (std::size_t j = 0; j < per_rate; ++j) {
      const auto& r = table.rows[i * per_rate + j];
      out << rate << ',' << r.seed << ',' << (r.detection_time ? num(*r.detection_time) : "") << ','
          << num(r.false_alarm_pct) << ',' << num(r.final_accuracy()) << ',' << num(r.gap_p85) << '\n';
    }
    const Aggregate& a = table.summary[i];
    out << rate << ",mean," << num(a.mean_detection) << ',' << num(a.mean_false_alarm) << ','
        << num(a.mean_final_accuracy) << ",\n";
    out << rate << ",stddev," << num(a.sd_detection) << ',' << num(a.sd_false_alarm) << ','
        << num(a.sd_final_accuracy) << ",\n";
  }
}

}  // namespace coopcause
