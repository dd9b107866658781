#include <cmath>
#include <sstream>
#include <string>

#include "coopcause/error.hpp"
#include "coopcause/metrics.hpp"
#include "coopcause/simulator.hpp"
#include "doctest.h"

using namespace coopcause;

namespace {

constexpr Cause I = Cause::Incident;
constexpr Cause We = Cause::Weather;

// Hand-built logs: a 6-segment network with free-flow speed 10 m/s.
class LogBuilder {
 public:
  explicit LogBuilder(std::string method = "VP") {
    LogRecord note;
    note.aux = log_.add_note("scenario=test;method=" + method + ";seed=0;penetration=1;horizon=500");
    log_.add(note);
    for (int s = 0; s < 6; ++s) {
      LogRecord r;
      r.segment = static_cast<std::int16_t>(s);
      r.a = 200.0f;
      r.b = 10.0f;
      log_.add(r);
    }
  }

  LogBuilder& beacon(double t, VehicleId v, SegmentId s, float speed = 10.0f, float gap = kNoValue) {
    LogRecord r = base(t, v, s, RecordKind::BeaconStats);
    r.a = 1.0f;
    r.b = speed;
    r.c = gap;
    r.aux = 0;
    log_.add(r);
    return *this;
  }

  LogBuilder& decision(double t, VehicleId v, SegmentId about, Cause c, SegmentId at) {
    LogRecord r = base(t, v, about, RecordKind::Decision);
    r.cause = cause_code(c);
    r.a = 0.9f;
    r.aux = at;
    r.c = 3.0f;
    log_.add(r);
    return *this;
  }

  LogBuilder& initiate(double t, VehicleId v, SegmentId s, Cause c = I) {
    LogRecord r = base(t, v, s, RecordKind::Initiate);
    r.cause = cause_code(c);
    log_.add(r);
    return *this;
  }

  LogBuilder& rp(double t, VehicleId v, SegmentId about, Cause c, SegmentId at) {
    LogRecord r = base(t, v, about, RecordKind::Rp);
    r.cause = cause_code(c);
    r.aux = v;
    r.a = static_cast<float>(t - 480);
    r.b = static_cast<float>(at);
    log_.add(r);
    return *this;
  }

  const EventLog& log() const { return log_; }

 private:
  static LogRecord base(double t, VehicleId v, SegmentId s, RecordKind k) {
    LogRecord r;
    r.time = t;
    r.vehicle = v;
    r.segment = static_cast<std::int16_t>(s);
    r.kind = k;
    return r;
  }

  EventLog log_;
};

// Incident on segments 2..3 during [100, 400).
GroundTruth incident_truth() {
  GroundTruth g;
  g.horizon = 500;
  g.windows.push_back({I, 100, 400, {false, false, true, true, false, false}});
  return g;
}

ScenarioConfig bundled(const std::string& name) { return load_scenario(resolve_scenario(name)); }

}  // namespace

TEST_CASE("gap percentile is nearest-rank") {
  LogBuilder b;
  for (int g = 1; g <= 100; ++g) b.beacon(1.0 * g, 1, 0, 10.0f, static_cast<float>(101 - g));
  CHECK(gap_percentile(b.log(), 85) == doctest::Approx(85));
  CHECK(gap_percentile(b.log(), 100) == doctest::Approx(100));
  CHECK(gap_percentile(b.log(), 1) == doctest::Approx(1));

  LogBuilder flat;
  for (int i = 0; i < 7; ++i) flat.beacon(i, 1, 0, 10.0f, 10.0f);
  flat.beacon(8, 1, 0);
  CHECK(gap_percentile(flat.log(), 85) == doctest::Approx(10));

  CHECK_THROWS_AS(gap_percentile(LogBuilder().log(), 85), DomainError);
  CHECK_THROWS_AS(gap_percentile(flat.log(), 0), ConfigError);
  CHECK_THROWS_AS(gap_percentile(flat.log(), 101), ConfigError);
}

TEST_CASE("accuracy: nobody decides") {
  LogBuilder b;
  for (double t = 100; t < 400; t += 20) b.beacon(t, 1, 2).beacon(t, 2, 3);
  const auto s = accuracy_series(b.log(), incident_truth());
  REQUIRE(s.size() == 5);
  for (std::size_t k = 0; k < s.size(); ++k) {
    CHECK(s[k].time == doctest::Approx(100 + 60.0 * k));
    CHECK(s[k].fraction == 0.0);
  }
}

TEST_CASE("accuracy steps to 1 at the sample after everyone decides") {
  LogBuilder b;
  for (double t = 100; t < 400; t += 20) {
    if (t == 200) b.decision(t, 1, 2, I, 2).decision(t, 2, 2, I, 3);
    b.beacon(t, 1, 2).beacon(t, 2, 3).beacon(t, 3, 5);
  }
  const auto s = accuracy_series(b.log(), incident_truth());
  REQUIRE(s.size() == 5);
  CHECK(s[0].fraction == 0.0);
  CHECK(s[1].fraction == 0.0);
  CHECK(s[2].fraction == 1.0);
  CHECK(s[4].fraction == 1.0);
}

TEST_CASE("accuracy counts the latest decision and ignores unaffected vehicles") {
  LogBuilder b;
  b.decision(90, 1, 2, I, 2).decision(90, 2, 2, I, 2).decision(90, 3, 2, We, 5);
  b.beacon(100, 1, 2).beacon(100, 2, 3).beacon(100, 3, 5);
  b.decision(150, 2, 2, We, 3);
  b.beacon(160, 1, 2).beacon(160, 2, 3).beacon(160, 3, 5);
  const auto s = accuracy_series(b.log(), incident_truth());
  REQUIRE(s.size() >= 2);
  CHECK(s[0].fraction == 1.0);
  CHECK(s[1].fraction == 0.5);
  // no beacon round near the later samples
  CHECK(s[2].fraction == 0.0);
}

TEST_CASE("accuracy needs an affected segment") {
  GroundTruth g;
  g.horizon = 100;
  g.windows.push_back({I, 0, 50, std::vector<bool>(6, false)});
  CHECK_THROWS_AS(accuracy_series(LogBuilder().log(), g), DomainError);
  CHECK_THROWS_AS(accuracy_series(LogBuilder().log(), GroundTruth{}), DomainError);
}

TEST_CASE("detection time") {
  SUBCASE("never") {
    LogBuilder b;
    b.beacon(120, 1, 2);
    CHECK_FALSE(detection_time(b.log(), incident_truth()).has_value());
  }
  SUBCASE("first correct decision on an affected segment") {
    LogBuilder b;
    b.decision(90, 1, 2, I, 2);    // before the event
    b.decision(150, 1, 2, We, 2);  // wrong cause
    b.decision(160, 1, 5, I, 5);   // unaffected segment
    b.decision(170, 1, 2, I, 5);   // decider not on an affected segment
    b.decision(250, 1, 3, I, 2);
    CHECK(detection_time(b.log(), incident_truth()) == doctest::Approx(250));
  }
  SUBCASE("false-alarm initiators are excluded") {
    LogBuilder b;
    b.initiate(50, 7, 2);
    b.decision(200, 7, 2, I, 2);
    b.decision(230, 8, 2, I, 2);
    CHECK(detection_time(b.log(), incident_truth()) == doctest::Approx(230));
  }
  SUBCASE("BP counts RP, not decisions") {
    LogBuilder b("BP");
    b.decision(150, 1, 2, I, 2);
    b.rp(300, 2, 2, I, 3);
    CHECK(detection_time(b.log(), incident_truth()) == doctest::Approx(300));
  }
}

TEST_CASE("false alarm percentage") {
  CHECK(false_alarm_rate(LogBuilder().log(), incident_truth()) == 0.0);

  LogBuilder b;
  for (int v = 0; v < 95; ++v) b.initiate(150 + v, v, 2);
  for (int v = 95; v < 100; ++v) b.initiate(250 + v, v, 5);
  CHECK(false_alarm_rate(b.log(), incident_truth()) == doctest::Approx(5.0));

  // Outside the truth window but on a measurably slow segment.
  LogBuilder slow;
  for (double t = 400; t < 460; t += 1) slow.beacon(t, 1, 5, 2.0f);
  slow.initiate(460, 1, 5).initiate(461, 2, 4);
  CHECK(false_alarm_rate(slow.log(), incident_truth()) == doctest::Approx(50.0));
}

TEST_CASE("aggregate uses sample deviation and censors undetected runs") {
  std::vector<RunMetrics> runs(3);
  runs[0].detection_time = 100;
  runs[1].detection_time = 200;
  runs[0].false_alarm_pct = 10;
  runs[0].accuracy = {{0, 0.5}, {60, 1.0}};
  runs[1].accuracy = {{0, 0.5}};
  const Aggregate a = aggregate(runs, 300);
  CHECK(a.runs == 3);
  CHECK(a.undetected == 1);
  CHECK(a.mean_detection == doctest::Approx(200));
  CHECK(a.sd_detection == doctest::Approx(100));
  CHECK(a.mean_false_alarm == doctest::Approx(10.0 / 3));
  CHECK(a.mean_final_accuracy == doctest::Approx(0.5));
}

TEST_CASE("summary with BP only has zero improvement") {
  std::vector<RunMetrics> runs(2);
  for (auto& r : runs) {
    r.method = Method::BP;
    r.scenario_id = "x";
    r.accuracy = {{0, 0.4}};
  }
  std::ostringstream out;
  write_summary_csv(out, runs, 100);
  std::istringstream in(out.str());
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header.starts_with("method,scenario,mean-detection-time,mean-false-alarm-pct,mean-final-accuracy,"
                           "improvement-vs-BP-pct"));
  CHECK(row.starts_with("BP,x,100.0000,0.0000,0.4000,0.0000,"));
}

TEST_CASE("metrics on a real run stay in bounds") {
  for (Method m : kAllMethods) {
    auto cfg = bundled("incident_1.1");
    cfg.method.method = m;
    const EventLog log = run(cfg, 1);
    const GroundTruth truth = GroundTruth::from_scenario(cfg);
    const RunMetrics r = compute_metrics(log, truth, cfg, 1);
    CAPTURE(to_string(m));
    for (const auto& s : r.accuracy) {
      CHECK(s.fraction >= 0.0);
      CHECK(s.fraction <= 1.0);
    }
    CHECK(r.false_alarm_pct >= 0.0);
    CHECK(r.false_alarm_pct <= 100.0);
    if (r.detection_time) {
      CHECK(*r.detection_time >= cfg.events[0].start);
      CHECK(*r.detection_time <= cfg.horizon);
    }
    const RunMetrics again = compute_metrics(log, truth, cfg, 1);
    CHECK(again.accuracy == r.accuracy);
    CHECK(again.detection_time == r.detection_time);
  }
}

TEST_CASE("noise-free incident: every method ends accurate") {
  auto cfg = bundled("incident_1.1");
  for (std::size_t r = 0; r < kCauseCount; ++r) {
    for (std::size_t c = 0; c < kCauseCount; ++c) cfg.classifier.confusion[r][c] = r == c ? 1.0 : 0.0;
  }
  cfg.classifier.spurious_rate = 0.0;
  std::vector<RunKey> keys;
  for (Method m : kAllMethods) keys.push_back({m, 1.0, 0});
  for (const auto& r : run_batch(cfg, keys, 1)) {
    CAPTURE(to_string(r.method));
    CHECK(r.final_accuracy() >= 0.9);
  }
}

TEST_CASE("beta gate delays detection by about beta") {
  const auto cfg = bundled("incident_1.1");
  const std::vector<RunKey> keys{{Method::DAT, 1.0, 0}, {Method::BetaDAT, 1.0, 0}};
  const auto r = run_batch(cfg, keys, 1);
  REQUIRE(r[0].detection_time);
  REQUIRE(r[1].detection_time);
  const double delay = *r[1].detection_time - *r[0].detection_time;
  CHECK(delay >= cfg.method.beta.beta - 60);
  CHECK(delay <= cfg.method.beta.beta + 60);
}

TEST_CASE("penetration sweep") {
  auto cfg = bundled("incident_1.1");
  cfg.horizon = 1200;
  const std::vector<std::uint64_t> seeds{4};

  SUBCASE("single rate equals a direct run") {
    const std::vector<double> rates{1.0};
    const SweepTable t = penetration_sweep(cfg, rates, seeds, Method::VP, 1);
    REQUIRE(t.rows.size() == 1);
    auto direct_cfg = cfg;
    direct_cfg.method.method = Method::VP;
    const RunMetrics direct = compute_metrics(run(direct_cfg, 4), GroundTruth::from_scenario(cfg), direct_cfg, 4);
    CHECK(t.rows[0].accuracy == direct.accuracy);
    CHECK(t.rows[0].detection_time == direct.detection_time);
    CHECK(t.summary[0].mean_final_accuracy == doctest::Approx(direct.final_accuracy()));
  }
  SUBCASE("rate zero decides nothing") {
    const std::vector<double> rates{0.0};
    const SweepTable t = penetration_sweep(cfg, rates, seeds, Method::BF, 1);
    for (const auto& s : t.rows[0].accuracy) CHECK(s.fraction == 0.0);
    CHECK_FALSE(t.rows[0].detection_time.has_value());
  }
  SUBCASE("rate out of range") {
    const std::vector<double> rates{1.2};
    CHECK_THROWS_WITH_AS(penetration_sweep(cfg, rates, seeds, Method::BF, 1),
                         doctest::Contains("penetration out of range"), ConfigError);
  }
}

TEST_CASE("batch results do not depend on the number of workers") {
  auto cfg = bundled("incident_1.1");
  cfg.horizon = 900;
  std::vector<RunKey> keys;
  for (Method m : {Method::BP, Method::DAT}) {
    for (std::uint64_t s = 0; s < 3; ++s) keys.push_back({m, 0.75, s});
  }
  const auto serial = run_batch(cfg, keys, 1);
  const auto parallel = run_batch(cfg, keys, 4);
  std::ostringstream a, b;
  write_metrics_csv(a, serial);
  write_metrics_csv(b, parallel);
  write_accuracy_csv(a, serial);
  write_accuracy_csv(b, parallel);
  CHECK(a.str() == b.str());
}
