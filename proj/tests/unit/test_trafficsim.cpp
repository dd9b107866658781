#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "coopcause/error.hpp"
#include "coopcause/metrics.hpp"
#include "coopcause/simulator.hpp"
#include "coopcause/surrogate.hpp"
#include "doctest.h"

using namespace coopcause;

namespace {

constexpr Cause I = Cause::Incident;
constexpr Cause We = Cause::Weather;
constexpr Cause SE = Cause::SpecialEvent;

ScenarioConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_scenario(in);
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

// Ten 200 m segments, nothing happening, classifier noise off.
ScenarioConfig quiet(double demand, double horizon = 300.0) {
  ScenarioConfig cfg;
  cfg.id = "quiet";
  cfg.horizon = horizon;
  cfg.network.segments = 10;
  cfg.demand = demand;
  cfg.classifier.spurious_rate = 0.0;
  cfg.method.method = Method::VP;
  return cfg;
}

ScenarioConfig bundled(const std::string& name) { return load_scenario(resolve_scenario(name)); }

std::string csv(const EventLog& log) {
  std::ostringstream out;
  write_event_log_csv(out, log);
  return out.str();
}

ClassifierSpec identity_classifier() {
  ClassifierSpec spec = ClassifierSpec::defaults();
  for (std::size_t r = 0; r < kConfusionRows; ++r) {
    for (std::size_t c = 0; c < kCauseCount; ++c) spec.confusion[r][c] = r == c ? 1.0 : 0.0;
  }
  spec.confusion[kCauseCount].fill(0.2);
  return spec;
}

}  // namespace

TEST_CASE("corridor and grid adjacency") {
  const auto c = RoadNetwork::corridor(4, 200, 13.9);
  CHECK(c.size() == 4);
  CHECK(c.entries() == std::vector<SegmentId>{0});
  CHECK(c.route_from(0) == std::vector<SegmentId>{0, 1, 2, 3});
  CHECK(c.leads_to(1, 3));
  CHECK_FALSE(c.leads_to(3, 1));
  CHECK(c.leads_to(2, 2));
  CHECK(c.adjacent(1) == std::vector<SegmentId>{0, 2});
  CHECK(c.is_adjacent_or_same(2, 2));
  CHECK_FALSE(c.is_adjacent_or_same(0, 2));
  CHECK(c.segment(2).free_flow_time() == doctest::Approx(200 / 13.9));
  CHECK(c.distance_to(2, {450, 30}) == doctest::Approx(30));
  CHECK(c.distance_to(0, {-40, 0}) == doctest::Approx(40));

  const auto g = RoadNetwork::grid(3, 4, 100, 10);
  CHECK(g.size() == 12);
  CHECK(g.entries() == std::vector<SegmentId>{0, 4, 8});
  CHECK(g.segment(5).lateral == std::vector<SegmentId>{1, 9});
  CHECK(g.adjacent(5) == std::vector<SegmentId>{1, 4, 6, 9});
  CHECK_FALSE(g.leads_to(1, 5));
  CHECK(g.position(6, 50).x == doctest::Approx(250));
  CHECK(g.position(6, 50).y == doctest::Approx(100));
  g.validate();
}

TEST_CASE("bundled incident scenario") {
  const auto cfg = bundled("incident_1.1");
  CHECK(cfg.id == "incident_1.1");
  REQUIRE(cfg.events.size() == 1);
  CHECK(cfg.events[0].kind == I);
  CHECK(cfg.events[0].position == LanePosition::Beginning);
  CHECK(cfg.network.segments == 10);
  CHECK(cfg.comms.range == 300);
  CHECK(cfg.comms.beacon_interval == doctest::Approx(0.1));
}

TEST_CASE("every bundled scenario loads") {
  std::vector<std::string> names;
  for (int i = 1; i <= 7; ++i) names.push_back("incident_1." + std::to_string(i));
  for (int i = 1; i <= 8; ++i) names.push_back("workzone_2." + std::to_string(i));
  names.push_back("weather_3.1");
  for (int i = 1; i <= 4; ++i) names.push_back("special_event_4." + std::to_string(i));
  for (const auto& n : names) {
    CAPTURE(n);
    const auto cfg = bundled(n);
    CHECK(cfg.id == n);
    CHECK(cfg.events.size() == 1);
  }
  CHECK(bundled("special_event_4.1").events[0].ingress_rate < bundled("special_event_4.4").events[0].ingress_rate);
}

TEST_CASE("scenario validation errors") {
  const std::string bad_row = "[classifier]\nrow.Wo = 0.1 0.5 0.1 0.1 0.1\n";
  CHECK(error_of(bad_row).find("row 2 sums to 0.9") != std::string::npos);
  CHECK(error_of("[comms]\npenetration = 1.5\n").find("penetration out of range") != std::string::npos);
  CHECK(error_of("[comms]\nbeacon_interval = 0\n") != "");
  CHECK(error_of("horizon = 100\n[network]\nsegments = x\n").find("line 3") != std::string::npos);
  CHECK(error_of("[events]\nevent = meteor segment=1 start=0 duration=5\n").find("line 2") != std::string::npos);
  CHECK(error_of("[events]\nevent = incident segment=1 start=0 duration=0\n") != "");
  CHECK(error_of("[nowhere]\n") != "");
  CHECK_THROWS_AS(load_scenario("/nonexistent/file.scn"), ConfigError);
}

TEST_CASE("excessive congestion threshold") {
  CHECK(detect_excessive_congestion(150, 60, 2.0));
  CHECK_FALSE(detect_excessive_congestion(119, 60, 2.0));
  CHECK_FALSE(detect_excessive_congestion(120, 60, 2.0));
}

TEST_CASE("surrogate: identity confusion reports the truth on top") {
  const auto spec = identity_classifier();
  RandomStream rng(5);
  for (int i = 0; i < 1000; ++i) CHECK(classify_surrogate(We, spec, rng).argmax() == We);
}

TEST_CASE("surrogate: incident vehicles rank SE second") {
  const auto spec = ClassifierSpec::defaults();
  RandomStream rng(11);
  int correct = 0, se_second = 0;
  for (int i = 0; i < 4000; ++i) {
    const auto [top, second] = classify_surrogate(I, spec, rng).top_two();
    if (top != I) continue;
    ++correct;
    se_second += second == SE ? 1 : 0;
  }
  REQUIRE(correct > 1000);
  CHECK(static_cast<double>(se_second) / correct >= 0.9);

  RandomStream rng2(12);
  const auto identity = identity_classifier();
  int hits = 0;
  for (int i = 0; i < 2000; ++i) hits += classify_surrogate(I, identity, rng2).top_two().second == SE ? 1 : 0;
  CHECK(hits / 2000.0 >= 0.9);
}

TEST_CASE("surrogate: well-formed and deterministic") {
  const auto spec = ClassifierSpec::defaults();
  for (std::uint64_t s = 0; s < 300; ++s) {
    RandomStream a(s, StreamPurpose::Classifier, 3), b(s, StreamPurpose::Classifier, 3);
    const std::optional<Cause> truth = s % 6 == 5 ? std::nullopt : std::optional<Cause>(cause_at(s % 6));
    const auto va = classify_surrogate(truth, spec, a);
    CHECK(va == classify_surrogate(truth, spec, b));
    const auto [top, second] = va.top_two();
    double sum = 0.0;
    for (Cause c : kAllCauses) {
      sum += va[c];
      if (c != top) CHECK(va[c] < va[top]);
      if (c != top && c != second) CHECK(va[c] < va[second]);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("default rulebook carries correction rules") {
  const RuleBook book = scenario_rulebook(ClassifierSpec::defaults());
  CHECK(book.contains(CauseSet::of(I, SE), CauseSet::of(I)));
  CHECK(book.contains(CauseSet::of(We, SE), CauseSet::of(We)));
}

TEST_CASE("broadcast reaches equipped vehicles within range") {
  World w(quiet(0.0), 1);
  const VehicleId a = w.place_vehicle(0, 10, true);
  const VehicleId b = w.place_vehicle(0, 110, true);
  const VehicleId c = w.place_vehicle(2, 110, true);
  const VehicleId d = w.place_vehicle(0, 150, false);
  CHECK(w.broadcast(a) == std::vector<VehicleId>{b});
  CHECK(w.broadcast(b) == std::vector<VehicleId>{a});
  // 400 m from b
  CHECK(w.broadcast(c).empty());
  const VehicleId e = w.place_vehicle(1, 150, true);
  CHECK(w.broadcast(c) == std::vector<VehicleId>{e});
  CHECK(w.broadcast(e) == std::vector<VehicleId>{b, c});
  CHECK_THROWS_AS(w.broadcast(d), DomainError);
}

TEST_CASE("broadcast receiver count is binomial in the penetration") {
  // Receivers over in-range vehicles, pooled over 100 seeds, should match 0.5.
  std::size_t in_range = 0, received = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    ScenarioConfig cfg = quiet(0.4, 200);
    cfg.comms.penetration = 0.5;
    World w(cfg, seed);
    while (!w.finished()) w.step();
    const auto& vs = w.vehicles();
    const VehicleId sender = [&] {
      for (const auto& v : vs) {
        if (v.on_network && v.equipped) return v.id;
      }
      return kNoVehicle;
    }();
    if (sender == kNoVehicle) continue;
    const Point p = w.network().position(vs[sender].segment(), vs[sender].offset);
    for (const auto& v : vs) {
      if (!v.on_network || v.id == sender) continue;
      in_range += distance(p, w.network().position(v.segment(), v.offset)) <= 300.0 ? 1 : 0;
    }
    const auto got = w.broadcast(sender);
    for (VehicleId r : got) CHECK(vs[r].equipped);
    received += got.size();
  }
  REQUIRE(in_range > 400);
  const double share = static_cast<double>(received) / static_cast<double>(in_range);
  const double se = std::sqrt(0.25 / static_cast<double>(in_range));
  CHECK(std::abs(share - 0.5) < 4 * se);
}

TEST_CASE("zero demand logs only setup") {
  const EventLog log = run(quiet(0.0, 60), 3);
  REQUIRE(log.size() > 0);
  for (const auto& r : log.records()) CHECK(r.kind == RecordKind::Setup);
  CHECK(log.count(RecordKind::Setup) == 11);
}

TEST_CASE("free flow without events: no detections") {
  const EventLog log = run(quiet(0.05, 600), 4);
  CHECK(log.count(RecordKind::Arrival) > 10);
  CHECK(log.count(RecordKind::CongestionDetected) == 0);
  for (const auto& r : log.records()) {
    if (r.kind == RecordKind::Departure) CHECK(r.a == doctest::Approx(2000 / 13.9).epsilon(0.02));
  }
}

TEST_CASE("run is deterministic") {
  auto cfg = bundled("incident_1.1");
  cfg.method.method = Method::VP;
  CHECK(csv(run(cfg, 7)) == csv(run(cfg, 7)));
  CHECK(csv(run(cfg, 7)) != csv(run(cfg, 8)));
}

TEST_CASE("log invariants on an incident run") {
  for (Method m : {Method::DAT, Method::BP}) {
    auto cfg = bundled("incident_1.1");
    cfg.method.method = m;
    const EventLog log = run(cfg, 2);
    CAPTURE(to_string(m));

    std::map<VehicleId, bool> equipped;
    std::map<VehicleId, double> last_beacon;
    // Arrivals and departures of a tick precede its beacon round.
    long on_equipped = 0;
    long expected = 0;
    double tick = -1.0;
    long beacons_this_tick = 0;
    const auto close_tick = [&] {
      if (tick >= 0) CHECK(beacons_this_tick == expected);
    };
    double prev = 0.0;
    for (const auto& r : log.records()) {
      CHECK(r.time >= prev);
      prev = r.time;
      switch (r.kind) {
        case RecordKind::Arrival:
          CHECK_FALSE(equipped.contains(r.vehicle));
          equipped[r.vehicle] = r.aux == 1;
          on_equipped += r.aux == 1 ? 1 : 0;
          break;
        case RecordKind::Departure:
          REQUIRE(equipped.contains(r.vehicle));
          on_equipped -= equipped[r.vehicle] ? 1 : 0;
          break;
        case RecordKind::BeaconStats: {
          if (r.time != tick) {
            close_tick();
            tick = r.time;
            beacons_this_tick = 0;
            expected = on_equipped;
          }
          ++beacons_this_tick;
          CHECK(equipped.at(r.vehicle));
          const auto it = last_beacon.find(r.vehicle);
          if (it != last_beacon.end()) CHECK(r.time - it->second == doctest::Approx(0.1).epsilon(1e-6));
          last_beacon[r.vehicle] = r.time;
          break;
        }
        case RecordKind::ReportSent:
        case RecordKind::Initiate:
        case RecordKind::Decision:
          CHECK(equipped.at(r.vehicle));
          break;
        case RecordKind::ReportReceived:
        case RecordKind::Rq:
        case RecordKind::Rp:
          CHECK(equipped.at(r.vehicle));
          if (r.kind == RecordKind::ReportReceived) CHECK(equipped.at(r.aux));
          break;
        default:
          break;
      }
    }
    close_tick();
  }
}

TEST_CASE("BP holds RQ for the retention time before RP") {
  auto cfg = bundled("incident_1.1");
  cfg.method.method = Method::BP;
  const EventLog log = run(cfg, 0);
  std::size_t rps = 0;
  for (const auto& r : log.records()) {
    if (r.kind != RecordKind::Rp) continue;
    ++rps;
    // a = creation time of the RQ being answered
    CHECK(r.time >= r.a + cfg.method.retention - 1e-3);
  }
  CHECK(rps > 0);
}

TEST_CASE("reports reach every vehicle within one radio range in the same tick") {
  ScenarioConfig cfg = quiet(0.3, 600);
  cfg.network.segments = 3;
  cfg.network.length = 90;
  cfg.classifier.spurious_rate = 0.05;
  cfg.classifier.threshold_factor = 100.0;
  const EventLog log = run(cfg, 9);
  std::map<double, std::set<VehicleId>> present;
  std::map<std::pair<VehicleId, int>, std::set<VehicleId>> heard_from;
  for (const auto& r : log.records()) {
    if (r.kind == RecordKind::BeaconStats) present[r.time].insert(r.vehicle);
    if (r.kind == RecordKind::ReportReceived) heard_from[{r.aux, r.segment}].insert(r.vehicle);
  }
  std::size_t checked = 0;
  for (const auto& r : log.records()) {
    if (r.kind != RecordKind::ReportSent) continue;
    for (VehicleId v : present[r.time]) {
      if (v == r.vehicle) continue;
      CHECK(heard_from[{r.vehicle, r.segment}].contains(v));
      ++checked;
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("higher threshold never detects more") {
  auto cfg = bundled("incident_1.1");
  cfg.method.method = Method::VP;
  cfg.horizon = 1200;
  std::size_t previous = std::numeric_limits<std::size_t>::max();
  for (double factor : {1.5, 2.0, 2.5, 3.0}) {
    cfg.classifier.threshold_factor = factor;
    const std::size_t n = run(cfg, 1).count(RecordKind::CongestionDetected);
    CAPTURE(factor);
    CHECK(n <= previous);
    previous = n;
  }
}

TEST_CASE("incident raises upstream travel time") {
  auto cfg = bundled("incident_1.1");
  cfg.method.method = Method::VP;
  auto base = cfg;
  base.events.clear();
  const auto mean_tt = [&](const EventLog& log) {
    // Time on segment 5 when leaving it, during the event window.
    std::map<VehicleId, float> last;
    double sum = 0.0;
    int n = 0;
    for (const auto& r : log.records()) {
      if (r.kind != RecordKind::BeaconStats || r.time < 600) continue;
      if (r.segment == 5) last[r.vehicle] = r.a;
    }
    for (const auto& [v, tt] : last) sum += tt, ++n;
    return n == 0 ? 0.0 : sum / n;
  };
  const double with = mean_tt(run(cfg, 3));
  const double without = mean_tt(run(base, 3));
  CHECK(with > 2.0 * without);
}

TEST_CASE("weather enlarges gaps") {
  auto wx = bundled("weather_3.1");
  wx.method.method = Method::VP;
  wx.events[0].speed_factor = 1.0;
  wx.events[0].gap_factor = 2.0;
  wx.events[0].start = 0.0;
  wx.horizon = 900;
  auto base = wx;
  base.events.clear();
  const double ratio = gap_percentile(run(wx, 1), 85) / gap_percentile(run(base, 1), 85);
  CHECK(ratio > 1.3);
  CHECK(ratio < 2.5);
}

TEST_CASE("weather: BF decisions converge to We") {
  auto cfg = bundled("weather_3.1");
  cfg.method.method = Method::BF;
  const EventLog log = run(cfg, 1);
  const auto series = accuracy_series(log, GroundTruth::from_scenario(cfg));
  REQUIRE_FALSE(series.empty());
  CHECK(series.back().fraction >= 0.8);
}

TEST_CASE("event log CSV round-trips") {
  auto cfg = bundled("incident_1.1");
  cfg.method.method = Method::BP;
  cfg.horizon = 1300;
  const EventLog log = run(cfg, 5);
  const std::string text = csv(log);
  std::istringstream in(text);
  const EventLog back = read_event_log_csv(in);
  CHECK(back.size() == log.size());
  CHECK(csv(back) == text);

  std::istringstream bad("time,vehicle,kind,segment,payload\n1,2,teleport,3,\n");
  CHECK_THROWS_WITH_AS(read_event_log_csv(bad), doctest::Contains("line 2"), ConfigError);
}
