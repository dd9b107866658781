#include "coopcause/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "coopcause/error.hpp"
#include "coopcause/text.hpp"

#ifndef COOPCAUSE_SCENARIO_DIR
#define COOPCAUSE_SCENARIO_DIR "scenarios"
#endif

namespace coopcause {

namespace fs = std::filesystem;

std::string_view to_string(LanePosition p) {
  switch (p) {
    case LanePosition::Beginning: return "beginning";
    case LanePosition::Middle: return "middle";
    case LanePosition::End: return "end";
  }
  return "beginning";
}

std::optional<LanePosition> parse_lane_position(std::string_view text) {
  if (text == "beginning" || text == "begin" || text == "start") return LanePosition::Beginning;
  if (text == "middle" || text == "mid") return LanePosition::Middle;
  if (text == "end") return LanePosition::End;
  return std::nullopt;
}

double lane_fraction(LanePosition p) {
  switch (p) {
    case LanePosition::Beginning: return 0.1;
    case LanePosition::Middle: return 0.5;
    case LanePosition::End: return 0.9;
  }
  return 0.1;
}

RoadNetwork NetworkSpec::build() const {
  return topology == Topology::Corridor ? RoadNetwork::corridor(segments, length, speed)
                                        : RoadNetwork::grid(rows, cols, length, speed);
}

ClassifierSpec ClassifierSpec::defaults() {
  ClassifierSpec c;
  c.confusion = {{
      {0.48, 0.03, 0.02, 0.44, 0.03},
      {0.03, 0.48, 0.02, 0.44, 0.03},
      {0.03, 0.03, 0.60, 0.30, 0.04},
      {0.03, 0.03, 0.03, 0.88, 0.03},
      {0.03, 0.03, 0.20, 0.19, 0.55},
      {0.2, 0.2, 0.2, 0.2, 0.2},
  }};
  return c;
}

namespace {

std::string row_name(std::size_t row) {
  return row == kNoneRow ? std::string("none") : std::string(code(cause_at(row)));
}

std::string short_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

void require_band(double lo, double hi, const std::string& what) {
  require(std::isfinite(lo) && std::isfinite(hi) && lo > 0.0 && lo <= hi && hi < 1.0,
          what + " must satisfy 0 < lo <= hi < 1");
}

}  // namespace

void ScenarioConfig::validate() const {
  require(!id.empty(), "scenario id is empty");
  require(std::isfinite(horizon) && horizon > 0.0, "horizon must be positive");
  require(network.segments >= 1 && network.rows >= 1 && network.cols >= 1, "network needs at least one segment");
  const RoadNetwork net = network.build();
  net.validate();
  require(std::isfinite(demand) && demand >= 0.0, "demand must be non-negative");

  require(comms.penetration >= 0.0 && comms.penetration <= 1.0, "penetration out of range");
  require(std::isfinite(comms.beacon_interval) && comms.beacon_interval > 0.0, "beacon interval must be positive");
  require(std::isfinite(comms.range) && comms.range > 0.0, "radio range must be positive");
  require(std::isfinite(comms.report_interval) && comms.report_interval > 0.0, "report interval must be positive");
  require(comms.report_horizon > 0.0, "report horizon must be positive");

  const auto& cl = classifier;
  for (std::size_t r = 0; r < kConfusionRows; ++r) {
    double sum = 0.0;
    for (double p : cl.confusion[r]) {
      require(std::isfinite(p) && p >= 0.0 && p <= 1.0,
              "confusion matrix row " + std::to_string(r + 1) + " has an entry outside [0, 1]");
      sum += p;
    }
    require(std::abs(sum - 1.0) <= 1e-9, "confusion matrix row " + std::to_string(r + 1) + " sums to " +
                                             short_number(sum) + " (" + row_name(r) + ")");
  }
  require_band(cl.high_lo, cl.high_hi, "high band");
  require(cl.high_lo > 0.25, "high band must start above 0.25 so the top cause stays on top");
  require_band(cl.miss_lo, cl.miss_hi, "miss band");
  require(cl.miss_lo > 0.25, "miss band must start above 0.25 so the top cause stays on top");
  require_band(cl.miss_ratio_lo, cl.miss_ratio_hi, "miss ratio band");
  require(cl.se_bias >= 0.0 && cl.se_bias <= 1.0, "se_bias must lie in [0, 1]");
  require(cl.truth_second >= 0.0 && cl.truth_second <= 1.0, "truth_second must lie in [0, 1]");
  require(cl.ignorance >= 0.0 && cl.ignorance < 1.0, "ignorance must lie in [0, 1)");
  require(std::isfinite(cl.threshold_factor) && cl.threshold_factor > 0.0, "threshold factor must be positive");
  require(cl.spurious_rate >= 0.0 && cl.spurious_rate <= 1.0, "spurious rate must lie in [0, 1]");

  require(method.beta.beta >= 0.0 && method.beta.journey_multiplier >= 0.0, "beta must be non-negative");
  require(std::isfinite(method.retention) && method.retention >= 0.0, "retention must be non-negative");
  require(method.label_share >= 0.0 && method.label_share <= 1.0, "label share must lie in [0, 1]");

  require(mobility.min_gap >= 0.0 && mobility.headway > 0.0 && mobility.vehicle_length > 0.0 &&
              mobility.max_accel > 0.0 && mobility.comfortable_decel > 0.0,
          "mobility parameters must be positive");

  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    const std::string name = "event " + std::to_string(i + 1);
    require(e.start >= 0.0 && std::isfinite(e.start), name + ": start must be >= 0");
    require(e.duration > 0.0 && std::isfinite(e.duration), name + ": duration must be > 0");
    require(e.segment >= 0 && static_cast<std::size_t>(e.segment) < net.size(),
            name + ": segment " + std::to_string(e.segment) + " does not exist");
    require(e.impact >= 0.0, name + ": impact must be >= 0");
    switch (e.kind) {
      case Cause::Incident:
      case Cause::Workzone:
        require(e.stopped >= 1, name + ": stopped must be >= 1");
        require(e.zone_length_per_vehicle > 0.0 && e.zone_length() <= net.segment(e.segment).length,
                name + ": closed zone does not fit on the segment");
        require(e.zone_speed > 0.0, name + ": zone speed must be > 0");
        break;
      case Cause::Weather:
        require(e.speed_factor > 0.0 && e.speed_factor <= 1.0, name + ": speed factor must lie in (0, 1]");
        require(e.gap_factor >= 1.0, name + ": gap factor must be >= 1");
        break;
      case Cause::SpecialEvent:
        require(e.ingress_rate >= 0.0, name + ": ingress must be >= 0");
        require(e.service_rate > 0.0, name + ": service rate must be > 0");
        break;
      case Cause::Recurrent:
        break;
    }
  }
}

namespace {

struct Parser {
  ScenarioConfig cfg;
  fs::path base_dir;
  std::string section;
  int line_no = 0;

  [[noreturn]] void fail(const std::string& message) const {
    throw ConfigError("line " + std::to_string(line_no) + ": " + message);
  }

  double number(std::string_view key, std::string_view value) const {
    const auto v = text::parse_double(value);
    if (!v) fail("field '" + std::string(key) + "' expects a number, got '" + std::string(value) + "'");
    return *v;
  }

  int integer(std::string_view key, std::string_view value) const {
    const auto v = text::parse_int(value);
    if (!v) fail("field '" + std::string(key) + "' expects an integer, got '" + std::string(value) + "'");
    return static_cast<int>(*v);
  }

  bool boolean(std::string_view key, std::string_view value) const {
    if (value == "true" || value == "yes" || value == "1") return true;
    if (value == "false" || value == "no" || value == "0") return false;
    fail("field '" + std::string(key) + "' expects true or false");
  }

  std::pair<double, double> band(std::string_view key, std::string_view value) const {
    std::vector<std::string_view> parts;
    for (auto p : text::split(value, ' ')) {
      if (!text::trim(p).empty()) parts.push_back(text::trim(p));
    }
    if (parts.size() != 2) fail("field '" + std::string(key) + "' expects two numbers");
    return {number(key, parts[0]), number(key, parts[1])};
  }

  void top(std::string_view key, std::string_view value) {
    if (key == "id") {
      cfg.id = std::string(value);
    } else if (key == "horizon") {
      cfg.horizon = number(key, value);
    } else if (key == "seed") {
      const auto v = text::parse_int(value);
      if (!v || *v < 0) fail("field 'seed' expects a non-negative integer");
      cfg.seed = static_cast<std::uint64_t>(*v);
    } else {
      unknown(key);
    }
  }

  void network(std::string_view key, std::string_view value) {
    auto& n = cfg.network;
    if (key == "topology") {
      if (value == "corridor") {
        n.topology = Topology::Corridor;
      } else if (value == "grid") {
        n.topology = Topology::Grid;
      } else {
        fail("unknown topology '" + std::string(value) + "'");
      }
    } else if (key == "segments") {
      n.segments = integer(key, value);
    } else if (key == "rows") {
      n.rows = integer(key, value);
    } else if (key == "cols") {
      n.cols = integer(key, value);
    } else if (key == "length") {
      n.length = number(key, value);
    } else if (key == "speed") {
      n.speed = number(key, value);
    } else {
      unknown(key);
    }
  }

  void demand(std::string_view key, std::string_view value) {
    if (key == "rate") {
      cfg.demand = number(key, value);
    } else {
      unknown(key);
    }
  }

  void event(std::string_view key, std::string_view value) {
    if (key != "event") unknown(key);
    std::vector<std::string_view> words;
    for (auto w : text::split(value, ' ')) {
      if (!text::trim(w).empty()) words.push_back(text::trim(w));
    }
    if (words.empty()) fail("event needs a kind");
    EventSpec e;
    const std::string_view kind = words[0];
    if (kind == "incident") {
      e.kind = Cause::Incident;
    } else if (kind == "workzone") {
      e.kind = Cause::Workzone;
      e.zone_speed = 1.5;
    } else if (kind == "weather") {
      e.kind = Cause::Weather;
      e.speed_factor = 0.35;
      e.gap_factor = 3.5;
    } else if (kind == "special_event") {
      e.kind = Cause::SpecialEvent;
      e.ingress_rate = 0.1;
    } else if (kind == "recurrent") {
      e.kind = Cause::Recurrent;
    } else {
      fail("unknown event kind '" + std::string(kind) + "'");
    }
    for (std::size_t i = 1; i < words.size(); ++i) {
      const auto eq = words[i].find('=');
      if (eq == std::string_view::npos) fail("event field '" + std::string(words[i]) + "' is not key=value");
      const auto k = words[i].substr(0, eq);
      const auto v = words[i].substr(eq + 1);
      if (k == "segment") {
        e.segment = integer(k, v);
      } else if (k == "position") {
        const auto p = parse_lane_position(v);
        if (!p) fail("unknown lane position '" + std::string(v) + "'");
        e.position = *p;
      } else if (k == "start") {
        e.start = number(k, v);
      } else if (k == "duration") {
        e.duration = number(k, v);
      } else if (k == "impact") {
        e.impact = number(k, v);
      } else if (k == "stopped") {
        e.stopped = integer(k, v);
      } else if (k == "zone_per_vehicle") {
        e.zone_length_per_vehicle = number(k, v);
      } else if (k == "zone_speed") {
        e.zone_speed = number(k, v);
      } else if (k == "speed_factor") {
        e.speed_factor = number(k, v);
      } else if (k == "gap_factor") {
        e.gap_factor = number(k, v);
      } else if (k == "ingress") {
        e.ingress_rate = number(k, v);
      } else if (k == "service") {
        e.service_rate = number(k, v);
      } else {
        fail("unknown event field '" + std::string(k) + "'");
      }
    }
    cfg.events.push_back(e);
  }

  void comms(std::string_view key, std::string_view value) {
    auto& c = cfg.comms;
    if (key == "penetration") {
      c.penetration = number(key, value);
    } else if (key == "beacon_interval") {
      c.beacon_interval = number(key, value);
    } else if (key == "range") {
      c.range = number(key, value);
    } else if (key == "report_interval") {
      c.report_interval = number(key, value);
    } else if (key == "report_horizon") {
      c.report_horizon = value == "inf" ? HUGE_VAL : number(key, value);
    } else {
      unknown(key);
    }
  }

  void classifier(std::string_view key, std::string_view value) {
    auto& c = cfg.classifier;
    if (key.starts_with("row.")) {
      const auto name = key.substr(4);
      std::size_t row = kNoneRow;
      if (name != "none") {
        const auto cause = parse_cause(name);
        if (!cause) fail("unknown confusion row '" + std::string(name) + "'");
        row = index_of(*cause);
      }
      std::vector<double> vals;
      for (auto p : text::split(value, ' ')) {
        if (!text::trim(p).empty()) vals.push_back(number(key, text::trim(p)));
      }
      if (vals.size() != kCauseCount) fail("confusion row '" + std::string(name) + "' needs 5 entries");
      std::copy(vals.begin(), vals.end(), c.confusion[row].begin());
    } else if (key == "high_band") {
      std::tie(c.high_lo, c.high_hi) = band(key, value);
    } else if (key == "miss_band") {
      std::tie(c.miss_lo, c.miss_hi) = band(key, value);
    } else if (key == "miss_ratio") {
      std::tie(c.miss_ratio_lo, c.miss_ratio_hi) = band(key, value);
    } else if (key == "se_bias") {
      c.se_bias = number(key, value);
    } else if (key == "truth_second") {
      c.truth_second = number(key, value);
    } else if (key == "ignorance") {
      c.ignorance = number(key, value);
    } else if (key == "threshold_factor") {
      c.threshold_factor = number(key, value);
    } else if (key == "spurious_rate") {
      c.spurious_rate = number(key, value);
    } else if (key == "rulebook") {
      const fs::path p(std::string{value});
      c.rulebook = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
    } else {
      unknown(key);
    }
  }

  void method(std::string_view key, std::string_view value) {
    auto& m = cfg.method;
    if (key == "method") {
      const auto parsed = parse_method(value);
      if (!parsed) fail("unknown method '" + std::string(value) + "'");
      m.method = *parsed;
    } else if (key == "combination") {
      const auto rule = parse_combination_rule(value);
      if (!rule) fail("unknown combination rule '" + std::string(value) + "'");
      m.rule = *rule;
    } else if (key == "beta") {
      m.beta.beta = number(key, value);
    } else if (key == "adaptive_beta") {
      m.beta.adaptive = boolean(key, value);
    } else if (key == "journey_multiplier") {
      m.beta.journey_multiplier = number(key, value);
    } else if (key == "retention") {
      m.retention = number(key, value);
    } else if (key == "label_share") {
      m.label_share = number(key, value);
    } else {
      unknown(key);
    }
  }

  void mobility(std::string_view key, std::string_view value) {
    auto& m = cfg.mobility;
    if (key == "min_gap") {
      m.min_gap = number(key, value);
    } else if (key == "headway") {
      m.headway = number(key, value);
    } else if (key == "vehicle_length") {
      m.vehicle_length = number(key, value);
    } else if (key == "max_accel") {
      m.max_accel = number(key, value);
    } else if (key == "comfortable_decel") {
      m.comfortable_decel = number(key, value);
    } else {
      unknown(key);
    }
  }

  [[noreturn]] void unknown(std::string_view key) const {
    fail("unknown field '" + std::string(key) + "'" + (section.empty() ? "" : " in [" + section + "]"));
  }

  void line(std::string_view raw) {
    ++line_no;
    const auto hash = raw.find('#');
    const auto s = text::trim(raw.substr(0, hash));
    if (s.empty()) return;
    if (s.front() == '[') {
      if (s.back() != ']') fail("unterminated section header");
      section = std::string(text::trim(s.substr(1, s.size() - 2)));
      static const std::vector<std::string> known = {"network", "demand", "events", "comms",
                                                     "classifier", "method", "mobility"};
      if (std::find(known.begin(), known.end(), section) == known.end()) fail("unknown section [" + section + "]");
      return;
    }
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) fail("expected key = value");
    const auto key = text::trim(s.substr(0, eq));
    const auto value = text::trim(s.substr(eq + 1));
    if (key.empty()) fail("empty key");
    if (section.empty()) {
      top(key, value);
    } else if (section == "network") {
      network(key, value);
    } else if (section == "demand") {
      demand(key, value);
    } else if (section == "events") {
      event(key, value);
    } else if (section == "comms") {
      comms(key, value);
    } else if (section == "classifier") {
      classifier(key, value);
    } else if (section == "method") {
      method(key, value);
    } else {
      mobility(key, value);
    }
  }
};

}  // namespace

ScenarioConfig parse_scenario(std::istream& in, const fs::path& base_dir) {
  Parser p;
  p.base_dir = base_dir;
  std::string raw;
  while (std::getline(in, raw)) p.line(raw);
  if (p.cfg.network.topology == Topology::Corridor) {
    p.cfg.network.rows = 1;
    p.cfg.network.cols = p.cfg.network.segments;
  } else {
    p.cfg.network.segments = p.cfg.network.rows * p.cfg.network.cols;
  }
  p.cfg.validate();
  return p.cfg;
}

ScenarioConfig load_scenario(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file '" + path.string() + "'");
  try {
    return parse_scenario(in, path.parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(path.filename().string() + ": " + e.what());
  }
}

fs::path scenario_dir() {
  if (const char* env = std::getenv("COOPCAUSE_SCENARIOS"); env != nullptr && *env != '\0') return fs::path(env);
  return fs::path(COOPCAUSE_SCENARIO_DIR);
}

fs::path resolve_scenario(const std::string& name_or_path) {
  const fs::path direct(name_or_path);
  if (fs::is_regular_file(direct)) return direct;
  for (const fs::path& candidate : {scenario_dir() / name_or_path, scenario_dir() / (name_or_path + ".scn")}) {
    if (fs::is_regular_file(candidate)) return candidate;
  }
  throw ConfigError("unknown scenario '" + name_or_path + "'");
}

double zone_start(const EventSpec& e, double segment_length) {
  return std::clamp(lane_fraction(e.position) * segment_length, 0.0, segment_length - e.zone_length());
}

std::vector<SegmentId> affected_segments(const EventSpec& e, const RoadNetwork& net) {
  std::vector<SegmentId> out;
  if (e.kind == Cause::Weather) {
    for (const auto& s : net.segments()) out.push_back(s.id);
    return out;
  }
  const Segment& seg = net.segment(e.segment);
  const double offset = e.kind == Cause::SpecialEvent ? seg.length : zone_start(e, seg.length);
  const Point p = net.position(e.segment, offset);
  for (const auto& s : net.segments()) {
    if (s.id == e.segment || (net.leads_to(s.id, e.segment) && net.distance_to(s.id, p) <= e.impact)) {
      out.push_back(s.id);
    }
  }
  return out;
}

}  // namespace coopcause
