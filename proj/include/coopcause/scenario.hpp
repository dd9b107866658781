#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "coopcause/cause.hpp"
#include "coopcause/decision.hpp"
#include "coopcause/evidence.hpp"
#include "coopcause/network.hpp"

namespace coopcause {

enum class LanePosition { Beginning, Middle, End };

std::string_view to_string(LanePosition p);
std::optional<LanePosition> parse_lane_position(std::string_view text);
double lane_fraction(LanePosition p);

/// A ground-truth congestion event. Incident and workzone events close part of
/// the lane and leave a slow zone; weather scales speeds and gaps everywhere;
/// a special event sends extra trips to a venue that admits them one by one.
struct EventSpec {
  Cause kind = Cause::Incident;
  SegmentId segment = 0;
  LanePosition position = LanePosition::Beginning;
  double start = 0.0;
  double duration = 0.0;
  /// Radius in metres around the event point that counts as affected.
  double impact = 300.0;

  int stopped = 3;
  double zone_length_per_vehicle = 10.0;
  double zone_speed = 1.0;

  double speed_factor = 1.0;
  double gap_factor = 1.0;

  double ingress_rate = 0.0;
  double service_rate = 0.08;

  double end() const { return start + duration; }
  bool active(double t) const { return t >= start && t < end(); }
  double zone_length() const { return stopped * zone_length_per_vehicle; }
};

struct NetworkSpec {
  Topology topology = Topology::Corridor;
  int segments = 10;
  int rows = 1;
  int cols = 10;
  double length = 200.0;
  double speed = 13.9;

  RoadNetwork build() const;
};

struct CommsSpec {
  double penetration = 1.0;
  double beacon_interval = 0.1;
  double range = 300.0;
  double report_interval = 5.0;
  /// Reports older than this are ignored when deciding.
  double report_horizon = 600.0;
};

inline constexpr std::size_t kConfusionRows = kCauseCount + 1;
inline constexpr std::size_t kNoneRow = kCauseCount;

struct ClassifierSpec {
  /// Rows I, Wo, We, SE, Re, then the row used when no event is active.
  std::array<std::array<double, kCauseCount>, kConfusionRows> confusion{};
  double high_lo = 0.3;
  double high_hi = 0.7;
  /// Probability band for a wrong top guess whose runner-up is the truth.
  double miss_lo = 0.3;
  double miss_hi = 0.45;
  double miss_ratio_lo = 0.75;
  double miss_ratio_hi = 0.95;
  /// Chance that an incident or workzone vehicle ranks SE second.
  double se_bias = 0.95;
  /// Chance that a wrong top guess has the truth as runner-up.
  double truth_second = 0.8;
  double ignorance = 0.1;
  double threshold_factor = 2.0;
  /// Per segment entry chance of a congestion trigger without congestion.
  double spurious_rate = 0.005;
  /// Empty means: mine the default rulebook from surrogate samples.
  std::filesystem::path rulebook;

  static ClassifierSpec defaults();
};

struct MethodSpec {
  Method method = Method::DAT;
  CombinationRule rule = CombinationRule::Dempster;
  BetaGateConfig beta;
  double retention = 480.0;
  double label_share = 0.0;
};

struct MobilitySpec {
  double min_gap = 2.0;
  double headway = 1.5;
  double vehicle_length = 5.0;
  double max_accel = 2.0;
  double comfortable_decel = 2.0;
};

struct ScenarioConfig {
  std::string id = "scenario";
  double horizon = 7200.0;
  std::uint64_t seed = 0;
  NetworkSpec network;
  /// Arrival rate in vehicles per second at every entry segment.
  double demand = 0.1;
  std::vector<EventSpec> events;
  CommsSpec comms;
  ClassifierSpec classifier = ClassifierSpec::defaults();
  MethodSpec method;
  MobilitySpec mobility;

  /// Throws ConfigError naming the first violated invariant.
  void validate() const;
};

ScenarioConfig parse_scenario(std::istream& in, const std::filesystem::path& base_dir = {});
ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Accepts a path or a bundled scenario name such as "incident_1.1".
std::filesystem::path resolve_scenario(const std::string& name_or_path);

/// Directory holding the bundled scenario files.
std::filesystem::path scenario_dir();

/// The event segment plus every segment leading to it that comes within the
/// impact radius of the event point. Weather affects the whole network.
std::vector<SegmentId> affected_segments(const EventSpec& e, const RoadNetwork& net);

/// Start offset of the slow zone on the event segment.
double zone_start(const EventSpec& e, double segment_length);

}  // namespace coopcause
