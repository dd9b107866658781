#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <vector>

#include "coopcause/decision.hpp"
#include "coopcause/event_log.hpp"
#include "coopcause/network.hpp"
#include "coopcause/rng.hpp"
#include "coopcause/rules.hpp"
#include "coopcause/scenario.hpp"

namespace coopcause {

/// True iff the observed travel time exceeds factor x free-flow time.
bool detect_excessive_congestion(double observed, double free_flow_time, double factor);

struct OwnReport {
  Report report;
  double travel_time = 0.0;
  bool sent = false;
  double last_sent = 0.0;
};

struct Vehicle {
  VehicleId id = kNoVehicle;
  bool equipped = false;
  bool special = false;
  /// Index of the special event whose venue ends the route.
  int venue = -1;
  std::vector<SegmentId> route;
  std::size_t leg = 0;
  double offset = 0.0;
  double speed = 0.0;
  double network_entered = 0.0;
  double segment_entered = 0.0;
  bool on_network = false;
  bool departed = false;

  bool detected = false;
  bool spurious_pending = false;

  std::map<SegmentId, OwnReport> own;
  std::map<SegmentId, std::vector<Report>> heard;
  std::optional<Decision> decision;

  std::map<SegmentId, BpState> bp;
  std::map<SegmentId, double> bp_last_tx;

  SegmentId segment() const { return route[leg]; }
};

/// One simulation run: vehicles, radio, detection, the method under test and
/// the event log. Advance it with step() until finished().
class World {
 public:
  World(const ScenarioConfig& cfg, std::uint64_t seed);
  /// Same as above with a preloaded rulebook, so batches can share one.
  World(const ScenarioConfig& cfg, std::uint64_t seed, RuleBook book);

  /// Advances one beacon interval.
  void step();
  bool finished() const { return now() >= cfg_.horizon - 1e-9; }
  double now() const { return static_cast<double>(tick_) * dt_; }

  const ScenarioConfig& config() const { return cfg_; }
  const RoadNetwork& network() const { return net_; }
  const EventLog& log() const { return log_; }
  EventLog take_log() { return std::move(log_); }
  const std::vector<Vehicle>& vehicles() const { return vehicles_; }
  std::size_t on_network() const;

  /// Equipped vehicles within radio range of the sender, in id order.
  /// Throws DomainError when the sender is not equipped.
  std::vector<VehicleId> broadcast(VehicleId sender) const;

  /// Places a vehicle directly on the network, bypassing demand; for probes.
  VehicleId place_vehicle(SegmentId segment, double offset, bool equipped);

  /// Active event whose affected segments include `segment`, if any.
  std::optional<Cause> active_truth(SegmentId segment) const;

 private:
  struct EventState {
    EventSpec spec;
    std::vector<bool> affected;
    double next_service = 0.0;
    RandomStream arrivals;
    double next_arrival = 0.0;
  };

  struct Leader {
    int index = -1;
    double gap = 0.0;
  };

  void setup();
  void spawn(double t);
  VehicleId create_vehicle(std::vector<SegmentId> route, bool special);
  void move();
  void release_entries();
  void enter_segment(Vehicle& v);
  void rebuild_index();
  void beacons();
  void detect();
  void update_onsets();
  void communicate();
  void communicate_bp();

  Leader leader_of(const Vehicle& v, std::size_t pos) const;
  double zone_cap(const Vehicle& v) const;
  double speed_factor() const;
  double gap_factor() const;
  Point position(const Vehicle& v) const;
  std::vector<VehicleId> in_range(VehicleId sender) const;

  void deliver_report(Vehicle& sender, const Report& r);
  void decide(Vehicle& v, SegmentId segment);
  void log_decision(const Vehicle& v, const Decision& d, std::size_t reports);
  void transmit_bp(Vehicle& sender, const BpMessage& m);
  BpObservation bp_observation(const Vehicle& v) const;

  ScenarioConfig cfg_;
  std::uint64_t seed_ = 0;
  RoadNetwork net_;
  RuleBook book_;
  double dt_ = 0.1;
  std::int64_t tick_ = 0;
  EventLog log_;

  std::vector<Vehicle> vehicles_;
  std::vector<std::deque<int>> lanes_;
  std::vector<SegmentId> entries_;
  std::vector<std::deque<int>> waiting_;
  std::vector<RandomStream> arrival_streams_;
  std::vector<double> next_arrival_;
  std::vector<EventState> events_;
  std::vector<int> entered_;

  std::vector<double> onset_;
  std::vector<double> last_detection_;

  double cell_ = 300.0;
  int cells_x_ = 1;
  int cells_y_ = 1;
  std::vector<std::vector<int>> cells_;
  std::vector<Point> pos_;
  std::vector<float> gaps_;
};

/// Runs a scenario from t=0 to its horizon.
EventLog run(const ScenarioConfig& cfg, std::uint64_t seed);
EventLog run(const ScenarioConfig& cfg, std::uint64_t seed, const RuleBook& book);

}  // namespace coopcause
