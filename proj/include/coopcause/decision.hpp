#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "coopcause/cause.hpp"
#include "coopcause/evidence.hpp"
#include "coopcause/ids.hpp"
#include "coopcause/rules.hpp"

namespace coopcause {

enum class Method { BP, VP, BF, DAT, BetaDAT };

inline constexpr std::array<Method, 5> kAllMethods = {Method::BP, Method::VP, Method::BF, Method::DAT,
                                                      Method::BetaDAT};

/// Flag spelling: BP, VP, BF, DAT, beta-dat.
std::string_view to_string(Method m);
/// Case-insensitive; also accepts "bdat" and "betadat" for beta-dat.
std::optional<Method> parse_method(std::string_view text);
bool is_cooperative(Method m);

/// Cause vector broadcast by a congested vehicle, with its derived mass.
struct Report {
  VehicleId sender = kNoVehicle;
  SegmentId segment = kNoSegment;
  double timestamp = 0.0;
  CauseVector vector = CauseVector::uniform();
  MassFunction mass;

  static Report make(VehicleId sender, SegmentId segment, double timestamp, const CauseVector& vector,
                     double ignorance);
};

struct Decision {
  Cause cause = Cause::Incident;
  double confidence = 0.0;
  Method method = Method::VP;
  double decided_at = 0.0;
  SegmentId segment = kNoSegment;

  bool operator==(const Decision&) const = default;
};

/// Plurality of top-1 causes; confidence is the winner's vote share.
/// Throws DomainError("no votes") on an empty list and when reports span segments.
Decision vp_decide(std::span<const Report> reports);

/// Combines the report masses, takes the pignistic argmax; confidence is the
/// winning BetP. Total conflict is a DomainError naming the senders.
Decision bf_decide(std::span<const Report> reports, CombinationRule rule);

/// BF followed by at most one correction rule: the first {g,l}->{l} rule in
/// book order whose guess g is the BF winner and whose label l is the top-1
/// cause of at least one report flips the decision to l (confidence BetP(l)).
/// With `min_label_share` > 0, l must be the top-1 cause of at least that
/// fraction of the reports. Itemset rules never change the decision.
Decision dat_decide(std::span<const Report> reports, const RuleBook& book, CombinationRule rule,
                    double min_label_share = 0.0);

/// Fixed waiting time, or `journey_multiplier` link journey times.
struct BetaGateConfig {
  double beta = 240.0;
  bool adaptive = false;
  double journey_multiplier = 2.0;

  double effective_beta(double link_journey_time) const;
};

/// True once `beta` seconds have passed since the congestion onset.
bool beta_gate(double now, double onset, const BetaGateConfig& cfg, double link_journey_time = 0.0);

// ---------------------------------------------------------------------------
// Back-propagation baseline. One automaton per (vehicle, segment):
//   idle --(own detection)--> rq-retained --(retention elapsed)--> rp-propagated
//   idle --(RQ heard)-------> rq-retained (relayed upstream once)
//   idle/rq-retained --(RP heard)--> rp-propagated (cause adopted)

enum class BpPhase { Idle, RqRetained, RpPropagated };

struct BpMessage {
  enum class Kind { Rq, Rp };
  Kind kind = Kind::Rq;
  VehicleId origin = kNoVehicle;
  SegmentId segment = kNoSegment;
  double created_at = 0.0;
  Cause cause = Cause::Incident;

  bool operator==(const BpMessage&) const = default;
};

struct BeaconStats {
  double travel_time = 0.0;
  double speed = 0.0;
  double demand = 0.0;
  double gap = 0.0;
};

struct BpState {
  BpPhase phase = BpPhase::Idle;
  SegmentId segment = kNoSegment;
  double retention = 480.0;
  double rq_created_at = 0.0;
  VehicleId origin = kNoVehicle;
  Cause cause = Cause::Incident;
  /// Latest beacon aggregates (rule 1).
  BeaconStats stats;
  std::size_t malformed = 0;
};

/// Inputs for one automaton step. `classified` carries the classifier's
/// answer when the vehicle's own travel time crossed the threshold.
struct BpObservation {
  VehicleId self = kNoVehicle;
  std::optional<BeaconStats> beacon;
  std::optional<double> travel_time;
  double free_flow_time = 0.0;
  double threshold_factor = 2.0;
  std::optional<Cause> classified;
  std::optional<BpMessage> heard;
};

struct BpStepResult {
  BpState state;
  std::vector<BpMessage> outgoing;
};

BpStepResult bp_step(const BpState& state, const BpObservation& obs, double now);

}  // namespace coopcause
