#include "coopcause/decision.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "coopcause/error.hpp"

namespace coopcause {

namespace {

// Slack for comparing tick-derived times against durations.
constexpr double kTimeEps = 1e-6;

void require_single_segment(std::span<const Report> reports) {
  if (reports.empty()) throw DomainError("no votes: empty report list");
  const SegmentId seg = reports.front().segment;
  for (const auto& r : reports) {
    if (r.segment != seg) {
      throw DomainError("reports span segments " + std::to_string(seg) + " and " + std::to_string(r.segment));
    }
  }
}

double latest_timestamp(std::span<const Report> reports) {
  double t = reports.front().timestamp;
  for (const auto& r : reports) t = std::max(t, r.timestamp);
  return t;
}

Cause argmax(const CauseVector& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < kCauseCount; ++i) {
    if (v.values()[i] > v.values()[best]) best = i;
  }
  return cause_at(best);
}

struct Fused {
  CauseVector betp;
  Decision decision;
};

Fused fuse(std::span<const Report> reports, CombinationRule rule, Method method) {
  require_single_segment(reports);
  std::vector<MassFunction> masses;
  masses.reserve(reports.size());
  for (const auto& r : reports) masses.push_back(r.mass);
  try {
    const CauseVector betp = pignistic(combine_all(masses, rule));
    const Cause winner = argmax(betp);
    return {betp, Decision{winner, betp[winner], method, latest_timestamp(reports), reports.front().segment}};
  } catch (const DomainError& e) {
    std::string senders;
    for (const auto& r : reports) {
      if (!senders.empty()) senders += ',';
      senders += std::to_string(r.sender);
    }
    throw DomainError(std::string(e.what()) + " [reports from vehicles " + senders + "]");
  }
}

}  // namespace

std::string_view to_string(Method m) {
  switch (m) {
    case Method::BP: return "BP";
    case Method::VP: return "VP";
    case Method::BF: return "BF";
    case Method::DAT: return "DAT";
    case Method::BetaDAT: return "beta-dat";
  }
  return "?";
}

std::optional<Method> parse_method(std::string_view text) {
  std::string lower;
  for (char c : text) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "bp") return Method::BP;
  if (lower == "vp") return Method::VP;
  if (lower == "bf") return Method::BF;
  if (lower == "dat") return Method::DAT;
  if (lower == "beta-dat" || lower == "betadat" || lower == "bdat") return Method::BetaDAT;
  return std::nullopt;
}

bool is_cooperative(Method m) { return m != Method::BP; }

Report Report::make(VehicleId sender, SegmentId segment, double timestamp, const CauseVector& vector,
                    double ignorance) {
  return Report{sender, segment, timestamp, vector, mass_from_cause_vector(vector, ignorance)};
}

Decision vp_decide(std::span<const Report> reports) {
  require_single_segment(reports);
  std::array<std::size_t, kCauseCount> votes{};
  for (const auto& r : reports) ++votes[index_of(r.vector.argmax())];
  std::size_t best = 0;
  for (std::size_t i = 1; i < kCauseCount; ++i) {
    if (votes[i] > votes[best]) best = i;
  }
  return Decision{cause_at(best), static_cast<double>(votes[best]) / static_cast<double>(reports.size()), Method::VP,
                  latest_timestamp(reports), reports.front().segment};
}

Decision bf_decide(std::span<const Report> reports, CombinationRule rule) {
  return fuse(reports, rule, Method::BF).decision;
}

Decision dat_decide(std::span<const Report> reports, const RuleBook& book, CombinationRule rule,
                    double min_label_share) {
  if (!(min_label_share >= 0.0 && min_label_share <= 1.0)) throw ConfigError("label share must lie in [0, 1]");
  auto [betp, decision] = fuse(reports, rule, Method::DAT);
  std::array<std::size_t, kCauseCount> votes{};
  for (const auto& r : reports) ++votes[index_of(r.vector.argmax())];
  const auto supported = [&](Cause label) {
    const std::size_t v = votes[index_of(label)];
    return v > 0 && static_cast<double>(v) + 1e-9 >= min_label_share * static_cast<double>(reports.size());
  };
  for (const auto& rule_entry : book.rules) {
    if (rule_entry.kind != RuleKind::Correction) continue;
    if (rule_entry.guess() != decision.cause || !supported(rule_entry.label())) continue;
    decision.cause = rule_entry.label();
    decision.confidence = betp[decision.cause];
    break;
  }
  return decision;
}

double BetaGateConfig::effective_beta(double link_journey_time) const {
  return adaptive ? journey_multiplier * link_journey_time : beta;
}

bool beta_gate(double now, double onset, const BetaGateConfig& cfg, double link_journey_time) {
  if (now < 0.0) throw DomainError("beta gate queried at negative time");
  const double beta = cfg.effective_beta(link_journey_time);
  if (beta < 0.0) throw ConfigError("beta must be non-negative");
  return now - onset + kTimeEps >= beta;
}

BpStepResult bp_step(const BpState& state, const BpObservation& obs, double now) {
  BpStepResult out{state, {}};
  BpState& s = out.state;

  // [1] beacon ingestion
  if (obs.beacon) {
    const auto& b = *obs.beacon;
    const bool ok = std::isfinite(b.travel_time) && std::isfinite(b.speed) && std::isfinite(b.demand) &&
                    std::isfinite(b.gap) && b.travel_time >= 0.0 && b.speed >= 0.0 && b.demand >= 0.0 &&
                    b.gap >= 0.0;
    if (ok) {
      s.stats = b;
    } else {
      ++s.malformed;
    }
  }

  // [2]-[3] own detection: classify, create the request and hold it
  if (obs.travel_time) {
    const double tt = *obs.travel_time;
    if (!std::isfinite(tt) || tt < 0.0) {
      ++s.malformed;
    } else if (s.phase == BpPhase::Idle && obs.classified && tt > obs.threshold_factor * obs.free_flow_time) {
      s.phase = BpPhase::RqRetained;
      s.rq_created_at = now;
      s.origin = obs.self;
      s.cause = *obs.classified;
      out.outgoing.push_back({BpMessage::Kind::Rq, obs.self, s.segment, now, s.cause});
    }
  }

  if (obs.heard) {
    const BpMessage& msg = *obs.heard;
    if (msg.kind == BpMessage::Kind::Rq) {
      if (s.phase == BpPhase::Idle) {
        s.phase = BpPhase::RqRetained;
        s.rq_created_at = msg.created_at;
        s.origin = msg.origin;
        s.cause = msg.cause;
        out.outgoing.push_back(msg);  // relayed upstream once
      }
    } else {
      s.phase = BpPhase::RpPropagated;
      s.rq_created_at = msg.created_at;
      s.origin = msg.origin;
      s.cause = msg.cause;
    }
  }

  // [4] retention elapsed: answer with total knowledge
  if (s.phase == BpPhase::RqRetained && now + kTimeEps >= s.rq_created_at + s.retention) {
    s.phase = BpPhase::RpPropagated;
    out.outgoing.push_back({BpMessage::Kind::Rp, obs.self, s.segment, s.rq_created_at, s.cause});
  }
  return out;
}

}  // namespace coopcause
