#include "coopcause/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "coopcause/error.hpp"
#include "coopcause/surrogate.hpp"
#include "coopcause/text.hpp"

namespace coopcause {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEps = 1e-9;

std::array<float, kCauseCount> to_floats(const CauseVector& v) {
  std::array<float, kCauseCount> out{};
  for (std::size_t i = 0; i < kCauseCount; ++i) out[i] = static_cast<float>(v.values()[i]);
  return out;
}

std::uint64_t vehicle_segment_key(VehicleId v, SegmentId s) {
  return (static_cast<std::uint64_t>(v) << 16) | static_cast<std::uint64_t>(s);
}

RuleBook book_for(const ScenarioConfig& cfg) {
  const Method m = cfg.method.method;
  return m == Method::DAT || m == Method::BetaDAT ? scenario_rulebook(cfg.classifier) : RuleBook{};
}

}  // namespace

bool detect_excessive_congestion(double observed, double free_flow_time, double factor) {
  return observed > factor * free_flow_time;
}

World::World(const ScenarioConfig& cfg, std::uint64_t seed) : World(cfg, seed, book_for(cfg)) {}

World::World(const ScenarioConfig& cfg, std::uint64_t seed, RuleBook book)
    : cfg_(cfg), seed_(seed), net_(cfg.network.build()), book_(std::move(book)), dt_(cfg.comms.beacon_interval) {
  cfg_.validate();
  setup();
}

void World::setup() {
  const std::size_t n = net_.size();
  lanes_.assign(n, {});
  onset_.assign(n, std::numeric_limits<double>::quiet_NaN());
  last_detection_.assign(n, -kInf);

  LogRecord note;
  note.kind = RecordKind::Setup;
  note.aux = log_.add_note("scenario=" + cfg_.id + ";method=" + std::string(to_string(cfg_.method.method)) +
                           ";seed=" + std::to_string(seed_) +
                           ";penetration=" + text::format_double(cfg_.comms.penetration) +
                           ";horizon=" + text::format_double(cfg_.horizon));
  log_.add(note);
  for (const auto& s : net_.segments()) {
    LogRecord r;
    r.kind = RecordKind::Setup;
    r.segment = static_cast<std::int16_t>(s.id);
    r.a = static_cast<float>(s.length);
    r.b = static_cast<float>(s.free_flow_speed);
    log_.add(r);
  }

  entries_ = net_.entries();
  waiting_.assign(entries_.size(), {});
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    arrival_streams_.emplace_back(seed_, StreamPurpose::Arrivals, k);
    next_arrival_.push_back(cfg_.demand > 0.0 ? arrival_streams_.back().exponential(cfg_.demand) : kInf);
  }

  for (std::size_t i = 0; i < cfg_.events.size(); ++i) {
    const EventSpec& e = cfg_.events[i];
    EventState st{e, std::vector<bool>(n, false), 0.0, RandomStream(seed_, StreamPurpose::SpecialEvent, i), kInf};
    for (SegmentId s : affected_segments(e, net_)) st.affected[s] = true;
    if (e.kind == Cause::SpecialEvent && e.ingress_rate > 0.0) {
      st.next_arrival = e.start + st.arrivals.exponential(e.ingress_rate);
    }
    events_.push_back(std::move(st));
  }

  cell_ = cfg_.comms.range;
  double max_x = 0.0;
  double max_y = 0.0;
  for (const auto& s : net_.segments()) {
    max_x = std::max({max_x, s.from.x, s.to.x});
    max_y = std::max({max_y, s.from.y, s.to.y});
  }
  cells_x_ = static_cast<int>(max_x / cell_) + 1;
  cells_y_ = static_cast<int>(max_y / cell_) + 1;
  cells_.assign(static_cast<std::size_t>(cells_x_) * cells_y_, {});
}

std::size_t World::on_network() const {
  std::size_t n = 0;
  for (const auto& v : vehicles_) n += v.on_network ? 1 : 0;
  return n;
}

std::optional<Cause> World::active_truth(SegmentId segment) const {
  const double t = now();
  for (const auto& e : events_) {
    if (e.spec.active(t) && e.affected[segment]) return e.spec.kind;
  }
  return std::nullopt;
}

double World::speed_factor() const {
  double f = 1.0;
  for (const auto& e : events_) {
    if (e.spec.kind == Cause::Weather && e.spec.active(now())) f *= e.spec.speed_factor;
  }
  return f;
}

double World::gap_factor() const {
  double f = 1.0;
  for (const auto& e : events_) {
    if (e.spec.kind == Cause::Weather && e.spec.active(now())) f *= e.spec.gap_factor;
  }
  return f;
}

Point World::position(const Vehicle& v) const { return net_.position(v.segment(), v.offset); }

VehicleId World::create_vehicle(std::vector<SegmentId> route, bool special) {
  Vehicle v;
  v.id = static_cast<VehicleId>(vehicles_.size());
  v.equipped = RandomStream(seed_, StreamPurpose::Equipment, static_cast<std::uint64_t>(v.id)).uniform() <
               cfg_.comms.penetration;
  v.special = special;
  v.route = std::move(route);
  vehicles_.push_back(std::move(v));
  return vehicles_.back().id;
}

void World::spawn(double t) {
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    while (next_arrival_[k] <= t) {
      waiting_[k].push_back(create_vehicle(net_.route_from(entries_[k]), false));
      next_arrival_[k] += arrival_streams_[k].exponential(cfg_.demand);
    }
  }
  for (std::size_t i = 0; i < events_.size(); ++i) {
    EventState& e = events_[i];
    if (e.spec.kind != Cause::SpecialEvent) continue;
    while (e.next_arrival <= t && e.next_arrival < e.spec.end()) {
      for (std::size_t k = 0; k < entries_.size(); ++k) {
        auto route = net_.route_from(entries_[k]);
        const auto it = std::find(route.begin(), route.end(), e.spec.segment);
        if (it == route.end()) continue;
        route.erase(it + 1, route.end());
        const VehicleId id = create_vehicle(std::move(route), true);
        vehicles_[id].venue = static_cast<int>(i);
        waiting_[k].push_back(id);
        break;
      }
      e.next_arrival += e.arrivals.exponential(e.spec.ingress_rate);
    }
  }
}

World::Leader World::leader_of(const Vehicle& v, std::size_t pos) const {
  const auto& lane = lanes_[v.segment()];
  const double len = cfg_.mobility.vehicle_length;
  if (pos > 0) {
    const int l = lane[pos - 1];
    return {l, vehicles_[l].offset - v.offset - len};
  }
  if (v.leg + 1 < v.route.size()) {
    const auto& next = lanes_[v.route[v.leg + 1]];
    if (!next.empty()) {
      const int l = next.back();
      return {l, net_.segment(v.segment()).length - v.offset + vehicles_[l].offset - len};
    }
  }
  return {-1, kInf};
}

double World::zone_cap(const Vehicle& v) const {
  double cap = kInf;
  const double b = cfg_.mobility.comfortable_decel;
  for (const auto& e : events_) {
    const auto& spec = e.spec;
    if ((spec.kind != Cause::Incident && spec.kind != Cause::Workzone) || !spec.active(now())) continue;
    const double len = net_.segment(spec.segment).length;
    const double zs = zone_start(spec, len);
    double distance = kInf;
    if (v.segment() == spec.segment) {
      if (v.offset >= zs + spec.zone_length()) continue;
      distance = std::max(0.0, zs - v.offset);
    } else if (v.leg + 1 < v.route.size() && v.route[v.leg + 1] == spec.segment) {
      distance = net_.segment(v.segment()).length - v.offset + zs;
    } else {
      continue;
    }
    cap = std::min(cap, std::sqrt(spec.zone_speed * spec.zone_speed + 2.0 * b * distance));
  }
  return cap;
}

void World::move() {
  const auto& mob = cfg_.mobility;
  const double sf = speed_factor();
  const double gf = gap_factor();
  const double t = now();

  std::vector<std::pair<int, double>> updates;
  for (std::size_t s = 0; s < lanes_.size(); ++s) {
    const auto& lane = lanes_[s];
    const Segment& seg = net_.segment(static_cast<SegmentId>(s));
    for (std::size_t k = 0; k < lane.size(); ++k) {
      const Vehicle& v = vehicles_[lane[k]];
      const Leader leader = leader_of(v, k);
      double gap = leader.gap;
      if (k == 0 && v.special && v.leg + 1 == v.route.size() && events_[v.venue].next_service > t) {
        gap = std::min(gap, seg.length - v.offset);
      }
      const double safe = std::isinf(gap) ? kInf : std::max(0.0, (gap - gf * mob.min_gap) / (gf * mob.headway));
      const double speed =
          std::max(0.0, std::min({seg.free_flow_speed * sf, v.speed + mob.max_accel * dt_, safe, zone_cap(v)}));
      updates.emplace_back(lane[k], speed);
    }
  }
  for (const auto& [idx, speed] : updates) {
    Vehicle& v = vehicles_[idx];
    v.speed = speed;
    v.offset += speed * dt_;
  }

  for (std::size_t s = lanes_.size(); s-- > 0;) {
    auto& lane = lanes_[s];
    const double len = net_.segment(static_cast<SegmentId>(s)).length;
    while (!lane.empty() && vehicles_[lane.front()].offset >= len) {
      const int idx = lane.front();
      lane.pop_front();
      Vehicle& v = vehicles_[idx];
      if (v.leg + 1 < v.route.size()) {
        ++v.leg;
        v.offset -= len;
        lanes_[v.segment()].push_back(idx);
        entered_.push_back(idx);
        continue;
      }
      if (v.special) {
        EventState& venue = events_[v.venue];
        venue.next_service = t + 1.0 / venue.spec.service_rate;
      }
      v.offset = len;
      v.on_network = false;
      v.departed = true;
      LogRecord r;
      r.time = t;
      r.vehicle = v.id;
      r.segment = static_cast<std::int16_t>(s);
      r.kind = RecordKind::Departure;
      r.a = static_cast<float>(t - v.network_entered);
      log_.add(r);
    }
  }
}

void World::release_entries() {
  const auto& mob = cfg_.mobility;
  const double gf = gap_factor();
  const double t = now();
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    if (waiting_[k].empty()) continue;
    const auto& lane = lanes_[entries_[k]];
    const double gap = lane.empty() ? kInf : vehicles_[lane.back()].offset - mob.vehicle_length;
    if (gap < gf * mob.min_gap + 0.5) continue;
    const int idx = waiting_[k].front();
    waiting_[k].pop_front();
    Vehicle& v = vehicles_[idx];
    const double desired = net_.segment(entries_[k]).free_flow_speed * speed_factor();
    v.speed = std::isinf(gap) ? desired : std::min(desired, (gap - gf * mob.min_gap) / (gf * mob.headway));
    v.offset = 0.0;
    v.on_network = true;
    v.network_entered = t;
    lanes_[entries_[k]].push_back(idx);
    entered_.push_back(idx);

    LogRecord r;
    r.time = t;
    r.vehicle = v.id;
    r.segment = static_cast<std::int16_t>(entries_[k]);
    r.kind = RecordKind::Arrival;
    r.aux = v.equipped ? 1 : 0;
    r.b = v.special ? 1.0f : 0.0f;
    log_.add(r);
  }
}

void World::enter_segment(Vehicle& v) {
  v.segment_entered = now();
  v.detected = false;
  v.spurious_pending = false;
  if (!v.equipped) return;
  const double rate = cfg_.classifier.spurious_rate;
  if (rate > 0.0) {
    RandomStream rng(seed_, StreamPurpose::Spurious, vehicle_segment_key(v.id, v.segment()));
    v.spurious_pending = rng.uniform() < rate;
  }
  if (is_cooperative(cfg_.method.method) && v.heard.contains(v.segment())) decide(v, v.segment());
}

VehicleId World::place_vehicle(SegmentId segment, double offset, bool equipped) {
  const Segment& seg = net_.segment(segment);
  if (offset < 0.0 || offset > seg.length) throw ConfigError("offset outside the segment");
  std::vector<SegmentId> route{segment};
  while (!net_.segment(route.back()).downstream.empty()) route.push_back(net_.segment(route.back()).downstream.front());
  Vehicle v;
  v.id = static_cast<VehicleId>(vehicles_.size());
  v.equipped = equipped;
  v.route = std::move(route);
  v.offset = offset;
  v.on_network = true;
  v.network_entered = now();
  v.segment_entered = now();
  vehicles_.push_back(std::move(v));
  auto& lane = lanes_[segment];
  auto it = lane.begin();
  while (it != lane.end() && vehicles_[*it].offset > offset) ++it;
  lane.insert(it, vehicles_.back().id);
  rebuild_index();
  return vehicles_.back().id;
}

void World::rebuild_index() {
  pos_.resize(vehicles_.size());
  for (auto& c : cells_) c.clear();
  for (const auto& v : vehicles_) {
    if (!v.on_network || !v.equipped) continue;
    const Point p = position(v);
    pos_[v.id] = p;
    const int cx = std::clamp(static_cast<int>(p.x / cell_), 0, cells_x_ - 1);
    const int cy = std::clamp(static_cast<int>(p.y / cell_), 0, cells_y_ - 1);
    cells_[static_cast<std::size_t>(cy) * cells_x_ + cx].push_back(v.id);
  }
}

std::vector<VehicleId> World::in_range(VehicleId sender) const {
  std::vector<VehicleId> out;
  const Point p = pos_[sender];
  const double range = cfg_.comms.range;
  const int cx = std::clamp(static_cast<int>(p.x / cell_), 0, cells_x_ - 1);
  const int cy = std::clamp(static_cast<int>(p.y / cell_), 0, cells_y_ - 1);
  for (int y = std::max(0, cy - 1); y <= std::min(cells_y_ - 1, cy + 1); ++y) {
    for (int x = std::max(0, cx - 1); x <= std::min(cells_x_ - 1, cx + 1); ++x) {
      for (int id : cells_[static_cast<std::size_t>(y) * cells_x_ + x]) {
        if (id != sender && distance(p, pos_[id]) <= range + kEps) out.push_back(id);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<VehicleId> World::broadcast(VehicleId sender) const {
  if (sender < 0 || static_cast<std::size_t>(sender) >= vehicles_.size()) throw DomainError("unknown sender");
  const Vehicle& v = vehicles_[sender];
  if (!v.equipped) throw DomainError("vehicle " + std::to_string(sender) + " is not equipped and cannot transmit");
  if (!v.on_network) return {};
  return in_range(sender);
}

void World::beacons() {
  gaps_.assign(vehicles_.size(), kNoValue);
  for (const auto& lane : lanes_) {
    for (std::size_t k = 0; k < lane.size(); ++k) {
      const Vehicle& v = vehicles_[lane[k]];
      if (!v.equipped) continue;
      const Leader leader = leader_of(v, k);
      if (leader.index >= 0 && vehicles_[leader.index].equipped &&
          distance(pos_[v.id], pos_[leader.index]) <= cfg_.comms.range + kEps) {
        gaps_[v.id] = static_cast<float>(leader.gap);
      }
    }
  }
  const double t = now();
  for (const auto& v : vehicles_) {
    if (!v.on_network || !v.equipped) continue;
    LogRecord r;
    r.time = t;
    r.vehicle = v.id;
    r.segment = static_cast<std::int16_t>(v.segment());
    r.kind = RecordKind::BeaconStats;
    r.a = static_cast<float>(t - v.segment_entered);
    r.b = static_cast<float>(v.speed);
    r.c = gaps_[v.id];
    r.aux = static_cast<std::int32_t>(in_range(v.id).size());
    log_.add(r);
  }
}

BpObservation World::bp_observation(const Vehicle& v) const {
  BpObservation obs;
  obs.self = v.id;
  obs.free_flow_time = net_.segment(v.segment()).free_flow_time();
  obs.threshold_factor = cfg_.classifier.threshold_factor;
  return obs;
}

void World::detect() {
  const double t = now();
  const double factor = cfg_.classifier.threshold_factor;
  for (auto& v : vehicles_) {
    if (!v.on_network || !v.equipped || v.detected) continue;
    const SegmentId seg = v.segment();
    const double ff = net_.segment(seg).free_flow_time();
    const double tt = t - v.segment_entered;
    const bool real = detect_excessive_congestion(tt, ff, factor);
    if (!real && !v.spurious_pending) continue;
    v.detected = true;
    v.spurious_pending = false;
    // A spurious trigger is a noisy travel-time reading above the threshold.
    const double observed = real ? tt : factor * ff * 1.1;

    LogRecord r;
    r.time = t;
    r.vehicle = v.id;
    r.segment = static_cast<std::int16_t>(seg);
    r.kind = RecordKind::CongestionDetected;
    r.a = static_cast<float>(observed);
    r.aux = real ? 0 : 1;
    log_.add(r);

    if (v.own.contains(seg) || v.bp.contains(seg)) {
      if (cfg_.method.method != Method::BP || v.bp[seg].phase != BpPhase::Idle) continue;
    }
    RandomStream rng(seed_, StreamPurpose::Classifier, vehicle_segment_key(v.id, seg));
    const CauseVector vec = classify_surrogate(active_truth(seg), cfg_.classifier, rng);

    if (cfg_.method.method == Method::BP) {
      auto [it, inserted] = v.bp.try_emplace(seg);
      if (inserted) {
        it->second.segment = seg;
        it->second.retention = cfg_.method.retention;
      }
      BpObservation obs = bp_observation(v);
      obs.travel_time = observed;
      obs.classified = vec.argmax();
      auto result = bp_step(it->second, obs, t);
      it->second = result.state;
      for (const auto& m : result.outgoing) {
        if (m.kind == BpMessage::Kind::Rq && m.origin == v.id) {
          LogRecord init;
          init.time = t;
          init.vehicle = v.id;
          init.segment = static_cast<std::int16_t>(seg);
          init.kind = RecordKind::Initiate;
          init.cause = cause_code(m.cause);
          log_.add(init);
        }
        transmit_bp(v, m);
      }
    } else {
      v.own.emplace(seg, OwnReport{Report::make(v.id, seg, t, vec, cfg_.classifier.ignorance), observed, false, 0.0});
    }
  }
}

void World::update_onsets() {
  std::vector<bool> congested(net_.size(), false);
  for (const auto& v : vehicles_) {
    if (v.on_network && v.equipped && v.detected) congested[v.segment()] = true;
  }
  const double t = now();
  for (std::size_t s = 0; s < congested.size(); ++s) {
    if (!congested[s]) continue;
    const double tolerance = 2.0 * net_.segment(static_cast<SegmentId>(s)).free_flow_time();
    if (std::isnan(onset_[s]) || t - last_detection_[s] > tolerance) onset_[s] = t;
    last_detection_[s] = t;
  }
}

void World::log_decision(const Vehicle& v, const Decision& d, std::size_t reports) {
  LogRecord r;
  r.time = now();
  r.vehicle = v.id;
  r.segment = static_cast<std::int16_t>(d.segment);
  r.aux = v.segment();
  r.kind = RecordKind::Decision;
  r.cause = cause_code(d.cause);
  r.a = static_cast<float>(d.confidence);
  r.c = static_cast<float>(reports);
  log_.add(r);
}

void World::decide(Vehicle& v, SegmentId segment) {
  const auto it = v.heard.find(segment);
  if (it == v.heard.end()) return;
  const double oldest = now() - cfg_.comms.report_horizon;
  std::vector<Report> fresh;
  for (const auto& r : it->second) {
    if (r.timestamp >= oldest - kEps) fresh.push_back(r);
  }
  if (fresh.empty()) return;
  Decision d;
  try {
    switch (cfg_.method.method) {
      case Method::VP:
        d = vp_decide(fresh);
        break;
      case Method::BF:
        d = bf_decide(fresh, cfg_.method.rule);
        break;
      case Method::DAT:
      case Method::BetaDAT:
        d = dat_decide(fresh, book_, cfg_.method.rule, cfg_.method.label_share);
        break;
      case Method::BP:
        return;
    }
  } catch (const DomainError&) {
    return;
  }
  d.method = cfg_.method.method;
  d.decided_at = now();
  d.segment = segment;
  v.decision = d;
  log_decision(v, d, fresh.size());
}

void World::deliver_report(Vehicle& sender, const Report& report) {
  const double t = now();
  for (VehicleId id : in_range(sender.id)) {
    Vehicle& r = vehicles_[id];
    auto& list = r.heard[report.segment];
    const bool known = std::any_of(list.begin(), list.end(), [&](const Report& x) { return x.sender == report.sender; });
    if (known) continue;
    list.push_back(report);
    LogRecord rec;
    rec.time = t;
    rec.vehicle = r.id;
    rec.segment = static_cast<std::int16_t>(report.segment);
    rec.kind = RecordKind::ReportReceived;
    rec.cause = cause_code(report.vector.argmax());
    rec.a = static_cast<float>(report.timestamp);
    rec.aux = sender.id;
    log_.add(rec);
    if (report.segment == r.segment() || net_.leads_to(r.segment(), report.segment)) decide(r, report.segment);
  }
}

void World::communicate() {
  if (cfg_.method.method == Method::BP) {
    communicate_bp();
    return;
  }
  const double t = now();
  for (auto& v : vehicles_) {
    if (!v.on_network || !v.equipped) continue;
    const SegmentId seg = v.segment();
    const auto it = v.own.find(seg);
    if (it == v.own.end()) continue;
    OwnReport& own = it->second;
    if (own.sent && t - own.last_sent < cfg_.comms.report_interval - kEps) continue;
    if (cfg_.method.method == Method::BetaDAT) {
      if (std::isnan(onset_[seg]) || !beta_gate(t, onset_[seg], cfg_.method.beta, own.travel_time)) continue;
    }
    LogRecord sent;
    sent.time = t;
    sent.vehicle = v.id;
    sent.segment = static_cast<std::int16_t>(seg);
    sent.kind = RecordKind::ReportSent;
    sent.cause = cause_code(own.report.vector.argmax());
    sent.a = static_cast<float>(own.report.timestamp);
    sent.aux = log_.add_vector(to_floats(own.report.vector));
    log_.add(sent);
    if (!own.sent) {
      own.sent = true;
      LogRecord init;
      init.time = t;
      init.vehicle = v.id;
      init.segment = static_cast<std::int16_t>(seg);
      init.kind = RecordKind::Initiate;
      init.cause = sent.cause;
      log_.add(init);
      v.heard[seg].push_back(own.report);
      decide(v, seg);
    }
    own.last_sent = t;
    deliver_report(v, own.report);
  }
}

void World::transmit_bp(Vehicle& sender, const BpMessage& first) {
  const double t = now();
  std::deque<std::pair<VehicleId, BpMessage>> queue{{sender.id, first}};
  while (!queue.empty()) {
    const auto [from_id, m] = queue.front();
    queue.pop_front();
    Vehicle& from = vehicles_[from_id];
    LogRecord rec;
    rec.time = t;
    rec.vehicle = from.id;
    rec.segment = static_cast<std::int16_t>(m.segment);
    rec.kind = m.kind == BpMessage::Kind::Rq ? RecordKind::Rq : RecordKind::Rp;
    rec.cause = cause_code(m.cause);
    rec.aux = m.origin;
    rec.a = static_cast<float>(m.created_at);
    rec.b = static_cast<float>(from.segment());
    log_.add(rec);
    from.bp_last_tx[m.segment] = t;

    for (VehicleId id : in_range(from.id)) {
      Vehicle& r = vehicles_[id];
      const SegmentId at = r.segment();
      const bool rq = m.kind == BpMessage::Kind::Rq;
      if (rq ? !net_.leads_to(at, m.segment) : !net_.is_adjacent_or_same(at, m.segment)) continue;
      auto [it, inserted] = r.bp.try_emplace(m.segment);
      BpState& st = it->second;
      if (inserted) {
        st.segment = m.segment;
        st.retention = cfg_.method.retention;
      }
      if (rq && st.phase != BpPhase::Idle) continue;
      if (!rq && st.phase == BpPhase::RpPropagated && st.origin == m.origin && st.rq_created_at == m.created_at &&
          st.cause == m.cause) {
        continue;
      }
      BpObservation obs = bp_observation(r);
      obs.heard = m;
      auto result = bp_step(st, obs, t);
      st = result.state;
      if (!rq) {
        r.bp_last_tx[m.segment] = t;
        const Decision d{m.cause, 1.0, Method::BP, t, m.segment};
        r.decision = d;
        log_decision(r, d, 1);
      }
      for (const auto& out : result.outgoing) {
        if (out.kind == BpMessage::Kind::Rp) {
          const Decision d{out.cause, 1.0, Method::BP, t, out.segment};
          r.decision = d;
          log_decision(r, d, 1);
        }
        queue.emplace_back(r.id, out);
      }
    }
  }
}

void World::communicate_bp() {
  const double t = now();
  const double interval = cfg_.comms.report_interval;
  for (auto& v : vehicles_) {
    if (!v.on_network || !v.equipped) continue;
    for (auto& [seg, st] : v.bp) {
      const double last = v.bp_last_tx.contains(seg) ? v.bp_last_tx[seg] : -kInf;
      if (st.phase == BpPhase::RqRetained && t + 1e-6 >= st.rq_created_at + st.retention) {
        auto result = bp_step(st, bp_observation(v), t);
        st = result.state;
        for (const auto& m : result.outgoing) {
          const Decision d{m.cause, 1.0, Method::BP, t, seg};
          v.decision = d;
          log_decision(v, d, 1);
          transmit_bp(v, m);
        }
      } else if (st.phase == BpPhase::RqRetained && t - last >= interval - kEps) {
        transmit_bp(v, {BpMessage::Kind::Rq, st.origin, seg, st.rq_created_at, st.cause});
      } else if (st.phase == BpPhase::RpPropagated && t - last >= interval - kEps) {
        transmit_bp(v, {BpMessage::Kind::Rp, st.origin, seg, st.rq_created_at, st.cause});
      }
    }
  }
}

void World::step() {
  ++tick_;
  entered_.clear();
  spawn(now());
  move();
  release_entries();
  std::sort(entered_.begin(), entered_.end());
  for (int idx : entered_) enter_segment(vehicles_[idx]);
  rebuild_index();
  beacons();
  detect();
  update_onsets();
  communicate();
}

EventLog run(const ScenarioConfig& cfg, std::uint64_t seed) {
  World w(cfg, seed);
  while (!w.finished()) w.step();
  return w.take_log();
}

EventLog run(const ScenarioConfig& cfg, std::uint64_t seed, const RuleBook& book) {
  World w(cfg, seed, book);
  while (!w.finished()) w.step();
  return w.take_log();
}

}  // namespace coopcause
