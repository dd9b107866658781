#include "coopcause/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "coopcause/error.hpp"

namespace coopcause {

std::string_view to_string(Topology t) { return t == Topology::Corridor ? "corridor" : "grid"; }

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

namespace {

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(what) + " must be positive");
}

}  // namespace

RoadNetwork RoadNetwork::corridor(int segments, double length, double speed) {
  if (segments < 1) throw ConfigError("corridor needs at least one segment");
  require_positive(length, "segment length");
  require_positive(speed, "free-flow speed");
  RoadNetwork net;
  net.topology_ = Topology::Corridor;
  for (int i = 0; i < segments; ++i) {
    Segment s;
    s.id = i;
    s.length = length;
    s.free_flow_speed = speed;
    if (i > 0) s.upstream.push_back(i - 1);
    if (i + 1 < segments) s.downstream.push_back(i + 1);
    s.from = {i * length, 0.0};
    s.to = {(i + 1) * length, 0.0};
    net.segments_.push_back(std::move(s));
  }
  net.build_reachability();
  return net;
}

RoadNetwork RoadNetwork::grid(int rows, int cols, double length, double speed) {
  if (rows < 1 || cols < 1) throw ConfigError("grid needs at least one row and one column");
  require_positive(length, "segment length");
  require_positive(speed, "free-flow speed");
  RoadNetwork net;
  net.topology_ = Topology::Grid;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      Segment s;
      s.id = r * cols + c;
      s.length = length;
      s.free_flow_speed = speed;
      if (c > 0) s.upstream.push_back(s.id - 1);
      if (c + 1 < cols) s.downstream.push_back(s.id + 1);
      if (r > 0) s.lateral.push_back(s.id - cols);
      if (r + 1 < rows) s.lateral.push_back(s.id + cols);
      s.from = {c * length, r * length};
      s.to = {(c + 1) * length, r * length};
      net.segments_.push_back(std::move(s));
    }
  }
  net.build_reachability();
  return net;
}

void RoadNetwork::build_reachability() {
  const std::size_t n = segments_.size();
  reaches_.assign(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<SegmentId> stack{static_cast<SegmentId>(i)};
    while (!stack.empty()) {
      const SegmentId s = stack.back();
      stack.pop_back();
      if (reaches_[i][s]) continue;
      reaches_[i][s] = true;
      for (SegmentId d : segments_[s].downstream) stack.push_back(d);
    }
  }
}

const Segment& RoadNetwork::segment(SegmentId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= segments_.size()) {
    throw ConfigError("segment " + std::to_string(id) + " does not exist");
  }
  return segments_[id];
}

Point RoadNetwork::position(SegmentId id, double offset) const {
  const Segment& s = segment(id);
  const double f = offset / s.length;
  return {s.from.x + f * (s.to.x - s.from.x), s.from.y + f * (s.to.y - s.from.y)};
}

double RoadNetwork::distance_to(SegmentId id, Point p) const {
  const Segment& s = segment(id);
  const double dx = s.to.x - s.from.x;
  const double dy = s.to.y - s.from.y;
  const double len2 = dx * dx + dy * dy;
  double f = ((p.x - s.from.x) * dx + (p.y - s.from.y) * dy) / len2;
  f = std::clamp(f, 0.0, 1.0);
  return distance(p, {s.from.x + f * dx, s.from.y + f * dy});
}

std::vector<SegmentId> RoadNetwork::entries() const {
  std::vector<SegmentId> out;
  for (const auto& s : segments_) {
    if (s.upstream.empty()) out.push_back(s.id);
  }
  return out;
}

std::vector<SegmentId> RoadNetwork::route_from(SegmentId entry) const {
  std::vector<SegmentId> route{entry};
  while (!segment(route.back()).downstream.empty()) route.push_back(segment(route.back()).downstream.front());
  return route;
}

bool RoadNetwork::leads_to(SegmentId from, SegmentId to) const {
  if (from < 0 || to < 0 || static_cast<std::size_t>(from) >= size() || static_cast<std::size_t>(to) >= size()) {
    return false;
  }
  return reaches_[from][to];
}

std::vector<SegmentId> RoadNetwork::adjacent(SegmentId id) const {
  const Segment& s = segment(id);
  std::vector<SegmentId> out = s.upstream;
  out.insert(out.end(), s.downstream.begin(), s.downstream.end());
  out.insert(out.end(), s.lateral.begin(), s.lateral.end());
  std::sort(out.begin(), out.end());
  return out;
}

bool RoadNetwork::is_adjacent_or_same(SegmentId a, SegmentId b) const {
  if (a == b) return true;
  const auto adj = adjacent(a);
  return std::find(adj.begin(), adj.end(), b) != adj.end();
}

void RoadNetwork::validate() const {
  if (segments_.empty()) throw ConfigError("network has no segments");
  for (const auto& s : segments_) {
    require_positive(s.length, "segment length");
    require_positive(s.free_flow_speed, "free-flow speed");
    for (SegmentId d : s.downstream) {
      const auto& up = segment(d).upstream;
      if (std::find(up.begin(), up.end(), s.id) == up.end()) {
        throw ConfigError("segment " + std::to_string(s.id) + " lists " + std::to_string(d) +
                          " downstream but not the reverse");
      }
    }
    for (SegmentId u : s.upstream) {
      const auto& down = segment(u).downstream;
      if (std::find(down.begin(), down.end(), s.id) == down.end()) {
        throw ConfigError("segment " + std::to_string(s.id) + " lists " + std::to_string(u) +
                          " upstream but not the reverse");
      }
    }
  }
}

}  // namespace coopcause
