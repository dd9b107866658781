#pragma once

#include <string_view>
#include <vector>

#include "coopcause/ids.hpp"

namespace coopcause {

enum class Topology { Corridor, Grid };

std::string_view to_string(Topology t);

struct Point {
  double x = 0.0;
  double y = 0.0;
};

double distance(Point a, Point b);

/// One directed single-lane road segment laid out as a straight line.
struct Segment {
  SegmentId id = kNoSegment;
  double length = 0.0;
  double free_flow_speed = 0.0;
  std::vector<SegmentId> upstream;
  std::vector<SegmentId> downstream;
  /// Parallel neighbours in a grid (the same column of the adjacent rows).
  std::vector<SegmentId> lateral;
  Point from;
  Point to;

  double free_flow_time() const { return length / free_flow_speed; }
};

/// Corridor: segments 0..n-1 end to end along the x axis.
/// Grid: `rows` eastbound rows of `cols` segments, rows `length` apart;
/// segment r*cols + c runs from (c*L, r*L) to ((c+1)*L, r*L).
class RoadNetwork {
 public:
  static RoadNetwork corridor(int segments, double length, double speed);
  static RoadNetwork grid(int rows, int cols, double length, double speed);

  Topology topology() const { return topology_; }
  std::size_t size() const { return segments_.size(); }
  const std::vector<Segment>& segments() const { return segments_; }
  const Segment& segment(SegmentId id) const;

  Point position(SegmentId id, double offset) const;
  /// Shortest Euclidean distance from any point of the segment to p.
  double distance_to(SegmentId id, Point p) const;

  /// Segments with no upstream neighbour, in id order.
  std::vector<SegmentId> entries() const;
  /// The straight route from an entry segment to the network edge.
  std::vector<SegmentId> route_from(SegmentId entry) const;

  /// True when `from` equals `to` or reaches it by following downstream links.
  bool leads_to(SegmentId from, SegmentId to) const;
  /// Upstream, downstream and lateral neighbours.
  std::vector<SegmentId> adjacent(SegmentId id) const;
  bool is_adjacent_or_same(SegmentId a, SegmentId b) const;

  /// Throws ConfigError when lengths, speeds or adjacency are inconsistent.
  void validate() const;

 private:
  void build_reachability();

  Topology topology_ = Topology::Corridor;
  std::vector<Segment> segments_;
  std::vector<std::vector<bool>> reaches_;
};

}  // namespace coopcause
