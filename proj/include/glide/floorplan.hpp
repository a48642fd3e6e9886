#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "glide/core.hpp"

namespace glide {

enum class Cell : std::uint8_t { Free, Occupied, Unknown };

struct CellIndex {
  int x = 0;
  int y = 0;
  constexpr bool operator==(const CellIndex&) const = default;
};

/// Row-major occupancy grid. Cell (0,0) is the lower-left cell; its lower-left
/// corner sits at `origin` in world meters. Rows grow along +y.
class OccupancyGrid {
 public:
  OccupancyGrid() = default;
  OccupancyGrid(int width, int height, double resolution, Vec2 origin,
                Cell fill = Cell::Free);

  int width() const { return width_; }
  int height() const { return height_; }
  double resolution() const { return resolution_; }
  Vec2 origin() const { return origin_; }
  std::span<const Cell> cells() const { return cells_; }

  bool contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }
  Cell at(int x, int y) const { return cells_[index(x, y)]; }
  Cell at(CellIndex c) const { return at(c.x, c.y); }
  void set(int x, int y, Cell c) { cells_[index(x, y)] = c; }

  /// Cell containing `p`, or nullopt outside the grid.
  std::optional<CellIndex> cell_of(Vec2 p) const;
  Vec2 center_of(int x, int y) const {
    return {origin_.x + (x + 0.5) * resolution_, origin_.y + (y + 0.5) * resolution_};
  }
  /// Cell type at a world point; points outside the grid report Occupied.
  Cell at_world(Vec2 p) const;
  bool is_free(Vec2 p) const { return at_world(p) == Cell::Free; }

  /// Paints every cell whose center lies in the axis-aligned box [lo, hi].
  void fill_rect(Vec2 lo, Vec2 hi, Cell c);
  /// Paints every cell whose center lies within `radius` of `center`.
  void fill_disc(Vec2 center, double radius, Cell c);

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  bool operator==(const OccupancyGrid&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  double resolution_ = 1.0;
  Vec2 origin_{};
  std::vector<Cell> cells_;
};

/// Exact Euclidean distance (meters) from every cell center to the nearest
/// Occupied cell center, via the separable squared-distance transform.
class DistanceField {
 public:
  DistanceField() = default;
  explicit DistanceField(const OccupancyGrid& grid);
  /// Distance from every cell center to the nearest cell that is not
  /// Occupied; 0 on non-Occupied cells.
  static DistanceField to_open(const OccupancyGrid& grid);

  double at(int x, int y) const { return dist_[static_cast<std::size_t>(y) * width_ + x]; }
  /// Distance at the cell containing `p`; 0 outside the grid.
  double at_world(Vec2 p) const;
  int width() const { return width_; }
  int height() const { return height_; }

 private:
  int width_ = 0;
  int height_ = 0;
  double resolution_ = 1.0;
  Vec2 origin_{};
  std::vector<double> dist_;

  DistanceField(const OccupancyGrid& grid, bool seed_occupied);
};

/// Exact distance from `p` to the boundary of the nearest Occupied cell square
/// within `search_radius`; returns `search_radius` when none is closer.
double clearance_to_occupied(const OccupancyGrid& grid, Vec2 p, double search_radius);

// ---------------------------------------------------------------------------
// Topology

/// Absolute corridor heading quantized to the four axis directions.
enum class Heading : std::uint8_t { East, North, West, South };

double heading_angle(Heading h);
Heading quantize_heading(double angle);
std::string_view to_string(Heading h);
std::optional<Heading> parse_heading(std::string_view s);

enum class RelativeDirection : std::uint8_t { Forward, Left, Right };

std::string_view to_string(RelativeDirection d);
std::optional<RelativeDirection> parse_direction(std::string_view s);

enum class JunctionKind : std::uint8_t { T, L, FourWay };

std::string_view to_string(JunctionKind k);

struct JunctionNode {
  std::string id;
  Vec2 position;
  std::map<Heading, std::string> exits;  // heading -> edge id
};

struct CorridorEdge {
  std::string id;
  std::string from;
  std::string to;
  std::vector<Vec2> polyline;  // starts at `from`, ends at `to`

  double length() const;
};

class JunctionGraph {
 public:
  JunctionGraph() = default;
  JunctionGraph(std::vector<JunctionNode> nodes, std::vector<CorridorEdge> edges);

  const std::vector<JunctionNode>& nodes() const { return nodes_; }
  const std::vector<CorridorEdge>& edges() const { return edges_; }

  const JunctionNode* find_node(std::string_view id) const;
  const CorridorEdge* find_edge(std::string_view id) const;
  const JunctionNode& node(std::string_view id) const;
  const CorridorEdge& edge(std::string_view id) const;

  /// The endpoint of `edge` that is not `node_id`.
  const std::string& other_end(const CorridorEdge& edge, std::string_view node_id) const;

  /// Edge polyline oriented to leave `node_id`.
  std::vector<Vec2> polyline_from(const CorridorEdge& edge, std::string_view node_id) const;

 private:
  std::vector<JunctionNode> nodes_;
  std::vector<CorridorEdge> edges_;
  std::unordered_map<std::string, std::size_t> node_index_;
  std::unordered_map<std::string, std::size_t> edge_index_;
};

struct Destination {
  std::string name;
  Pose2 pose;
  double arrival_tolerance = 0.3;
};

/// Where a destination sits on the graph: at a node, or along an edge at arc
/// length `s` measured from the edge's `from` node.
struct GraphLocation {
  std::string node;  // non-empty when at a node
  std::string edge;  // non-empty when on an edge
  double s = 0.0;

  bool at_node() const { return !node.empty(); }
};

struct ScenarioMap {
  std::string name;
  std::string description;
  OccupancyGrid grid;
  JunctionGraph graph;
  std::vector<Destination> destinations;
};

// ---------------------------------------------------------------------------
// File format

struct MapIssue {
  enum class Severity { Error, Warning };
  Severity severity = Severity::Error;
  std::string message;
};

/// Parses a scenario map document without checking graph invariants.
/// Throws MalformedMap on schema violations.
ScenarioMap parse_map(std::string_view json_text);

/// All invariant violations (errors) and advisories (warnings) for a map.
std::vector<MapIssue> check_map(const ScenarioMap& map);

/// Parse + validate. Throws MalformedMap or InvariantViolation.
ScenarioMap load_map(const std::filesystem::path& path);
ScenarioMap load_map_text(std::string_view json_text);

/// Canonical serialization; `serialize_map(load_map(f))` reproduces canonical files byte for byte.
std::string serialize_map(const ScenarioMap& map);
void save_map(const ScenarioMap& map, const std::filesystem::path& path);

/// Run-length row codec used by the map format ('.' free, '#' occupied, '?' unknown).
std::string encode_row(std::span<const Cell> row);
std::vector<Cell> decode_row(std::string_view text, int expected_width);

/// Content digest of the canonical serialization.
std::string map_digest(const ScenarioMap& map);

// ---------------------------------------------------------------------------
// Queries

/// Relative direction of an absolute exit heading seen from `approach_heading`
/// (direction of travel into the node). Nullopt for the reverse direction.
std::optional<RelativeDirection> relative_direction(double exit_angle, double approach_heading);

/// Directions the traveller may leave `node` by, excluding the way back.
std::vector<RelativeDirection> exits_available(const JunctionNode& node, double approach_heading);

/// Throws NotAJunction when fewer than two onward directions exist, and
/// InvalidApproach when no exit leads back along the approach.
JunctionKind classify_junction(const JunctionNode& node, double approach_heading);

/// Edge id leaving `node` in relative direction `dir`, if any.
std::optional<std::string> exit_edge(const JunctionNode& node, double approach_heading,
                                     RelativeDirection dir);

/// Distance along the ray to the first Occupied cell boundary, or nullopt.
std::optional<double> raycast(const OccupancyGrid& grid, Vec2 origin, double angle,
                              double max_range);

GraphLocation locate_destination(const JunctionGraph& graph, const Destination& dest);

struct DirectionDestinations {
  std::map<RelativeDirection, std::vector<std::string>> by_direction;
  std::vector<std::string> here;  // destinations located at the node itself
};

/// For each onward exit, destination names reachable through it without
/// passing back through `node`. Names keep map declaration order.
DirectionDestinations destinations_by_direction(const JunctionGraph& graph,
                                                const JunctionNode& node,
                                                double approach_heading,
                                                std::span<const Destination> dests);

}  // namespace glide
