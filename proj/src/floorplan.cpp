#include "glide/floorplan.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

namespace glide {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kForwardTolerance = 30.0 * kPi / 180.0;
constexpr double kEndpointTolerance = 1e-6;
constexpr double kAttachRadius = 2.0;

char cell_symbol(Cell c) {
  switch (c) {
    case Cell::Free: return '.';
    case Cell::Occupied: return '#';
    case Cell::Unknown: return '?';
  }
  return '?';
}

}  // namespace

// ---------------------------------------------------------------------------
// OccupancyGrid

OccupancyGrid::OccupancyGrid(int width, int height, double resolution, Vec2 origin, Cell fill)
    : width_(width), height_(height), resolution_(resolution), origin_(origin) {
  if (width <= 0 || height <= 0) throw MalformedMap("grid dimensions must be positive");
  if (!(resolution > 0.0)) throw MalformedMap("grid resolution must be positive");
  cells_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

std::optional<CellIndex> OccupancyGrid::cell_of(Vec2 p) const {
  const double fx = (p.x - origin_.x) / resolution_;
  const double fy = (p.y - origin_.y) / resolution_;
  if (!(fx >= 0.0 && fy >= 0.0)) return std::nullopt;
  const int x = static_cast<int>(std::floor(fx));
  const int y = static_cast<int>(std::floor(fy));
  if (!contains(x, y)) return std::nullopt;
  return CellIndex{x, y};
}

Cell OccupancyGrid::at_world(Vec2 p) const {
  const auto c = cell_of(p);
  return c ? at(*c) : Cell::Occupied;
}

void OccupancyGrid::fill_rect(Vec2 lo, Vec2 hi, Cell c) {
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      const Vec2 p = center_of(x, y);
      if (p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y) set(x, y, c);
    }
  }
}

void OccupancyGrid::fill_disc(Vec2 center, double radius, Cell c) {
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      if (distance(center_of(x, y), center) <= radius) set(x, y, c);
    }
  }
}

// ---------------------------------------------------------------------------
// DistanceField

namespace {

// 1D squared distance transform of a sampled function (Felzenszwalb & Huttenlocher).
// Cells with no obstacle carry kFar, a finite stand-in for infinity.
constexpr double kFar = 1e20;

void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
            std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  int k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  for (int q = 1; q < n; ++q) {
    double s = 0.0;
    while (true) {
      const int p = v[k];
      s = ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) /
          (2.0 * q - 2.0 * p);
      if (s <= z[k] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    if (s <= z[k]) {  // k == 0: q dominates everything so far
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const int p = v[k];
    d[q] = static_cast<double>(q - p) * (q - p) + f[p];
  }
}

}  // namespace

DistanceField::DistanceField(const OccupancyGrid& grid) : DistanceField(grid, true) {}

DistanceField DistanceField::to_open(const OccupancyGrid& grid) { return DistanceField(grid, false); }

DistanceField::DistanceField(const OccupancyGrid& grid, bool seed_occupied)
    : width_(grid.width()),
      height_(grid.height()),
      resolution_(grid.resolution()),
      origin_(grid.origin()) {
  const int w = width_, h = height_;
  dist_.assign(static_cast<std::size_t>(w) * h, kFar);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if ((grid.at(x, y) == Cell::Occupied) == seed_occupied) dist_[grid.index(x, y)] = 0.0;

  const int n = std::max(w, h);
  std::vector<double> f(n), d(n), z(n + 1);
  std::vector<int> v(n);
  // columns
  f.resize(h);
  d.resize(h);
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[y] = dist_[grid.index(x, y)];
    edt_1d(f, d, v, z);
    for (int y = 0; y < h; ++y) dist_[grid.index(x, y)] = d[y];
  }
  // rows
  f.resize(w);
  d.resize(w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) f[x] = dist_[grid.index(x, y)];
    edt_1d(f, d, v, z);
    for (int x = 0; x < w; ++x) dist_[grid.index(x, y)] = d[x];
  }
  for (double& e : dist_) e = e >= kFar / 2.0 ? 1e9 : std::sqrt(e) * resolution_;
}

double DistanceField::at_world(Vec2 p) const {
  const double fx = (p.x - origin_.x) / resolution_;
  const double fy = (p.y - origin_.y) / resolution_;
  if (!(fx >= 0.0 && fy >= 0.0)) return 0.0;
  const int x = static_cast<int>(fx), y = static_cast<int>(fy);
  if (x >= width_ || y >= height_) return 0.0;
  return at(x, y);
}

double clearance_to_occupied(const OccupancyGrid& grid, Vec2 p, double search_radius) {
  const double res = grid.resolution();
  const Vec2 o = grid.origin();
  const int cx = static_cast<int>(std::floor((p.x - o.x) / res));
  const int cy = static_cast<int>(std::floor((p.y - o.y) / res));
  const int r = static_cast<int>(std::ceil(search_radius / res)) + 1;
  double best = search_radius;
  for (int y = cy - r; y <= cy + r; ++y) {
    for (int x = cx - r; x <= cx + r; ++x) {
      if (grid.contains(x, y) && grid.at(x, y) != Cell::Occupied) continue;
      const double x0 = o.x + x * res, x1 = x0 + res;
      const double y0 = o.y + y * res, y1 = y0 + res;
      const double dx = std::max({x0 - p.x, 0.0, p.x - x1});
      const double dy = std::max({y0 - p.y, 0.0, p.y - y1});
      best = std::min(best, std::hypot(dx, dy));
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Enums

double heading_angle(Heading h) {
  switch (h) {
    case Heading::East: return 0.0;
    case Heading::North: return kPi / 2.0;
    case Heading::West: return kPi;
    case Heading::South: return -kPi / 2.0;
  }
  return 0.0;
}

Heading quantize_heading(double angle) {
  const double a = wrap_angle(angle);
  const int q = static_cast<int>(std::lround(a / (kPi / 2.0)));  // -2..2
  switch ((q + 4) % 4) {
    case 0: return Heading::East;
    case 1: return Heading::North;
    case 2: return Heading::West;
    default: return Heading::South;
  }
}

std::string_view to_string(Heading h) {
  switch (h) {
    case Heading::East: return "E";
    case Heading::North: return "N";
    case Heading::West: return "W";
    case Heading::South: return "S";
  }
  return "?";
}

std::optional<Heading> parse_heading(std::string_view s) {
  if (s == "E") return Heading::East;
  if (s == "N") return Heading::North;
  if (s == "W") return Heading::West;
  if (s == "S") return Heading::South;
  return std::nullopt;
}

std::string_view to_string(RelativeDirection d) {
  switch (d) {
    case RelativeDirection::Forward: return "forward";
    case RelativeDirection::Left: return "left";
    case RelativeDirection::Right: return "right";
  }
  return "?";
}

std::optional<RelativeDirection> parse_direction(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "forward" || lower == "straight") return RelativeDirection::Forward;
  if (lower == "left") return RelativeDirection::Left;
  if (lower == "right") return RelativeDirection::Right;
  return std::nullopt;
}

std::string_view to_string(JunctionKind k) {
  switch (k) {
    case JunctionKind::T: return "T";
    case JunctionKind::L: return "L";
    case JunctionKind::FourWay: return "FourWay";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Graph

double CorridorEdge::length() const { return polyline_length(polyline); }

JunctionGraph::JunctionGraph(std::vector<JunctionNode> nodes, std::vector<CorridorEdge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!node_index_.emplace(nodes_[i].id, i).second)
      throw InvariantViolation("duplicate node id '" + nodes_[i].id + "'");
  }
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    if (!edge_index_.emplace(edges_[i].id, i).second)
      throw InvariantViolation("duplicate edge id '" + edges_[i].id + "'");
  }
}

const JunctionNode* JunctionGraph::find_node(std::string_view id) const {
  const auto it = node_index_.find(std::string(id));
  return it == node_index_.end() ? nullptr : &nodes_[it->second];
}

const CorridorEdge* JunctionGraph::find_edge(std::string_view id) const {
  const auto it = edge_index_.find(std::string(id));
  return it == edge_index_.end() ? nullptr : &edges_[it->second];
}

const JunctionNode& JunctionGraph::node(std::string_view id) const {
  const auto* n = find_node(id);
  if (!n) throw DanglingEdge("unknown node '" + std::string(id) + "'");
  return *n;
}

const CorridorEdge& JunctionGraph::edge(std::string_view id) const {
  const auto* e = find_edge(id);
  if (!e) throw DanglingEdge("unknown edge '" + std::string(id) + "'");
  return *e;
}

const std::string& JunctionGraph::other_end(const CorridorEdge& edge,
                                            std::string_view node_id) const {
  if (edge.from == node_id) return edge.to;
  if (edge.to == node_id) return edge.from;
  throw DanglingEdge("edge '" + edge.id + "' is not incident to '" + std::string(node_id) + "'");
}

std::vector<Vec2> JunctionGraph::polyline_from(const CorridorEdge& edge,
                                               std::string_view node_id) const {
  if (edge.from == node_id) return edge.polyline;
  if (edge.to == node_id) return {edge.polyline.rbegin(), edge.polyline.rend()};
  throw DanglingEdge("edge '" + edge.id + "' is not incident to '" + std::string(node_id) + "'");
}

// ---------------------------------------------------------------------------
// Row codec

std::string encode_row(std::span<const Cell> row) {
  std::string out;
  std::size_t i = 0;
  while (i < row.size()) {
    std::size_t j = i;
    while (j < row.size() && row[j] == row[i]) ++j;
    out += std::to_string(j - i);
    out += cell_symbol(row[i]);
    i = j;
  }
  return out;
}

std::vector<Cell> decode_row(std::string_view text, int expected_width) {
  std::vector<Cell> out;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t j = i;
    while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
    if (j == i || j >= text.size()) throw MalformedMap("bad run-length row '" + std::string(text) + "'");
    const long count = std::stol(std::string(text.substr(i, j - i)));
    Cell c;
    switch (text[j]) {
      case '.': c = Cell::Free; break;
      case '#': c = Cell::Occupied; break;
      case '?': c = Cell::Unknown; break;
      default: throw MalformedMap(std::string("bad cell symbol '") + text[j] + "'");
    }
    if (count <= 0) throw MalformedMap("run length must be positive");
    out.insert(out.end(), static_cast<std::size_t>(count), c);
    i = j + 1;
  }
  if (static_cast<int>(out.size()) != expected_width)
    throw MalformedMap("row decodes to " + std::to_string(out.size()) + " cells, expected " +
                       std::to_string(expected_width));
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

void require_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                  std::string_view what) {
  if (!obj.is_object()) throw MalformedMap(std::string(what) + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw MalformedMap("unknown key '" + key + "' in " + std::string(what));
  }
}

template <typename T>
T get_field(const json& obj, const char* key, std::string_view what) {
  if (!obj.contains(key)) throw MalformedMap("missing '" + std::string(key) + "' in " + std::string(what));
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw MalformedMap("bad '" + std::string(key) + "' in " + std::string(what) + ": " + e.what());
  }
}

Vec2 get_point(const json& j, std::string_view what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw MalformedMap(std::string(what) + " must be [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

ScenarioMap parse_map(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw MalformedMap(std::string("not valid JSON: ") + e.what());
  }
  require_keys(doc, {"format", "name", "description", "grid", "nodes", "edges", "destinations"}, "map");
  if (get_field<std::string>(doc, "format", "map") != "glide-map/1")
    throw MalformedMap("unsupported map format");

  ScenarioMap map;
  map.name = get_field<std::string>(doc, "name", "map");
  if (doc.contains("description")) map.description = get_field<std::string>(doc, "description", "map");

  const json& g = doc.contains("grid") ? doc.at("grid") : throw MalformedMap("missing 'grid'");
  require_keys(g, {"width", "height", "resolution", "origin", "rows"}, "grid");
  const int w = get_field<int>(g, "width", "grid");
  const int h = get_field<int>(g, "height", "grid");
  const double res = get_field<double>(g, "resolution", "grid");
  const Vec2 origin = get_point(g.contains("origin") ? g.at("origin") : json{}, "grid.origin");
  map.grid = OccupancyGrid(w, h, res, origin);
  const auto rows = get_field<std::vector<std::string>>(g, "rows", "grid");
  if (static_cast<int>(rows.size()) != h)
    throw MalformedMap("grid has " + std::to_string(rows.size()) + " rows, expected " + std::to_string(h));
  for (int r = 0; r < h; ++r) {
    const auto row = decode_row(rows[r], w);
    const int y = h - 1 - r;  // first row in the file is the top of the map
    for (int x = 0; x < w; ++x) map.grid.set(x, y, row[x]);
  }

  std::vector<JunctionNode> nodes;
  for (const auto& jn : get_field<json>(doc, "nodes", "map")) {
    require_keys(jn, {"id", "position", "exits"}, "node");
    JunctionNode n;
    n.id = get_field<std::string>(jn, "id", "node");
    n.position = get_point(jn.contains("position") ? jn.at("position") : json{}, "node.position");
    const json exits = get_field<json>(jn, "exits", "node");
    if (!exits.is_object()) throw MalformedMap("node.exits must be an object");
    for (const auto& [key, val] : exits.items()) {
      const auto hd = parse_heading(key);
      if (!hd) throw MalformedMap("bad exit heading '" + key + "' on node '" + n.id + "'");
      if (!val.is_string()) throw MalformedMap("exit edge id must be a string");
      n.exits[*hd] = val.get<std::string>();
    }
    nodes.push_back(std::move(n));
  }

  std::vector<CorridorEdge> edges;
  for (const auto& je : get_field<json>(doc, "edges", "map")) {
    require_keys(je, {"id", "from", "to", "polyline"}, "edge");
    CorridorEdge e;
    e.id = get_field<std::string>(je, "id", "edge");
    e.from = get_field<std::string>(je, "from", "edge");
    e.to = get_field<std::string>(je, "to", "edge");
    for (const auto& p : get_field<json>(je, "polyline", "edge")) e.polyline.push_back(get_point(p, "polyline point"));
    edges.push_back(std::move(e));
  }
  try {
    map.graph = JunctionGraph(std::move(nodes), std::move(edges));
  } catch (const InvariantViolation& e) {
    throw MalformedMap(e.what());
  }

  for (const auto& jd : get_field<json>(doc, "destinations", "map")) {
    require_keys(jd, {"name", "pose", "arrival_tolerance"}, "destination");
    Destination d;
    d.name = get_field<std::string>(jd, "name", "destination");
    const auto pose = get_field<std::vector<double>>(jd, "pose", "destination");
    if (pose.size() != 3) throw MalformedMap("destination pose must be [x, y, theta]");
    d.pose = {pose[0], pose[1], pose[2]};
    d.arrival_tolerance = get_field<double>(jd, "arrival_tolerance", "destination");
    map.destinations.push_back(std::move(d));
  }
  return map;
}

// ---------------------------------------------------------------------------
// Validation

namespace {

bool segment_free(const OccupancyGrid& grid, Vec2 a, Vec2 b) {
  const double len = distance(a, b);
  const double step = grid.resolution() / 4.0;
  const int n = std::max(1, static_cast<int>(std::ceil(len / step)));
  for (int i = 0; i <= n; ++i) {
    if (!grid.is_free(a + (b - a) * (static_cast<double>(i) / n))) return false;
  }
  return true;
}

std::string fmt_point(Vec2 p) {
  std::ostringstream os;
  os << "(" << p.x << ", " << p.y << ")";
  return os.str();
}

}  // namespace

std::vector<MapIssue> check_map(const ScenarioMap& map) {
  std::vector<MapIssue> issues;
  auto error = [&](std::string m) { issues.push_back({MapIssue::Severity::Error, std::move(m)}); };
  auto warn = [&](std::string m) { issues.push_back({MapIssue::Severity::Warning, std::move(m)}); };

  const auto& grid = map.grid;
  const auto& graph = map.graph;

  bool closed = true;
  for (int x = 0; x < grid.width() && closed; ++x)
    closed = grid.at(x, 0) == Cell::Occupied && grid.at(x, grid.height() - 1) == Cell::Occupied;
  for (int y = 0; y < grid.height() && closed; ++y)
    closed = grid.at(0, y) == Cell::Occupied && grid.at(grid.width() - 1, y) == Cell::Occupied;
  if (!closed) warn("grid border is not fully occupied (open world)");

  for (const auto& n : graph.nodes()) {
    if (n.exits.empty() || n.exits.size() > 4)
      error("node '" + n.id + "' has " + std::to_string(n.exits.size()) + " exits (expected 1-4)");
    if (!grid.is_free(n.position)) error("node '" + n.id + "' at " + fmt_point(n.position) + " is not in free space");
    for (const auto& [hd, eid] : n.exits) {
      const auto* e = graph.find_edge(eid);
      if (!e) {
        error("node '" + n.id + "' exit " + std::string(to_string(hd)) + " references missing edge '" + eid + "'");
      } else if (e->from != n.id && e->to != n.id) {
        error("node '" + n.id + "' exit references edge '" + eid + "' that does not touch it");
      }
    }
  }

  for (const auto& e : graph.edges()) {
    const auto* from = graph.find_node(e.from);
    const auto* to = graph.find_node(e.to);
    if (!from) error("edge '" + e.id + "' references missing node '" + e.from + "'");
    if (!to) error("edge '" + e.id + "' references missing node '" + e.to + "'");
    if (e.polyline.size() < 2) {
      error("edge '" + e.id + "' polyline needs at least two points");
      continue;
    }
    for (std::size_t i = 0; i + 1 < e.polyline.size(); ++i) {
      if (!segment_free(grid, e.polyline[i], e.polyline[i + 1])) {
        error("edge '" + e.id + "' segment " + fmt_point(e.polyline[i]) + "-" +
              fmt_point(e.polyline[i + 1]) + " leaves free space");
        break;
      }
    }
    auto check_end = [&](const JunctionNode* n, Vec2 end, Vec2 next) {
      if (!n) return;
      if (distance(n->position, end) > kEndpointTolerance) {
        error("edge '" + e.id + "' does not start/end at node '" + n->id + "'");
        return;
      }
      const Vec2 d = next - end;
      const Heading hd = quantize_heading(std::atan2(d.y, d.x));
      const auto it = n->exits.find(hd);
      if (it == n->exits.end() || it->second != e.id)
        error("node '" + n->id + "' has no exit " + std::string(to_string(hd)) + " for edge '" + e.id + "'");
    };
    check_end(from, e.polyline.front(), e.polyline[1]);
    check_end(to, e.polyline.back(), e.polyline[e.polyline.size() - 2]);
  }

  // connectivity from the first node
  std::set<std::string> seen;
  if (!graph.nodes().empty()) {
    std::deque<std::string> q{graph.nodes().front().id};
    seen.insert(q.front());
    while (!q.empty()) {
      const auto id = q.front();
      q.pop_front();
      for (const auto& [hd, eid] : graph.node(id).exits) {
        const auto* e = graph.find_edge(eid);
        if (!e || !graph.find_node(e->from) || !graph.find_node(e->to)) continue;
        if (e->from != id && e->to != id) continue;
        const auto& other = graph.other_end(*e, id);
        if (seen.insert(other).second) q.push_back(other);
      }
    }
    if (seen.size() != graph.nodes().size()) warn("junction graph is not connected");
  }

  for (const auto& d : map.destinations) {
    if (!(d.arrival_tolerance > 0.0)) error("destination '" + d.name + "' arrival_tolerance must be positive");
    if (!grid.is_free(d.pose.position())) error("destination '" + d.name + "' is not in free space");
    const auto loc = locate_destination(graph, d);
    if (!loc.at_node() && loc.edge.empty()) {
      warn("destination '" + d.name + "' is unreachable: not on any corridor");
    } else {
      const std::string anchor = loc.at_node() ? loc.node : graph.edge(loc.edge).from;
      if (!seen.empty() && !seen.count(anchor))
        warn("destination '" + d.name + "' is unreachable from node '" + graph.nodes().front().id + "'");
    }
  }
  return issues;
}

ScenarioMap load_map_text(std::string_view json_text) {
  if (json_text.find_first_not_of(" \t\r\n") == std::string_view::npos)
    throw MalformedMap("map document is empty");
  ScenarioMap map = parse_map(json_text);
  for (const auto& issue : check_map(map)) {
    if (issue.severity == MapIssue::Severity::Error) throw InvariantViolation(issue.message);
  }
  return map;
}

ScenarioMap load_map(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MalformedMap("cannot read map file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_map_text(ss.str());
}

std::string serialize_map(const ScenarioMap& map) {
  ordered_json doc;
  doc["format"] = "glide-map/1";
  doc["name"] = map.name;
  doc["description"] = map.description;
  const auto& g = map.grid;
  ordered_json grid;
  grid["width"] = g.width();
  grid["height"] = g.height();
  grid["resolution"] = g.resolution();
  grid["origin"] = {g.origin().x, g.origin().y};
  ordered_json rows = ordered_json::array();
  for (int y = g.height() - 1; y >= 0; --y) {
    rows.push_back(encode_row(g.cells().subspan(g.index(0, y), static_cast<std::size_t>(g.width()))));
  }
  grid["rows"] = std::move(rows);
  doc["grid"] = std::move(grid);

  ordered_json nodes = ordered_json::array();
  for (const auto& n : map.graph.nodes()) {
    ordered_json jn;
    jn["id"] = n.id;
    jn["position"] = {n.position.x, n.position.y};
    ordered_json exits = ordered_json::object();
    for (const auto& [hd, eid] : n.exits) exits[std::string(to_string(hd))] = eid;
    jn["exits"] = std::move(exits);
    nodes.push_back(std::move(jn));
  }
  doc["nodes"] = std::move(nodes);

  ordered_json edges = ordered_json::array();
  for (const auto& e : map.graph.edges()) {
    ordered_json je;
    je["id"] = e.id;
    je["from"] = e.from;
    je["to"] = e.to;
    ordered_json pts = ordered_json::array();
    for (const auto& p : e.polyline) pts.push_back({p.x, p.y});
    je["polyline"] = std::move(pts);
    edges.push_back(std::move(je));
  }
  doc["edges"] = std::move(edges);

  ordered_json dests = ordered_json::array();
  for (const auto& d : map.destinations) {
    ordered_json jd;
    jd["name"] = d.name;
    jd["pose"] = {d.pose.x, d.pose.y, d.pose.theta};
    jd["arrival_tolerance"] = d.arrival_tolerance;
    dests.push_back(std::move(jd));
  }
  doc["destinations"] = std::move(dests);
  return doc.dump(2) + "\n";
}

void save_map(const ScenarioMap& map, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MalformedMap("cannot write map file '" + path.string() + "'");
  out << serialize_map(map);
}

std::string map_digest(const ScenarioMap& map) { return hex64(fnv1a(serialize_map(map))); }

// ---------------------------------------------------------------------------
// Queries

std::optional<RelativeDirection> relative_direction(double exit_angle, double approach_heading) {
  const double r = wrap_angle(exit_angle - approach_heading);
  if (std::abs(r) <= kForwardTolerance) return RelativeDirection::Forward;
  if (std::abs(r) >= kPi - kForwardTolerance) return std::nullopt;
  return r > 0.0 ? RelativeDirection::Left : RelativeDirection::Right;
}

std::vector<RelativeDirection> exits_available(const JunctionNode& node, double approach_heading) {
  std::vector<RelativeDirection> out;
  for (const auto& [hd, eid] : node.exits) {
    if (const auto d = relative_direction(heading_angle(hd), approach_heading)) out.push_back(*d);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

JunctionKind classify_junction(const JunctionNode& node, double approach_heading) {
  const bool has_back = std::any_of(node.exits.begin(), node.exits.end(), [&](const auto& kv) {
    return !relative_direction(heading_angle(kv.first), approach_heading).has_value();
  });
  if (!has_back)
    throw InvalidApproach("approach does not arrive along any corridor of node '" + node.id + "'");
  const auto opts = exits_available(node, approach_heading);
  auto has = [&](RelativeDirection d) { return std::find(opts.begin(), opts.end(), d) != opts.end(); };
  const bool f = has(RelativeDirection::Forward), l = has(RelativeDirection::Left),
             r = has(RelativeDirection::Right);
  if (f && l && r) return JunctionKind::FourWay;
  if (!f && l && r) return JunctionKind::T;
  if (f && (l || r)) return JunctionKind::L;
  throw NotAJunction("node '" + node.id + "' offers no choice from this approach");
}

std::optional<std::string> exit_edge(const JunctionNode& node, double approach_heading,
                                     RelativeDirection dir) {
  for (const auto& [hd, eid] : node.exits) {
    if (relative_direction(heading_angle(hd), approach_heading) == dir) return eid;
  }
  return std::nullopt;
}

std::optional<double> raycast(const OccupancyGrid& grid, Vec2 origin, double angle,
                              double max_range) {
  const auto start = grid.cell_of(origin);
  if (!start || grid.at(*start) == Cell::Occupied)
    throw OriginOccupied("ray origin " + fmt_point(origin) + " is not in free space");
  const double res = grid.resolution();
  const Vec2 o = grid.origin();
  const double dx = std::cos(angle), dy = std::sin(angle);
  int x = start->x, y = start->y;
  const int step_x = dx > 0 ? 1 : -1;
  const int step_y = dy > 0 ? 1 : -1;
  const double next_x = o.x + (x + (step_x > 0 ? 1 : 0)) * res;
  const double next_y = o.y + (y + (step_y > 0 ? 1 : 0)) * res;
  double t_max_x = std::abs(dx) > 1e-12 ? (next_x - origin.x) / dx : kInf;
  double t_max_y = std::abs(dy) > 1e-12 ? (next_y - origin.y) / dy : kInf;
  const double t_delta_x = std::abs(dx) > 1e-12 ? res / std::abs(dx) : kInf;
  const double t_delta_y = std::abs(dy) > 1e-12 ? res / std::abs(dy) : kInf;
  while (true) {
    double t;
    if (t_max_x < t_max_y) {
      t = t_max_x;
      x += step_x;
      t_max_x += t_delta_x;
    } else {
      t = t_max_y;
      y += step_y;
      t_max_y += t_delta_y;
    }
    if (t > max_range) return std::nullopt;
    if (!grid.contains(x, y)) return std::nullopt;
    if (grid.at(x, y) == Cell::Occupied) return std::max(0.0, t);
  }
}

GraphLocation locate_destination(const JunctionGraph& graph, const Destination& dest) {
  const Vec2 p = dest.pose.position();
  const double node_radius = std::max(dest.arrival_tolerance, 0.5);
  const JunctionNode* best_node = nullptr;
  double best_node_d = kInf;
  for (const auto& n : graph.nodes()) {
    const double d = distance(n.position, p);
    if (d < best_node_d) {
      best_node_d = d;
      best_node = &n;
    }
  }
  if (best_node && best_node_d <= node_radius) return {best_node->id, "", 0.0};
  GraphLocation loc;
  double best = kAttachRadius;
  for (const auto& e : graph.edges()) {
    const auto proj = project_onto_polyline(e.polyline, p);
    if (proj.distance < best) {
      best = proj.distance;
      loc = {"", e.id, proj.s};
    }
  }
  return loc;
}

DirectionDestinations destinations_by_direction(const JunctionGraph& graph,
                                                const JunctionNode& node,
                                                double approach_heading,
                                                std::span<const Destination> dests) {
  std::vector<GraphLocation> locs;
  locs.reserve(dests.size());
  for (const auto& d : dests) locs.push_back(locate_destination(graph, d));

  auto add_unique = [](std::vector<std::string>& v, const std::string& name) {
    if (std::find(v.begin(), v.end(), name) == v.end()) v.push_back(name);
  };

  DirectionDestinations out;
  for (std::size_t i = 0; i < dests.size(); ++i) {
    if (locs[i].node == node.id) add_unique(out.here, dests[i].name);
  }

  for (const auto& [hd, eid] : node.exits) {
    const auto dir = relative_direction(heading_angle(hd), approach_heading);
    if (!dir) continue;
    const auto& first = graph.edge(eid);
    std::set<std::string> nodes_seen;
    std::set<std::string> edges_seen{first.id};
    std::deque<std::string> q;
    const auto& start = graph.other_end(first, node.id);
    if (start != node.id) {
      nodes_seen.insert(start);
      q.push_back(start);
    }
    while (!q.empty()) {
      const std::string id = q.front();
      q.pop_front();
      for (const auto& [h2, e2] : graph.node(id).exits) {
        const auto& edge = graph.edge(e2);
        edges_seen.insert(edge.id);
        const auto& other = graph.other_end(edge, id);
        if (other == node.id) continue;
        if (nodes_seen.insert(other).second) q.push_back(other);
      }
    }
    auto& names = out.by_direction[*dir];
    for (std::size_t i = 0; i < dests.size(); ++i) {
      const auto& loc = locs[i];
      const bool hit = loc.at_node() ? nodes_seen.count(loc.node) > 0
                                     : (!loc.edge.empty() && edges_seen.count(loc.edge) > 0);
      if (hit) add_unique(names, dests[i].name);
    }
  }
  return out;
}

}  // namespace glide
