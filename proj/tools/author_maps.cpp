// Generates the bundled scenario maps. Corridors are carved 2 m wide (or as
// given) around each edge segment, extending one half-width past dead ends.
#include <cstdio>
#include <filesystem>
#include <map>

#include "glide/floorplan.hpp"

using namespace glide;

namespace {

struct Builder {
  std::string name;
  std::string description;
  double width_m;
  double height_m;
  double half_width = 1.0;
  std::map<std::string, Vec2> nodes;
  std::vector<std::string> node_order;
  std::vector<CorridorEdge> edges;
  std::vector<Destination> dests;

  void node(const std::string& id, Vec2 p) {
    nodes[id] = p;
    node_order.push_back(id);
  }
  void edge(const std::string& id, const std::string& from, const std::string& to,
            std::vector<Vec2> via = {}) {
    std::vector<Vec2> poly{nodes.at(from)};
    poly.insert(poly.end(), via.begin(), via.end());
    poly.push_back(nodes.at(to));
    edges.push_back({id, from, to, poly});
  }
  void dest(const std::string& dest_name, const std::string& node_id, double heading) {
    const Vec2 p = nodes.at(node_id);
    dests.push_back({dest_name, {p.x, p.y, heading}, 0.3});
  }

  ScenarioMap build() const {
    const double res = 0.1;
    OccupancyGrid grid(static_cast<int>(width_m / res), static_cast<int>(height_m / res), res, {0, 0},
                       Cell::Occupied);
    for (const auto& e : edges)
      for (std::size_t i = 0; i + 1 < e.polyline.size(); ++i) {
        const Vec2 a = e.polyline[i], b = e.polyline[i + 1];
        grid.fill_rect({std::min(a.x, b.x) - half_width, std::min(a.y, b.y) - half_width},
                       {std::max(a.x, b.x) + half_width, std::max(a.y, b.y) + half_width}, Cell::Free);
      }
    std::vector<JunctionNode> ns;
    for (const auto& id : node_order) {
      JunctionNode n{id, nodes.at(id), {}};
      for (const auto& e : edges) {
        if (e.from == id) {
          const Vec2 d = e.polyline[1] - e.polyline[0];
          n.exits[quantize_heading(std::atan2(d.y, d.x))] = e.id;
        }
        if (e.to == id) {
          const auto m = e.polyline.size();
          const Vec2 d = e.polyline[m - 2] - e.polyline[m - 1];
          n.exits[quantize_heading(std::atan2(d.y, d.x))] = e.id;
        }
      }
      ns.push_back(std::move(n));
    }
    ScenarioMap m;
    m.name = name;
    m.description = description;
    m.grid = std::move(grid);
    m.graph = JunctionGraph(std::move(ns), edges);
    m.destinations = dests;
    return m;
  }
};

ScenarioMap corridor_loop() {
  Builder b{"corridor_loop",
            "Loop course: two left turns, a right turn onto the pillar corridor, then a right turn "
            "to the goal. Dimensions are invented.",
            22.0, 20.0};
  b.node("S", {2, 2});
  b.node("J1", {14, 2});
  b.node("J2", {6, 8});
  b.node("G", {12, 14});
  b.edge("a", "S", "J1");
  b.edge("b", "J1", "J2", {{14, 8}});
  b.edge("c", "J1", "J2", {{18, 2}, {18, 17}, {3, 17}, {3, 8}});
  b.edge("d", "J2", "G", {{6, 14}});
  b.dest("goal", "G", 0.0);
  return b.build();
}

ScenarioMap three_destinations() {
  Builder b{"three_destinations",
            "Three destinations from one start: an L junction leads to two T junctions. The work "
            "area has two entrances. Dimensions are invented.",
            20.0, 18.0};
  b.node("S", {12, 2});
  b.node("J1", {12, 6});
  b.node("J2", {12, 12});
  b.node("J3", {3, 6});
  b.node("WA1", {6, 12});
  b.node("WA2", {3, 15.5});
  b.node("K", {17, 12});
  b.node("L", {3, 2});
  b.edge("s1", "S", "J1");
  b.edge("n1", "J1", "J2");
  b.edge("w1", "J1", "J3");
  b.edge("wa1", "J2", "WA1");
  b.edge("k", "J2", "K");
  b.edge("wa2", "J3", "WA2");
  b.edge("l", "J3", "L");
  b.dest("work area", "WA1", kPi);
  b.dest("work area", "WA2", kPi / 2);
  b.dest("kitchen", "K", 0.0);
  b.dest("lounge", "L", -kPi / 2);
  return b.build();
}

ScenarioMap straight_corridor() {
  Builder b{"straight_corridor", "A 4 m wide, 40 m long straight corridor.", 42.0, 6.0};
  b.half_width = 2.0;
  b.node("A", {3, 3});
  b.node("B", {39, 3});
  b.edge("main", "A", "B");
  b.dest("end", "B", 0.0);
  return b.build();
}

}  // namespace

int main(int argc, char** argv) {
  const std::filesystem::path dir = argc > 1 ? argv[1] : "assets/maps";
  std::filesystem::create_directories(dir);
  for (const auto& m : {corridor_loop(), three_destinations(), straight_corridor()}) {
    for (const auto& issue : check_map(m))
      std::fprintf(stderr, "%s: %s\n", m.name.c_str(), issue.message.c_str());
    save_map(m, dir / (m.name + ".json"));
    std::printf("wrote %s\n", (dir / (m.name + ".json")).string().c_str());
  }
  return 0;
}
