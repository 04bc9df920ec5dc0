#pragma once

#include "tamrf/importance.hpp"
#include "tamrf/schema.hpp"

#include <map>
#include <string>
#include <vector>

namespace tamrf {

/// Angles are degrees measured clockwise from 12 o'clock.
struct ChordNode {
  std::string code;
  /// Factor display name for factor-level nodes, the item code otherwise.
  std::string label;
  std::string factor;
  std::string color;
  double arc_start = 0.0;
  double arc_end = 0.0;
  /// Total incident weight (outgoing + incoming).
  double mass = 0.0;

  double span() const noexcept { return arc_end - arc_start; }
};

struct SubArc {
  double start = 0.0;
  double end = 0.0;
  double span() const noexcept { return end - start; }
};

struct Ribbon {
  std::size_t source = 0;
  std::size_t target = 0;
  SubArc source_arc;
  SubArc target_arc;
  double weight = 0.0;
  /// False when weight < min_render_weight; the ribbon keeps its sub-arcs.
  bool visible = true;
};

struct ChordLayout {
  double gap_degrees = 0.0;
  double group_gap_degrees = 0.0;
  /// Degrees of arc per unit of weight, shared by all nodes.
  double degrees_per_weight = 0.0;
  std::vector<ChordNode> nodes;
  std::vector<Ribbon> ribbons;
};

struct LayoutOptions {
  double gap_degrees = 2.0;
  /// Replaces gap_degrees between nodes of different factors.
  double group_gap_degrees = 6.0;
  double min_render_weight = 0.5;
  double start_angle = 0.0;
  /// Allowed |sum - 100| per target; raise it for tables of rounded weights.
  double sum_tolerance = 1e-6;
};

/// Circular layout of a weight table. Nodes are the codes present in the
/// table (item or factor codes), ordered by schema factor and, within a
/// factor, items before the overall item. Arc spans are proportional to node
/// mass; each node's sub-arcs tile its arc, ordered by the peer's clockwise
/// distance (farthest first). Input row order does not matter.
ChordLayout layout(const std::vector<WeightRow>& rows, const ConstructSchema& schema, const LayoutOptions& opts = {});

template <typename Tag>
ChordLayout layout(const WeightTable<Tag>& t, const ConstructSchema& schema, const LayoutOptions& opts = {}) {
  return layout(t.rows(), schema, opts);
}

enum class LabelMode { None, Code, Label };

struct SvgStyle {
  int size_px = 800;
  std::string font_family = "Helvetica, Arial, sans-serif";
  double font_size = 11.0;
  LabelMode labels = LabelMode::Code;
  double ribbon_opacity = 0.65;
  /// Ribbon radius at the source end relative to the arc's inner radius; the
  /// target end meets the arc flush.
  double source_inset = 0.96;
  /// Arc ring thickness as a fraction of the outer radius.
  double arc_thickness = 0.06;
  /// Factor code -> color overrides.
  std::map<std::string, std::string> palette;
};

/// Standalone SVG: one <path class="arc"> per node, one <path class="ribbon">
/// per visible ribbon, optional radial <text> labels. Byte-identical output
/// for identical inputs.
std::string render_svg(const ChordLayout& l, const SvgStyle& style = {});

std::string layout_json(const ChordLayout& l);

}  // namespace tamrf
