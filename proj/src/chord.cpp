#include "tamrf/chord.hpp"

#include "tamrf/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <tuple>

#include <fmt/format.h>

namespace tamrf {

namespace {

struct NodeKey {
  std::size_t factor = 0;
  std::size_t position = 0;
};

NodeKey node_key(const ConstructSchema& schema, const std::string& code, const FactorDef** factor) {
  const auto& fs = schema.factors();
  for (std::size_t i = 0; i < fs.size(); ++i) {
    const auto& f = fs[i];
    if (f.code == code) {
      *factor = &f;
      return {i, 0};
    }
    for (std::size_t k = 0; k < f.item_codes.size(); ++k)
      if (f.item_codes[k] == code) {
        *factor = &f;
        return {i, k + 1};
      }
    if (f.overall_item == code) {
      *factor = &f;
      return {i, f.item_codes.size() + 1};
    }
  }
  throw DataError(fmt::format("chord layout: code {} is neither a factor nor an item of the schema", code));
}

struct Endpoint {
  std::size_t ribbon;
  bool outgoing;
  std::size_t distance;
};

}  // namespace

ChordLayout layout(const std::vector<WeightRow>& input, const ConstructSchema& schema, const LayoutOptions& opts) {
  if (!(opts.gap_degrees >= 0.0) || !(opts.group_gap_degrees >= 0.0))
    throw ConfigError("chord layout: gaps must be nonnegative");

  std::vector<WeightRow> rows;
  std::map<std::string, double> target_totals;
  for (const auto& r : input) {
    if (!(r.weight >= 0.0) || !std::isfinite(r.weight))
      throw DataError(fmt::format("chord layout: invalid weight {} for ({}, {})", r.weight, r.predictor, r.target));
    target_totals[r.target] += r.weight;
    if (r.weight > 0.0) rows.push_back(r);
  }
  for (const auto& [t, s] : target_totals)
    if (std::abs(s - 100.0) > opts.sum_tolerance)
      throw DataError(fmt::format("chord layout: weights for target {} sum to {}, expected 100", t, s));
  if (rows.empty()) throw DataError("chord layout: no positive weights");
  std::sort(rows.begin(), rows.end(), [](const WeightRow& a, const WeightRow& b) {
    return std::tie(a.target, a.predictor) < std::tie(b.target, b.predictor);
  });
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].target == rows[i - 1].target && rows[i].predictor == rows[i - 1].predictor)
      throw DataError(fmt::format("chord layout: duplicate row ({}, {})", rows[i].predictor, rows[i].target));

  // Nodes in schema order.
  struct Pending {
    NodeKey key;
    std::string code;
    const FactorDef* factor;
  };
  std::vector<Pending> pending;
  auto add_code = [&](const std::string& code) {
    if (std::any_of(pending.begin(), pending.end(), [&](const Pending& p) { return p.code == code; })) return;
    const FactorDef* f = nullptr;
    const auto key = node_key(schema, code, &f);
    pending.push_back({key, code, f});
  };
  for (const auto& r : rows) {
    add_code(r.predictor);
    add_code(r.target);
  }
  std::sort(pending.begin(), pending.end(), [](const Pending& a, const Pending& b) {
    return std::tie(a.key.factor, a.key.position) < std::tie(b.key.factor, b.key.position);
  });

  ChordLayout l;
  l.gap_degrees = opts.gap_degrees;
  l.group_gap_degrees = opts.group_gap_degrees;
  std::map<std::string, std::size_t> index;
  for (const auto& p : pending) {
    index[p.code] = l.nodes.size();
    ChordNode n;
    n.code = p.code;
    n.label = p.key.position == 0 ? p.factor->display_name : p.code;
    n.factor = p.factor->code;
    n.color = p.factor->color;
    l.nodes.push_back(std::move(n));
  }
  const std::size_t n_nodes = l.nodes.size();

  for (const auto& r : rows) {
    Ribbon rb;
    rb.source = index.at(r.predictor);
    rb.target = index.at(r.target);
    rb.weight = r.weight;
    rb.visible = r.weight >= opts.min_render_weight;
    l.nodes[rb.source].mass += r.weight;
    l.nodes[rb.target].mass += r.weight;
    l.ribbons.push_back(rb);
  }

  std::vector<double> gap_after(n_nodes);
  double total_gap = 0.0, total_mass = 0.0;
  for (std::size_t i = 0; i < n_nodes; ++i) {
    const auto& next = l.nodes[(i + 1) % n_nodes];
    gap_after[i] = next.factor == l.nodes[i].factor ? opts.gap_degrees : opts.group_gap_degrees;
    total_gap += gap_after[i];
    total_mass += l.nodes[i].mass;
  }
  if (total_gap >= 360.0)
    throw ConfigError(fmt::format("chord layout: gaps total {} degrees, leaving no room for arcs", total_gap));
  l.degrees_per_weight = (360.0 - total_gap) / total_mass;

  double angle = opts.start_angle;
  for (std::size_t i = 0; i < n_nodes; ++i) {
    auto& n = l.nodes[i];
    n.arc_start = angle;
    n.arc_end = angle + n.mass * l.degrees_per_weight;
    angle = n.arc_end + gap_after[i];
  }

  std::vector<std::vector<Endpoint>> ends(n_nodes);
  for (std::size_t k = 0; k < l.ribbons.size(); ++k) {
    const auto& rb = l.ribbons[k];
    const auto dist = [&](std::size_t from, std::size_t to) {
      return from == to ? n_nodes : (to + n_nodes - from) % n_nodes;
    };
    ends[rb.source].push_back({k, true, dist(rb.source, rb.target)});
    ends[rb.target].push_back({k, false, dist(rb.target, rb.source)});
  }
  for (std::size_t i = 0; i < n_nodes; ++i) {
    auto& e = ends[i];
    std::sort(e.begin(), e.end(), [](const Endpoint& a, const Endpoint& b) {
      if (a.distance != b.distance) return a.distance > b.distance;
      if (a.outgoing != b.outgoing) return a.outgoing;
      return a.ribbon < b.ribbon;
    });
    double pos = l.nodes[i].arc_start;
    for (std::size_t k = 0; k < e.size(); ++k) {
      auto& rb = l.ribbons[e[k].ribbon];
      // The last sub-arc ends exactly at arc_end so tiling has no drift.
      const double end = k + 1 == e.size() ? l.nodes[i].arc_end : pos + rb.weight * l.degrees_per_weight;
      (e[k].outgoing ? rb.source_arc : rb.target_arc) = SubArc{pos, end};
      pos = end;
    }
  }
  return l;
}

// ---------------------------------------------------------------------------
// SVG

namespace {

std::string num(double v) {
  auto s = fmt::format("{:.3f}", v);
  if (s == "-0.000") s = "0.000";
  return s;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

struct Canvas {
  double cx, cy;
  std::string point(double deg, double radius) const {
    const double a = deg * std::numbers::pi / 180.0;
    return num(cx + radius * std::sin(a)) + "," + num(cy - radius * std::cos(a));
  }
};

int large_arc(double span) { return span > 180.0 ? 1 : 0; }

}  // namespace

std::string render_svg(const ChordLayout& l, const SvgStyle& style) {
  const double size = style.size_px;
  const Canvas cv{size / 2.0, size / 2.0};
  const double margin = style.labels == LabelMode::None ? 0.02 * size : 0.14 * size;
  const double outer = size / 2.0 - margin;
  const double inner = outer * (1.0 - style.arc_thickness);
  const double src_r = inner * style.source_inset;
  const std::string center = num(cv.cx) + "," + num(cv.cy);

  auto color_of = [&](const ChordNode& n) {
    const auto it = style.palette.find(n.factor);
    return it != style.palette.end() ? it->second : n.color;
  };

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{0}\" viewBox=\"0 0 {0} {0}\">\n",
      style.size_px);
  out += fmt::format("<rect width=\"{0}\" height=\"{0}\" fill=\"#ffffff\"/>\n", style.size_px);

  // Light ribbons first so heavy ones stay on top.
  std::vector<std::size_t> order;
  for (std::size_t k = 0; k < l.ribbons.size(); ++k)
    if (l.ribbons[k].visible) order.push_back(k);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return l.ribbons[a].weight < l.ribbons[b].weight; });

  out += "<g class=\"ribbons\">\n";
  for (auto k : order) {
    const auto& rb = l.ribbons[k];
    const auto& s = rb.source_arc;
    const auto& t = rb.target_arc;
    out += fmt::format(
        "<path class=\"ribbon\" data-source=\"{}\" data-target=\"{}\" data-weight=\"{}\" fill=\"{}\" "
        "fill-opacity=\"{}\" d=\"M{} A{},{} 0 {} 1 {} C{} {} {} A{},{} 0 {} 1 {} C{} {} {} Z\"><title>{} to {}: "
        "{}%</title></path>\n",
        xml_escape(l.nodes[rb.source].code), xml_escape(l.nodes[rb.target].code), fmt::format("{:.4f}", rb.weight),
        color_of(l.nodes[rb.source]), num(style.ribbon_opacity), cv.point(s.start, src_r), num(src_r), num(src_r),
        large_arc(s.span()), cv.point(s.end, src_r), center, center, cv.point(t.start, inner), num(inner), num(inner),
        large_arc(t.span()), cv.point(t.end, inner), center, center, cv.point(s.start, src_r),
        xml_escape(l.nodes[rb.source].code), xml_escape(l.nodes[rb.target].code), fmt::format("{:.2f}", rb.weight));
  }
  out += "</g>\n<g class=\"arcs\">\n";
  for (const auto& n : l.nodes) {
    out += fmt::format(
        "<path class=\"arc\" data-code=\"{}\" fill=\"{}\" stroke=\"#ffffff\" stroke-width=\"0.5\" "
        "d=\"M{} A{},{} 0 {} 1 {} L{} A{},{} 0 {} 0 {} Z\"/>\n",
        xml_escape(n.code), color_of(n), cv.point(n.arc_start, outer), num(outer), num(outer), large_arc(n.span()),
        cv.point(n.arc_end, outer), cv.point(n.arc_end, inner), num(inner), num(inner), large_arc(n.span()),
        cv.point(n.arc_start, inner));
  }
  out += "</g>\n";

  if (style.labels != LabelMode::None) {
    out += fmt::format("<g class=\"labels\" font-family=\"{}\" font-size=\"{}\" fill=\"#222222\">\n",
                       xml_escape(style.font_family), num(style.font_size));
    for (const auto& n : l.nodes) {
      const double mid = 0.5 * (n.arc_start + n.arc_end);
      const double norm = std::fmod(std::fmod(mid, 360.0) + 360.0, 360.0);
      const bool right_side = norm < 180.0;
      // Text runs outward along the radius; flipped on the left half so it
      // never reads upside down.
      const double rotation = right_side ? norm - 90.0 : norm + 90.0;
      const auto& text = style.labels == LabelMode::Code ? n.code : n.label;
      out += fmt::format("<text transform=\"translate({}) rotate({})\" text-anchor=\"{}\" "
                         "dominant-baseline=\"middle\">{}</text>\n",
                         cv.point(mid, outer + 6.0), num(rotation), right_side ? "start" : "end", xml_escape(text));
    }
    out += "</g>\n";
  }
  out += "</svg>\n";
  return out;
}

std::string layout_json(const ChordLayout& l) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["gap_degrees"] = l.gap_degrees;
  j["group_gap_degrees"] = l.group_gap_degrees;
  j["degrees_per_weight"] = l.degrees_per_weight;
  auto& nodes = j["nodes"] = ordered_json::array();
  for (const auto& n : l.nodes)
    nodes.push_back({{"code", n.code},
                     {"label", n.label},
                     {"factor", n.factor},
                     {"color", n.color},
                     {"arc_start", n.arc_start},
                     {"arc_end", n.arc_end},
                     {"mass", n.mass}});
  auto& ribbons = j["ribbons"] = ordered_json::array();
  for (const auto& r : l.ribbons)
    ribbons.push_back({{"source", l.nodes[r.source].code},
                       {"target", l.nodes[r.target].code},
                       {"weight", r.weight},
                       {"visible", r.visible},
                       {"source_arc", {r.source_arc.start, r.source_arc.end}},
                       {"target_arc", {r.target_arc.start, r.target_arc.end}}});
  return j.dump(2) + "\n";
}

}  // namespace tamrf
