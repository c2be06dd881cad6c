#pragma once

// Interpretive outputs: extremal-projection lists per axis, factor-plane
// scenes with supplementary points and cluster overlays, and a
// byte-deterministic SVG renderer for the scenes.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "factorlens/ca.hpp"
#include "factorlens/clustering.hpp"

namespace factorlens {

enum class Direction { Positive, Negative };

struct ExtremalEntry {
  std::string label;
  double projection = 0.0;
  double contribution = 0.0;
  double cos2 = 0.0;
};

struct ExtremalReport {
  std::size_t axis = 1;  // 1-based
  Direction direction = Direction::Positive;
  std::vector<ExtremalEntry> entries;
  std::string cutoff_rule;
};

struct ScenePoint {
  std::string label;
  double x = 0.0;
  double y = 0.0;
  int cluster = 0;  // 0 = no cluster marker
};

struct SceneSuppPoint {
  std::string label;
  double x = 0.0;
  double y = 0.0;
};

struct FactorPlaneScene {
  std::size_t axis_x = 1;  // 1-based factor indices
  std::size_t axis_y = 2;
  std::string caption_x;  // embeds the axis inertia percentage
  std::string caption_y;
  std::vector<ScenePoint> entity_points;
  std::vector<SceneSuppPoint> supplementary_points;
  bool origin_cross = true;
  bool show_labels = false;  // dots by default; labels on demand
};

namespace detail {

inline std::string fmt_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  // strip the "-0.00" artifact
  std::string s(buf);
  if (s.find_first_not_of("-0.") == std::string::npos && s[0] == '-')
    s.erase(0, 1);
  return s;
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace detail

/// Entities most extreme on one side of an axis, with the diagnostics
/// copied verbatim from the decomposition.  Ties order by label.
inline ExtremalReport extremal(const CaResult& res, std::size_t k,
                               Direction direction, std::size_t top_n = 10) {
  if (k < 1 || k > res.n_factors())
    throw ValidationError("axis index out of range");
  if (top_n < 1) throw ValidationError("top_n must be >= 1");
  const Eigen::Index kk = static_cast<Eigen::Index>(k - 1);
  if (res.lambda(kk) <= 0.0)
    throw ValidationError("axis " + std::to_string(k) + " has zero inertia");

  ExtremalReport rep;
  rep.axis = k;
  rep.direction = direction;
  rep.cutoff_rule = "top " + std::to_string(top_n) + " by " +
                    (direction == Direction::Positive ? std::string("positive")
                                                      : std::string("negative")) +
                    " projection on factor " + std::to_string(k);

  std::vector<ExtremalEntry> all;
  all.reserve(res.row_labels.size());
  for (std::size_t i = 0; i < res.row_labels.size(); ++i) {
    const Eigen::Index ii = static_cast<Eigen::Index>(i);
    all.push_back({res.row_labels[i], res.row_coords(ii, kk),
                   res.row_ctr(ii, kk), res.row_cos2(ii, kk)});
  }
  const bool positive = direction == Direction::Positive;
  std::sort(all.begin(), all.end(),
            [positive](const ExtremalEntry& a, const ExtremalEntry& b) {
              if (a.projection != b.projection)
                return positive ? a.projection > b.projection
                                : a.projection < b.projection;
              return a.label < b.label;
            });
  if (all.size() > top_n) all.resize(top_n);
  rep.entries = std::move(all);
  return rep;
}

namespace detail {

// Scenes may address the canonical (1, 2) plane even when the solution
// has a single factor; axes past the last computed factor carry exact
// zero coordinates and a 0% caption.
inline std::size_t scene_axis_limit(const CaResult& res) {
  return std::max<std::size_t>(2, res.n_factors());
}

inline double scene_coord(const Eigen::MatrixXd& coords, Eigen::Index i,
                          std::size_t k, std::size_t n_factors) {
  if (k > n_factors) return 0.0;
  return coords(i, static_cast<Eigen::Index>(k - 1));
}

inline std::string scene_caption(const CaResult& res, std::size_t k) {
  const double pct = k <= res.n_factors() ? inertia_percent(res, k) : 0.0;
  return "Factor " + std::to_string(k) + " (" + fmt_fixed(pct, 1) +
         "% of inertia)";
}

}  // namespace detail

/// Scene of the (k1, k2) factor plane with supplementary points attached.
inline FactorPlaneScene make_scene(
    const CaResult& res, std::size_t k1, std::size_t k2,
    const std::vector<SupplementaryPoint>& supplementary = {},
    bool show_labels = false) {
  const std::size_t limit = detail::scene_axis_limit(res);
  if (k1 < 1 || k1 > limit || k2 < 1 || k2 > limit)
    throw ValidationError("axis index out of range");
  FactorPlaneScene scene;
  scene.axis_x = k1;
  scene.axis_y = k2;
  scene.show_labels = show_labels;
  scene.caption_x = detail::scene_caption(res, k1);
  scene.caption_y = detail::scene_caption(res, k2);
  const std::size_t K = res.n_factors();
  for (std::size_t i = 0; i < res.row_labels.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    scene.entity_points.push_back(
        {res.row_labels[i], detail::scene_coord(res.row_coords, ii, k1, K),
         detail::scene_coord(res.row_coords, ii, k2, K), 0});
  }
  for (const auto& sp : supplementary) {
    const Eigen::MatrixXd coords = sp.coords.transpose();
    scene.supplementary_points.push_back(
        {sp.label, detail::scene_coord(coords, 0, k1, K),
         detail::scene_coord(coords, 0, k2, K)});
  }
  return scene;
}

/// Scene where each entity point carries its cluster index as marker text.
inline FactorPlaneScene cluster_overlay(const CaResult& res,
                                        const Partition& part, std::size_t k1,
                                        std::size_t k2) {
  if (part.labels.size() != res.row_labels.size())
    throw ValidationError(
        "partition does not cover the entities of the result");
  FactorPlaneScene scene = make_scene(res, k1, k2);
  for (std::size_t i = 0; i < part.labels.size(); ++i)
    scene.entity_points[i].cluster = part.labels[i];
  return scene;
}

/// Self-contained SVG for a scene.  Pure function of the scene: fixed
/// 1000x1000 viewport, margin 60, per-axis linear mapping over the data
/// extent plus 5% padding.
inline std::string render_plane_svg(const FactorPlaneScene& scene) {
  using detail::fmt_fixed;
  using detail::xml_escape;
  constexpr double W = 1000.0, H = 1000.0, M = 60.0;

  double xmin = 0.0, xmax = 0.0, ymin = 0.0, ymax = 0.0;
  bool first = true;
  auto extend = [&](double x, double y) {
    if (first) {
      xmin = xmax = x;
      ymin = ymax = y;
      first = false;
    } else {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  };
  for (const auto& p : scene.entity_points) extend(p.x, p.y);
  for (const auto& p : scene.supplementary_points) extend(p.x, p.y);
  if (scene.origin_cross) extend(0.0, 0.0);
  if (first) extend(0.0, 0.0);
  double spanx = xmax - xmin, spany = ymax - ymin;
  if (spanx <= 0.0) spanx = 1.0;
  if (spany <= 0.0) spany = 1.0;
  xmin -= 0.05 * spanx;
  xmax += 0.05 * spanx;
  ymin -= 0.05 * spany;
  ymax += 0.05 * spany;

  auto sx = [&](double x) {
    return M + (x - xmin) / (xmax - xmin) * (W - 2 * M);
  };
  auto sy = [&](double y) {
    return H - M - (y - ymin) / (ymax - ymin) * (H - 2 * M);
  };

  static const char* kClusterColors[] = {"#1b6ca8", "#d1495b", "#2e8540",
                                         "#8d6708", "#6b4fa0", "#b3541e",
                                         "#2b8a84", "#a03f6b", "#53682b",
                                         "#555555"};

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"1000\" "
         "height=\"1000\" viewBox=\"0 0 1000 1000\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"1000\" height=\"1000\" "
         "fill=\"white\"/>\n";
  svg << "<rect x=\"" << fmt_fixed(M, 2) << "\" y=\"" << fmt_fixed(M, 2)
      << "\" width=\"" << fmt_fixed(W - 2 * M, 2) << "\" height=\""
      << fmt_fixed(H - 2 * M, 2)
      << "\" fill=\"none\" stroke=\"#999999\" stroke-width=\"1\"/>\n";

  if (scene.origin_cross && xmin < 0.0 && xmax > 0.0 && ymin < 0.0 &&
      ymax > 0.0) {
    svg << "<line x1=\"" << fmt_fixed(sx(0.0), 2) << "\" y1=\""
        << fmt_fixed(M, 2) << "\" x2=\"" << fmt_fixed(sx(0.0), 2)
        << "\" y2=\"" << fmt_fixed(H - M, 2)
        << "\" stroke=\"#cccccc\" stroke-width=\"1\" "
           "stroke-dasharray=\"4,4\"/>\n";
    svg << "<line x1=\"" << fmt_fixed(M, 2) << "\" y1=\""
        << fmt_fixed(sy(0.0), 2) << "\" x2=\"" << fmt_fixed(W - M, 2)
        << "\" y2=\"" << fmt_fixed(sy(0.0), 2)
        << "\" stroke=\"#cccccc\" stroke-width=\"1\" "
           "stroke-dasharray=\"4,4\"/>\n";
  }

  for (const auto& p : scene.entity_points) {
    const double px = sx(p.x), py = sy(p.y);
    if (p.cluster > 0) {
      const char* color = kClusterColors[(p.cluster - 1) % 10];
      svg << "<text x=\"" << fmt_fixed(px, 2) << "\" y=\"" << fmt_fixed(py, 2)
          << "\" font-size=\"12\" text-anchor=\"middle\" fill=\"" << color
          << "\">" << p.cluster << "</text>\n";
    } else if (scene.show_labels) {
      svg << "<text x=\"" << fmt_fixed(px, 2) << "\" y=\"" << fmt_fixed(py, 2)
          << "\" font-size=\"10\" text-anchor=\"middle\" fill=\"#222222\">"
          << xml_escape(p.label) << "</text>\n";
    } else {
      svg << "<circle cx=\"" << fmt_fixed(px, 2) << "\" cy=\""
          << fmt_fixed(py, 2) << "\" r=\"3\" fill=\"#222222\"/>\n";
    }
  }

  // supplementary attributes highlighted in red, as labels
  for (const auto& p : scene.supplementary_points) {
    const double px = sx(p.x), py = sy(p.y);
    svg << "<circle cx=\"" << fmt_fixed(px, 2) << "\" cy=\"" << fmt_fixed(py, 2)
        << "\" r=\"4\" fill=\"#cc0000\"/>\n";
    svg << "<text x=\"" << fmt_fixed(px, 2) << "\" y=\""
        << fmt_fixed(py - 8.0, 2)
        << "\" font-size=\"12\" text-anchor=\"middle\" fill=\"#cc0000\">"
        << xml_escape(p.label) << "</text>\n";
  }

  svg << "<text x=\"" << fmt_fixed(W / 2, 2) << "\" y=\""
      << fmt_fixed(H - M / 3, 2)
      << "\" font-size=\"16\" text-anchor=\"middle\" fill=\"#000000\">"
      << xml_escape(scene.caption_x) << "</text>\n";
  svg << "<text x=\"" << fmt_fixed(M / 3, 2) << "\" y=\""
      << fmt_fixed(H / 2, 2)
      << "\" font-size=\"16\" text-anchor=\"middle\" fill=\"#000000\" "
         "transform=\"rotate(-90 "
      << fmt_fixed(M / 3, 2) << " " << fmt_fixed(H / 2, 2) << ")\">"
      << xml_escape(scene.caption_y) << "</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

inline void render_plane(const FactorPlaneScene& scene,
                         const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << render_plane_svg(scene);
}

inline std::string extremal_markdown(const ExtremalReport& rep) {
  std::ostringstream md;
  md << "# Factor " << rep.axis << ", "
     << (rep.direction == Direction::Positive ? "positive" : "negative")
     << " extreme\n\n";
  md << "Rule: " << rep.cutoff_rule << "\n\n";
  md << "| rank | entity | projection | contribution | cos2 |\n";
  md << "|-----:|--------|-----------:|-------------:|-----:|\n";
  std::size_t rank = 1;
  for (const auto& e : rep.entries) {
    md << "| " << rank++ << " | " << e.label << " | "
       << detail::fmt_fixed(e.projection, 6) << " | "
       << detail::fmt_fixed(e.contribution, 6) << " | "
       << detail::fmt_fixed(e.cos2, 6) << " |\n";
  }
  return md.str();
}

}  // namespace factorlens
