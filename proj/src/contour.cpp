#include "probe/contour.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace probe {

namespace {

struct Segment {
  long a, b;  // edge ids
};

}  // namespace

std::vector<Polyline> marching_squares(const std::vector<double>& values, int nx, int ny, double x0, double y0,
                                       double h, double level) {
  if (nx < 0 || ny < 0 || values.size() != static_cast<std::size_t>(nx) * ny) {
    throw std::invalid_argument("marching_squares: field size does not match the grid");
  }
  if (nx < 2 || ny < 2) return {};
  auto val = [&](int ix, int iy) { return values[static_cast<std::size_t>(iy) * nx + ix]; };
  // Edge ids: 2 (iy nx + ix) for the edge to (ix+1, iy), +1 for the edge to (ix, iy+1).
  auto hedge = [&](int ix, int iy) { return 2L * (static_cast<long>(iy) * nx + ix); };
  auto vedge = [&](int ix, int iy) { return 2L * (static_cast<long>(iy) * nx + ix) + 1; };
  std::map<long, Point> where;
  auto crossing = [&](long id) {
    auto it = where.find(id);
    if (it != where.end()) return;
    const long base = id / 2;
    const int ix = static_cast<int>(base % nx), iy = static_cast<int>(base / nx);
    const int jx = (id % 2) ? ix : ix + 1, jy = (id % 2) ? iy + 1 : iy;
    const double f0 = val(ix, iy) - level, f1 = val(jx, jy) - level;
    const double s = f0 == f1 ? 0.5 : f0 / (f0 - f1);
    const Point p0(x0 + ix * h, y0 + iy * h), p1(x0 + jx * h, y0 + jy * h);
    where.emplace(id, p0 + s * (p1 - p0));
  };

  std::vector<Segment> segs;
  for (int iy = 0; iy + 1 < ny; ++iy) {
    for (int ix = 0; ix + 1 < nx; ++ix) {
      // Corners counter-clockwise from (ix, iy); edges bottom, right, top, left.
      const std::array<double, 4> f{val(ix, iy), val(ix + 1, iy), val(ix + 1, iy + 1), val(ix, iy + 1)};
      const std::array<long, 4> e{hedge(ix, iy), vedge(ix + 1, iy), hedge(ix, iy + 1), vedge(ix, iy)};
      int code = 0;
      for (int c = 0; c < 4; ++c) code |= (f[c] > level ? 1 : 0) << c;
      if (code == 0 || code == 15) continue;
      std::vector<int> cut;
      for (int c = 0; c < 4; ++c) {
        if (((code >> c) & 1) != ((code >> ((c + 1) % 4)) & 1)) cut.push_back(c);
      }
      for (int c : cut) crossing(e[c]);
      if (cut.size() == 2) {
        segs.push_back({e[cut[0]], e[cut[1]]});
      } else {
        // Saddle: corners 0 and 2 share a side. Connect around the corners that are separated.
        const double centre = 0.25 * (f[0] + f[1] + f[2] + f[3]);
        const bool centre_high = centre > level;
        const bool corner0_high = (code & 1) != 0;
        if (centre_high == corner0_high) {
          // Corner 0 connects through the centre to corner 2: cut off corners 1 and 3.
          segs.push_back({e[0], e[1]});
          segs.push_back({e[2], e[3]});
        } else {
          segs.push_back({e[3], e[0]});
          segs.push_back({e[1], e[2]});
        }
      }
    }
  }

  // Chain segments through shared edge crossings.
  std::map<long, std::vector<int>> at;
  for (int s = 0; s < static_cast<int>(segs.size()); ++s) {
    at[segs[s].a].push_back(s);
    at[segs[s].b].push_back(s);
  }
  std::vector<char> used(segs.size(), 0);
  std::vector<Polyline> lines;
  auto walk = [&](int s, long from, Polyline& line) {
    long cur = from;
    while (s >= 0 && !used[s]) {
      used[s] = 1;
      const long next = segs[s].a == cur ? segs[s].b : segs[s].a;
      line.push_back(where.at(next));
      cur = next;
      int nxt = -1;
      for (int t : at[cur]) {
        if (!used[t]) nxt = t;
      }
      s = nxt;
    }
  };
  // Open chains start at edges used once (grid border); the rest are loops.
  for (const auto& [id, list] : at) {
    if (list.size() != 1 || used[list[0]]) continue;
    Polyline line{where.at(id)};
    walk(list[0], id, line);
    lines.push_back(std::move(line));
  }
  for (int s = 0; s < static_cast<int>(segs.size()); ++s) {
    if (used[s]) continue;
    Polyline line{where.at(segs[s].a)};
    walk(s, segs[s].a, line);
    lines.push_back(std::move(line));
  }
  return lines;
}

std::vector<Point> sample_polylines(const std::vector<Polyline>& lines, double spacing) {
  if (!(spacing > 0.0)) throw std::invalid_argument("sample_polylines: spacing must be positive");
  std::vector<Point> out;
  for (const auto& line : lines) {
    if (line.empty()) continue;
    out.push_back(line.front());
    for (std::size_t i = 1; i < line.size(); ++i) {
      const Point a = line[i - 1], b = line[i];
      const int parts = std::max(1, static_cast<int>(std::ceil((b - a).norm() / spacing)));
      for (int j = 1; j <= parts; ++j) out.push_back(a + (b - a) * (static_cast<double>(j) / parts));
    }
  }
  return out;
}

std::vector<Point> sample_curve(const Curve& curve, int n) {
  std::vector<Point> out;
  for (int j = 0; j < n; ++j) out.push_back(curve.eval(2.0 * kPi * j / n).x);
  return out;
}

double hausdorff_distance(const std::vector<Point>& a, const std::vector<Point>& b) {
  if (a.empty() && b.empty()) return 0.0;
  if (a.empty() || b.empty()) return std::numeric_limits<double>::infinity();
  auto directed = [](const std::vector<Point>& p, const std::vector<Point>& q) {
    double worst = 0.0;
    for (const auto& z : p) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& w : q) best = std::min(best, (z - w).squaredNorm());
      worst = std::max(worst, best);
    }
    return std::sqrt(worst);
  };
  return std::max(directed(a, b), directed(b, a));
}

}  // namespace probe
