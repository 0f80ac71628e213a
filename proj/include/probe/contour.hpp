#pragma once

#include <vector>

#include "probe/geometry.hpp"

namespace probe {

using Polyline = std::vector<Point>;

/// Level-set polylines of a row-major grid field (values[iy * nx + ix] at (x0 + ix h, y0 + iy h))
/// by marching squares with linear interpolation along cell edges. Saddle cells are resolved by the
/// cell-centre average. Closed loops repeat their first point at the end.
std::vector<Polyline> marching_squares(const std::vector<double>& values, int nx, int ny, double x0, double y0,
                                       double h, double level);

/// Points along the polylines with at most the given spacing.
std::vector<Point> sample_polylines(const std::vector<Polyline>& lines, double spacing);

/// n equispaced-in-parameter points on the curve.
std::vector<Point> sample_curve(const Curve& curve, int n);

/// Symmetric Hausdorff distance between two point sets; infinity when exactly one is empty.
double hausdorff_distance(const std::vector<Point>& a, const std::vector<Point>& b);

}  // namespace probe
