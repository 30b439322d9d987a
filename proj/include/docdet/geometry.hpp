#pragma once

#include <vector>

namespace docdet {

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

/// Closed polygon in image coordinates; the last vertex connects back to
/// the first.
struct Polygon {
    std::vector<Point> points;

    std::size_t size() const noexcept { return points.size(); }
    friend bool operator==(const Polygon&, const Polygon&) = default;
};

/// Shoelace area, positive for counter-clockwise vertex order in a y-up frame.
double signed_area(const Polygon& poly);

/// True when two non-adjacent edges cross or overlap. Vertices shared by
/// consecutive edges do not count.
bool has_self_intersection(const Polygon& poly);

}  // namespace docdet
