#include "docdet/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace docdet {

double signed_area(const Polygon& poly)
{
    const auto& pts = poly.points;
    const std::size_t n = pts.size();
    if (n < 3) return 0.0;
    double twice = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Point& a = pts[i];
        const Point& b = pts[(i + 1) % n];
        twice += a.x * b.y - b.x * a.y;
    }
    return 0.5 * twice;
}

namespace {

double cross(const Point& o, const Point& a, const Point& b)
{
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

bool on_segment(const Point& p, const Point& a, const Point& b)
{
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
           p.y <= std::max(a.y, b.y);
}

bool segments_intersect(const Point& p1, const Point& p2, const Point& q1, const Point& q2)
{
    const double d1 = cross(q1, q2, p1);
    const double d2 = cross(q1, q2, p2);
    const double d3 = cross(p1, p2, q1);
    const double d4 = cross(p1, p2, q2);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
        return true;
    if (d1 == 0 && on_segment(p1, q1, q2)) return true;
    if (d2 == 0 && on_segment(p2, q1, q2)) return true;
    if (d3 == 0 && on_segment(q1, p1, p2)) return true;
    if (d4 == 0 && on_segment(q2, p1, p2)) return true;
    return false;
}

}  // namespace

bool has_self_intersection(const Polygon& poly)
{
    const auto& pts = poly.points;
    const std::size_t n = pts.size();
    if (n < 4) return false;
    for (std::size_t i = 0; i < n; ++i) {
        const Point& a1 = pts[i];
        const Point& a2 = pts[(i + 1) % n];
        for (std::size_t j = i + 2; j < n; ++j) {
            if (i == 0 && j == n - 1) continue;  // closing edge shares vertex 0
            const Point& b1 = pts[j];
            const Point& b2 = pts[(j + 1) % n];
            if (std::max(a1.x, a2.x) < std::min(b1.x, b2.x) ||
                std::max(b1.x, b2.x) < std::min(a1.x, a2.x) ||
                std::max(a1.y, a2.y) < std::min(b1.y, b2.y) ||
                std::max(b1.y, b2.y) < std::min(a1.y, a2.y))
                continue;
            if (segments_intersect(a1, a2, b1, b2)) return true;
        }
    }
    return false;
}

}  // namespace docdet
