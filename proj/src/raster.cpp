#include "docdet/raster.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace docdet {

bool boxes_intersect(const BoundingBox& a, const BoundingBox& b, int margin)
{
    if (a.empty() || b.empty()) return false;
    return a.x0 <= b.x1 + margin && b.x0 <= a.x1 + margin && a.y0 <= b.y1 + margin &&
           b.y0 <= a.y1 + margin;
}

ObjectMask::ObjectMask(int grid_width, int grid_height) : grid_w_(grid_width), grid_h_(grid_height)
{
    if (grid_width < 0 || grid_height < 0) throw DimensionError("negative grid dimensions");
}

void ObjectMask::allocate(const BoundingBox& box)
{
    box_ = box;
    pixel_count_ = 0;
    if (box.empty()) {
        box_ = BoundingBox{};
        word_x0_ = 0;
        words_per_row_ = 0;
        bits_.clear();
        return;
    }
    word_x0_ = box.x0 >> 6;
    words_per_row_ = (box.x1 >> 6) - word_x0_ + 1;
    bits_.assign(static_cast<std::size_t>(words_per_row_) * box.height(), 0);
}

void ObjectMask::set_unchecked(int x, int y)
{
    std::uint64_t& word =
        bits_[static_cast<std::size_t>(y - box_.y0) * words_per_row_ + ((x >> 6) - word_x0_)];
    const std::uint64_t bit = std::uint64_t{1} << (x & 63);
    if (!(word & bit)) {
        word |= bit;
        ++pixel_count_;
    }
}

std::uint64_t ObjectMask::word_at(int y, int word_index) const noexcept
{
    if (empty() || y < box_.y0 || y > box_.y1) return 0;
    const int w = word_index - word_x0_;
    if (w < 0 || w >= words_per_row_) return 0;
    return bits_[static_cast<std::size_t>(y - box_.y0) * words_per_row_ + w];
}

bool ObjectMask::contains(int x, int y) const noexcept
{
    if (empty() || x < box_.x0 || x > box_.x1) return false;
    return (word_at(y, x >> 6) >> (x & 63)) & 1u;
}

ObjectMask ObjectMask::from_region(int grid_width, int grid_height, const BoundingBox& region,
                                   std::span<const std::uint8_t> dense)
{
    ObjectMask mask(grid_width, grid_height);
    if (region.empty()) return mask;
    if (region.x0 < 0 || region.y0 < 0 || region.x1 >= grid_width || region.y1 >= grid_height)
        throw DimensionError("mask region lies outside the image grid");
    if (dense.size() != static_cast<std::size_t>(region.area()))
        throw DimensionError("dense mask size does not match its region");

    BoundingBox tight{region.x1 + 1, region.y1 + 1, region.x0 - 1, region.y0 - 1};
    const int rw = region.width();
    for (int y = 0; y < region.height(); ++y) {
        for (int x = 0; x < rw; ++x) {
            if (!dense[static_cast<std::size_t>(y) * rw + x]) continue;
            tight.x0 = std::min(tight.x0, region.x0 + x);
            tight.x1 = std::max(tight.x1, region.x0 + x);
            tight.y0 = std::min(tight.y0, region.y0 + y);
            tight.y1 = std::max(tight.y1, region.y0 + y);
        }
    }
    if (tight.empty()) return mask;
    mask.allocate(tight);
    for (int y = tight.y0; y <= tight.y1; ++y) {
        const std::uint8_t* row = &dense[static_cast<std::size_t>(y - region.y0) * rw];
        for (int x = tight.x0; x <= tight.x1; ++x)
            if (row[x - region.x0]) mask.set_unchecked(x, y);
    }
    return mask;
}

ObjectMask ObjectMask::from_pixels(int grid_width, int grid_height, std::span<const PixelCoord> pixels)
{
    ObjectMask mask(grid_width, grid_height);
    if (pixels.empty()) return mask;
    BoundingBox tight{pixels[0].x, pixels[0].y, pixels[0].x, pixels[0].y};
    for (const PixelCoord& p : pixels) {
        if (p.x < 0 || p.y < 0 || p.x >= grid_width || p.y >= grid_height)
            throw DimensionError("pixel outside the image grid");
        tight.x0 = std::min(tight.x0, p.x);
        tight.x1 = std::max(tight.x1, p.x);
        tight.y0 = std::min(tight.y0, p.y);
        tight.y1 = std::max(tight.y1, p.y);
    }
    mask.allocate(tight);
    for (const PixelCoord& p : pixels) mask.set_unchecked(p.x, p.y);
    return mask;
}

std::vector<PixelCoord> ObjectMask::pixels() const
{
    std::vector<PixelCoord> out;
    out.reserve(static_cast<std::size_t>(pixel_count_));
    for_each_pixel([&](int x, int y) { out.push_back({x, y}); });
    return out;
}

std::vector<std::uint8_t> ObjectMask::to_dense() const
{
    std::vector<std::uint8_t> dense(static_cast<std::size_t>(box_.area()), 0);
    const int w = box_.width();
    for_each_pixel([&](int x, int y) {
        dense[static_cast<std::size_t>(y - box_.y0) * w + (x - box_.x0)] = 1;
    });
    return dense;
}

std::int64_t ObjectMask::intersection_count(const ObjectMask& other) const
{
    if (grid_w_ != other.grid_w_ || grid_h_ != other.grid_h_)
        throw DimensionError("masks belong to different image grids");
    if (!boxes_intersect(box_, other.box_)) return 0;
    const int y0 = std::max(box_.y0, other.box_.y0);
    const int y1 = std::min(box_.y1, other.box_.y1);
    const int w0 = std::max(word_x0_, other.word_x0_);
    const int w1 = std::min(word_x0_ + words_per_row_, other.word_x0_ + other.words_per_row_) - 1;
    std::int64_t count = 0;
    for (int y = y0; y <= y1; ++y) {
        const std::uint64_t* a = bits_.data() + static_cast<std::size_t>(y - box_.y0) * words_per_row_;
        const std::uint64_t* b =
            other.bits_.data() + static_cast<std::size_t>(y - other.box_.y0) * other.words_per_row_;
        for (int w = w0; w <= w1; ++w) count += std::popcount(a[w - word_x0_] & b[w - other.word_x0_]);
    }
    return count;
}

bool ObjectMask::same_pixels(const ObjectMask& other) const noexcept
{
    return grid_w_ == other.grid_w_ && grid_h_ == other.grid_h_ && pixel_count_ == other.pixel_count_ &&
           box_ == other.box_ && bits_ == other.bits_;
}

// --- rasterization ---------------------------------------------------------

ObjectMask rasterize_polygon(const Polygon& poly, int width, int height, Warnings* warnings)
{
    if (width <= 0 || height <= 0) throw DimensionError("image dimensions must be positive");
    ObjectMask empty(width, height);
    if (poly.size() < 3) throw ValidationError("polygon needs at least 3 vertices");
    if (signed_area(poly) == 0.0) {
        warn(warnings, "degenerate polygon with zero area rasterized as empty");
        return empty;
    }

    double min_x = poly.points[0].x, max_x = min_x, min_y = poly.points[0].y, max_y = min_y;
    for (const Point& p : poly.points) {
        min_x = std::min(min_x, p.x);
        max_x = std::max(max_x, p.x);
        min_y = std::min(min_y, p.y);
        max_y = std::max(max_y, p.y);
    }
    BoundingBox region;
    region.x0 = static_cast<int>(std::max(0.0, std::ceil(min_x - 0.5)));
    region.y0 = static_cast<int>(std::max(0.0, std::ceil(min_y - 0.5)));
    region.x1 = static_cast<int>(std::min(static_cast<double>(width - 1), std::floor(max_x - 0.5)));
    region.y1 = static_cast<int>(std::min(static_cast<double>(height - 1), std::floor(max_y - 0.5)));
    if (region.empty()) return empty;

    const int rw = region.width();
    std::vector<std::uint8_t> dense(static_cast<std::size_t>(region.area()), 0);
    auto fill = [&](int row, double from_x, double to_x) {
        const double lo = std::max(std::ceil(from_x - 0.5), static_cast<double>(region.x0));
        const double hi = std::min(std::floor(to_x - 0.5), static_cast<double>(region.x1));
        for (int x = static_cast<int>(lo); x <= static_cast<int>(hi) && lo <= hi; ++x)
            dense[static_cast<std::size_t>(row - region.y0) * rw + (x - region.x0)] = 1;
    };

    const auto& pts = poly.points;
    const std::size_t n = pts.size();
    std::vector<double> crossings;
    for (int y = region.y0; y <= region.y1; ++y) {
        const double cy = y + 0.5;
        crossings.clear();
        for (std::size_t i = 0; i < n; ++i) {
            const Point& a = pts[i];
            const Point& b = pts[(i + 1) % n];
            const bool a_below = a.y <= cy;
            const bool b_below = b.y <= cy;
            if (a_below != b_below) crossings.push_back(a.x + (cy - a.y) * (b.x - a.x) / (b.y - a.y));
        }
        std::sort(crossings.begin(), crossings.end());
        for (std::size_t k = 0; k + 1 < crossings.size(); k += 2) fill(y, crossings[k], crossings[k + 1]);

        // Centers lying exactly on an edge belong to the polygon.
        for (std::size_t i = 0; i < n; ++i) {
            const Point& a = pts[i];
            const Point& b = pts[(i + 1) % n];
            if (cy < std::min(a.y, b.y) || cy > std::max(a.y, b.y)) continue;
            if (a.y == b.y) {
                fill(y, std::min(a.x, b.x), std::max(a.x, b.x));
            } else {
                const double x = a.x + (cy - a.y) * (b.x - a.x) / (b.y - a.y);
                if (x - 0.5 == std::floor(x - 0.5)) fill(y, x, x);
            }
        }
    }
    return ObjectMask::from_region(width, height, region, dense);
}

std::vector<ObjectMask> rasterize_objects(const PageRecord& page, int grid_w, int grid_h, Warnings* warnings)
{
    std::vector<ObjectMask> masks;
    masks.reserve(page.objects.size());
    const bool rescale = grid_w != page.width || grid_h != page.height;
    const double sx = static_cast<double>(grid_w) / page.width;
    const double sy = static_cast<double>(grid_h) / page.height;
    for (const ObjectInstance& obj : page.objects) {
        Polygon poly = obj.polygon;
        if (rescale)
            for (Point& p : poly.points) p = {p.x * sx, p.y * sy};
        ObjectMask mask = rasterize_polygon(poly, grid_w, grid_h, warnings);
        mask.class_id = obj.class_id;
        mask.confidence = obj.confidence;
        masks.push_back(std::move(mask));
    }
    return masks;
}

void paint(LabelMask& target, const ObjectMask& mask, std::uint16_t value)
{
    if (mask.grid_width() != target.width || mask.grid_height() != target.height)
        throw DimensionError("mask and label image dimensions differ");
    mask.for_each_pixel([&](int x, int y) { target.at(x, y) = value; });
}

LabelMask render_label_mask(std::span<const ObjectMask> masks, int width, int height)
{
    LabelMask out(width, height);
    for (const ObjectMask& m : masks) paint(out, m, static_cast<std::uint16_t>(m.class_id));
    return out;
}

// --- connected components ----------------------------------------------------

void validate_extract_config(const ExtractConfig& cfg)
{
    if (!(cfg.threshold >= 0.0 && cfg.threshold <= 1.0))
        throw ConfigError("threshold must be in [0, 1]");
    if (cfg.min_cc < 0) throw ConfigError("min_cc must be non-negative");
    if (cfg.connectivity != 4 && cfg.connectivity != 8) throw ConfigError("connectivity must be 4 or 8");
}

namespace {

struct DisjointSet {
    std::vector<std::int32_t> parent;

    std::int32_t make()
    {
        parent.push_back(static_cast<std::int32_t>(parent.size()));
        return parent.back();
    }
    std::int32_t find(std::int32_t x)
    {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(std::int32_t a, std::int32_t b)
    {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (a < b) parent[b] = a;
        else parent[a] = b;
    }
};

}  // namespace

std::vector<ObjectMask> connected_components(const LabelMask& mask, const ExtractConfig& cfg)
{
    validate_extract_config(cfg);
    const int w = mask.width;
    const int h = mask.height;
    std::vector<std::int32_t> provisional(static_cast<std::size_t>(w) * h, -1);
    DisjointSet sets;

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::uint16_t cls = mask.at(x, y);
            if (cls == 0) continue;
            std::int32_t label = -1;
            auto visit = [&](int nx, int ny) {
                if (nx < 0 || ny < 0 || nx >= w) return;
                if (mask.at(nx, ny) != cls) return;
                const std::int32_t other = provisional[static_cast<std::size_t>(ny) * w + nx];
                if (label < 0) label = other;
                else sets.unite(label, other);
            };
            visit(x - 1, y);
            visit(x, y - 1);
            if (cfg.connectivity == 8) {
                visit(x - 1, y - 1);
                visit(x + 1, y - 1);
            }
            if (label < 0) label = sets.make();
            provisional[static_cast<std::size_t>(y) * w + x] = label;
        }
    }

    std::vector<std::int32_t> slot(sets.parent.size(), -1);
    std::vector<std::vector<PixelCoord>> groups;
    std::vector<std::size_t> first_index;
    std::vector<std::uint16_t> group_class;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t idx = static_cast<std::size_t>(y) * w + x;
            if (provisional[idx] < 0) continue;
            const std::int32_t root = sets.find(provisional[idx]);
            if (slot[root] < 0) {
                slot[root] = static_cast<std::int32_t>(groups.size());
                groups.emplace_back();
                first_index.push_back(idx);
                group_class.push_back(mask.at(x, y));
            }
            groups[slot[root]].push_back({x, y});
        }
    }

    std::vector<ObjectMask> components;
    std::vector<std::size_t> firsts;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (static_cast<std::int64_t>(groups[g].size()) < cfg.min_cc) continue;
        ObjectMask m = ObjectMask::from_pixels(w, h, groups[g]);
        m.class_id = group_class[g];
        components.push_back(std::move(m));
        firsts.push_back(first_index[g]);
    }

    std::vector<std::size_t> order(components.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& ba = components[a].box();
        const auto& bb = components[b].box();
        if (ba.y0 != bb.y0) return ba.y0 < bb.y0;
        if (ba.x0 != bb.x0) return ba.x0 < bb.x0;
        if (components[a].pixel_count() != components[b].pixel_count())
            return components[a].pixel_count() > components[b].pixel_count();
        return firsts[a] < firsts[b];
    });
    std::vector<ObjectMask> sorted;
    sorted.reserve(components.size());
    for (std::size_t i : order) sorted.push_back(std::move(components[i]));
    return sorted;
}

LabelMask threshold_probabilities(const ProbabilityMap& map, double threshold)
{
    if (map.num_classes() < 2) throw ConfigError("probability map needs at least 2 classes");
    const int w = static_cast<int>(map.width());
    const int h = static_cast<int>(map.height());
    LabelMask labels(w, h);
    const std::size_t n = static_cast<std::size_t>(w) * h;
    const auto& data = map.data();
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t best = 1;
        float best_p = data[n + i];
        for (std::uint32_t c = 2; c < map.num_classes(); ++c) {
            const float p = data[c * n + i];
            if (p > best_p) {
                best_p = p;
                best = c;
            }
        }
        if (best_p > threshold) labels.labels[i] = static_cast<std::uint16_t>(best);
    }
    return labels;
}

std::vector<ObjectMask> extract_objects(const ProbabilityMap& map, const ExtractConfig& cfg)
{
    validate_extract_config(cfg);
    const LabelMask labels = threshold_probabilities(map, cfg.threshold);
    std::vector<ObjectMask> objects = connected_components(labels, cfg);
    for (ObjectMask& obj : objects) {
        double sum = 0.0;
        obj.for_each_pixel([&](int x, int y) {
            sum += map.at(static_cast<std::uint32_t>(obj.class_id), static_cast<std::uint32_t>(x),
                          static_cast<std::uint32_t>(y));
        });
        obj.confidence = sum / static_cast<double>(obj.pixel_count());
    }
    return objects;
}

// --- morphology --------------------------------------------------------------

namespace {

// Window test along rows then columns using prefix counts over a padded region.
ObjectMask morph(const ObjectMask& mask, int radius, bool erosion)
{
    if (radius < 0) throw ConfigError("structuring element radius must be non-negative");
    if (radius == 0 || mask.empty()) return mask;

    const BoundingBox& box = mask.box();
    BoundingBox region = box;
    if (!erosion) {
        region.x0 = std::max(0, box.x0 - radius);
        region.y0 = std::max(0, box.y0 - radius);
        region.x1 = std::min(mask.grid_width() - 1, box.x1 + radius);
        region.y1 = std::min(mask.grid_height() - 1, box.y1 + radius);
    }
    const int rw = region.width();
    const int rh = region.height();
    std::vector<std::uint8_t> src(static_cast<std::size_t>(rw) * rh, 0);
    mask.for_each_pixel([&](int x, int y) {
        src[static_cast<std::size_t>(y - region.y0) * rw + (x - region.x0)] = 1;
    });

    const int window = 2 * radius + 1;
    std::vector<std::uint8_t> horizontal(src.size(), 0);
    std::vector<int> prefix(static_cast<std::size_t>(std::max(rw, rh)) + 1);
    for (int y = 0; y < rh; ++y) {
        prefix[0] = 0;
        for (int x = 0; x < rw; ++x) prefix[x + 1] = prefix[x] + src[static_cast<std::size_t>(y) * rw + x];
        for (int x = 0; x < rw; ++x) {
            const int lo = std::max(0, x - radius);
            const int hi = std::min(rw - 1, x + radius);
            const int count = prefix[hi + 1] - prefix[lo];
            horizontal[static_cast<std::size_t>(y) * rw + x] = erosion ? (count == window) : (count > 0);
        }
    }
    std::vector<std::uint8_t> out(src.size(), 0);
    for (int x = 0; x < rw; ++x) {
        prefix[0] = 0;
        for (int y = 0; y < rh; ++y) prefix[y + 1] = prefix[y] + horizontal[static_cast<std::size_t>(y) * rw + x];
        for (int y = 0; y < rh; ++y) {
            const int lo = std::max(0, y - radius);
            const int hi = std::min(rh - 1, y + radius);
            const int count = prefix[hi + 1] - prefix[lo];
            out[static_cast<std::size_t>(y) * rw + x] = erosion ? (count == window) : (count > 0);
        }
    }
    ObjectMask result = ObjectMask::from_region(mask.grid_width(), mask.grid_height(), region, out);
    result.class_id = mask.class_id;
    result.confidence = mask.confidence;
    return result;
}

}  // namespace

ObjectMask erode(const ObjectMask& mask, int radius) { return morph(mask, radius, true); }

ObjectMask dilate(const ObjectMask& mask, int radius) { return morph(mask, radius, false); }

ObjectMask subtract(const ObjectMask& a, const ObjectMask& b)
{
    if (a.grid_width() != b.grid_width() || a.grid_height() != b.grid_height())
        throw DimensionError("masks belong to different image grids");
    if (!boxes_intersect(a.box(), b.box())) return a;
    std::vector<PixelCoord> kept;
    kept.reserve(static_cast<std::size_t>(a.pixel_count()));
    a.for_each_pixel([&](int x, int y) {
        if (!b.contains(x, y)) kept.push_back({x, y});
    });
    ObjectMask result = ObjectMask::from_pixels(a.grid_width(), a.grid_height(), kept);
    result.class_id = a.class_id;
    result.confidence = a.confidence;
    return result;
}

Overlap mask_overlap(const ObjectMask& a, const ObjectMask& b)
{
    Overlap o;
    o.intersection = a.intersection_count(b);
    o.union_count = a.pixel_count() + b.pixel_count() - o.intersection;
    o.iou = o.union_count == 0 ? 1.0
                               : static_cast<double>(o.intersection) / static_cast<double>(o.union_count);
    return o;
}

bool masks_adjacent(const ObjectMask& a, const ObjectMask& b)
{
    if (!boxes_intersect(a.box(), b.box(), 1)) return false;
    return dilate(a, 1).intersection_count(b) > 0;
}

// --- outline tracing ------------------------------------------------------------

Polygon trace_outline(const ObjectMask& mask)
{
    Polygon result;
    if (mask.empty()) return result;

    // Directed pixel-edge boundary with the interior on the right (y down).
    struct Edge {
        int x0, y0, x1, y1;
        bool used = false;
    };
    std::vector<Edge> edges;
    std::unordered_map<std::int64_t, std::vector<std::size_t>> outgoing;
    auto key = [](int x, int y) { return (static_cast<std::int64_t>(y) << 32) ^ static_cast<std::uint32_t>(x); };
    auto add = [&](int x0, int y0, int x1, int y1) {
        outgoing[key(x0, y0)].push_back(edges.size());
        edges.push_back({x0, y0, x1, y1});
    };
    mask.for_each_pixel([&](int x, int y) {
        if (!mask.contains(x, y - 1)) add(x, y, x + 1, y);
        if (!mask.contains(x + 1, y)) add(x + 1, y, x + 1, y + 1);
        if (!mask.contains(x, y + 1)) add(x + 1, y + 1, x, y + 1);
        if (!mask.contains(x - 1, y)) add(x, y + 1, x, y);
    });

    std::vector<Point> best;
    double best_area = -1.0;
    for (std::size_t start = 0; start < edges.size(); ++start) {
        if (edges[start].used) continue;
        std::vector<Point> loop;
        std::size_t cur = start;
        while (!edges[cur].used) {
            Edge& e = edges[cur];
            e.used = true;
            loop.push_back({static_cast<double>(e.x0), static_cast<double>(e.y0)});
            const auto& candidates = outgoing[key(e.x1, e.y1)];
            const int dx = e.x1 - e.x0;
            const int dy = e.y1 - e.y0;
            std::size_t next = candidates.front();
            if (candidates.size() > 1) {
                // Pinch vertex: take the left turn so diagonal neighbours stay on one loop.
                for (std::size_t c : candidates) {
                    const Edge& n = edges[c];
                    if (n.x1 - n.x0 == dy && n.y1 - n.y0 == -dx) next = c;
                }
            }
            cur = next;
        }
        Polygon candidate{loop};
        const double area = std::abs(signed_area(candidate));
        if (area > best_area) {
            best_area = area;
            best = std::move(loop);
        }
    }

    // Drop vertices in the middle of straight runs.
    const std::size_t n = best.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point& prev = best[(i + n - 1) % n];
        const Point& cur = best[i];
        const Point& next = best[(i + 1) % n];
        const double cross = (cur.x - prev.x) * (next.y - cur.y) - (cur.y - prev.y) * (next.x - cur.x);
        if (cross != 0.0) result.points.push_back(cur);
    }
    return result;
}

}  // namespace docdet
