#include "docdet/uniformize.hpp"

#include <algorithm>
#include <cmath>

namespace docdet {

void validate_uniformize_config(const UniformizeConfig& cfg)
{
    if (cfg.target_long_side <= 0) throw ConfigError("target long side must be positive");
    if (!(cfg.overlap_ratio_threshold > 0.0 && cfg.overlap_ratio_threshold < 1.0))
        throw ConfigError("overlap ratio threshold must be in (0, 1)");
    if (cfg.erosion_radius < 0) throw ConfigError("erosion radius must be non-negative");
}

PageRecord scale_page(const PageRecord& page, int target_long_side)
{
    if (target_long_side <= 0) throw ConfigError("target long side must be positive");
    const int long_side = std::max(page.width, page.height);
    if (long_side == target_long_side) return page;

    const double s = static_cast<double>(target_long_side) / long_side;
    PageRecord out = page;
    out.width = std::max(1, static_cast<int>(std::lround(page.width * s)));
    out.height = std::max(1, static_cast<int>(std::lround(page.height * s)));
    for (ObjectInstance& obj : out.objects)
        for (Point& p : obj.polygon.points) p = {p.x * s, p.y * s};
    return out;
}

const char* to_string(PairAction action)
{
    switch (action) {
    case PairAction::touching_eroded: return "touching_eroded";
    case PairAction::split: return "split";
    case PairAction::kept: return "kept";
    }
    return "unknown";
}

NormalizedPage normalize_page(const PageRecord& page, const UniformizeConfig& cfg)
{
    validate_uniformize_config(cfg);
    NormalizedPage out;
    out.input_masks = rasterize_objects(page, page.width, page.height, &out.warnings);
    out.masks = out.input_masks;
    auto& masks = out.masks;
    const auto& input = out.input_masks;
    const double thr = cfg.overlap_ratio_threshold;

    auto ratio = [](std::int64_t inter, const ObjectMask& m) {
        return m.pixel_count() == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(m.pixel_count());
    };

    for (std::size_t i = 0; i < masks.size(); ++i) {
        for (std::size_t j = i + 1; j < masks.size(); ++j) {
            if (!boxes_intersect(masks[i].box(), masks[j].box(), 1)) continue;
            PairEvent ev;
            ev.first = i;
            ev.second = j;
            ev.input_intersection = input[i].intersection_count(input[j]);
            ev.ratio_first = ratio(ev.input_intersection, input[i]);
            ev.ratio_second = ratio(ev.input_intersection, input[j]);

            if (masks[i].intersection_count(masks[j]) > 0) {
                const bool first_large = ev.ratio_first >= thr;
                const bool second_large = ev.ratio_second >= thr;
                const bool keep = cfg.keep_if_either ? (first_large || second_large)
                                                     : (first_large && second_large);
                if (keep) {
                    ev.action = PairAction::kept;
                } else {
                    // Equal ratios: the later object gives way.
                    ev.loser = ev.ratio_first < ev.ratio_second ? i : j;
                    const std::size_t keeper = ev.loser == i ? j : i;
                    masks[ev.loser] = subtract(masks[ev.loser], masks[keeper]);
                    ev.action = PairAction::split;
                }
            } else if (masks_adjacent(masks[i], masks[j])) {
                masks[i] = erode(masks[i], cfg.erosion_radius);
                masks[j] = erode(masks[j], cfg.erosion_radius);
                ev.action = PairAction::touching_eroded;
            } else {
                continue;
            }
            out.events.push_back(ev);
        }
    }

    for (std::size_t i = 0; i < masks.size(); ++i)
        if (masks[i].empty() && !input[i].empty())
            warn(&out.warnings, page.image_id + ": object " + std::to_string(i) +
                                    " lost all its pixels during uniformization");

    out.labels = render_label_mask(masks, page.width, page.height);
    return out;
}

}  // namespace docdet
