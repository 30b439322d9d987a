#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace docdet {

/// Dense per-pixel class image; 0 is background.
struct LabelMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint16_t> labels;

    LabelMask() = default;
    LabelMask(int w, int h) : width(w), height(h), labels(static_cast<std::size_t>(w) * h, 0) {}

    std::uint16_t at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
    std::uint16_t& at(int x, int y) { return labels[static_cast<std::size_t>(y) * width + x]; }

    friend bool operator==(const LabelMask&, const LabelMask&) = default;
};

/// 8-bit grayscale PNG, pixel value = class id. Output bytes depend only on
/// the mask contents.
std::string encode_label_png(const LabelMask& mask);
LabelMask decode_label_png(std::span<const unsigned char> bytes);

void save_label_mask(const LabelMask& mask, const std::filesystem::path& path);
LabelMask load_label_mask(const std::filesystem::path& path);

}  // namespace docdet
