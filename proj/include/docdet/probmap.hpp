#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "docdet/error.hpp"

namespace docdet {

/// Per-pixel class posteriors. Planes are stored class-major, each plane
/// row-major, matching the PMAP file layout.
class ProbabilityMap {
public:
    ProbabilityMap() = default;
    ProbabilityMap(std::uint32_t width, std::uint32_t height, std::uint32_t num_classes);

    std::uint32_t width() const noexcept { return width_; }
    std::uint32_t height() const noexcept { return height_; }
    std::uint32_t num_classes() const noexcept { return num_classes_; }

    float at(std::uint32_t cls, std::uint32_t x, std::uint32_t y) const
    {
        return data_[(static_cast<std::size_t>(cls) * height_ + y) * width_ + x];
    }
    float& at(std::uint32_t cls, std::uint32_t x, std::uint32_t y)
    {
        return data_[(static_cast<std::size_t>(cls) * height_ + y) * width_ + x];
    }

    std::span<const float> plane(std::uint32_t cls) const;
    std::span<float> plane(std::uint32_t cls);
    const std::vector<float>& data() const noexcept { return data_; }
    std::span<float> values() noexcept { return data_; }

    friend bool operator==(const ProbabilityMap&, const ProbabilityMap&) = default;

private:
    std::uint32_t width_ = 0;
    std::uint32_t height_ = 0;
    std::uint32_t num_classes_ = 0;
    std::vector<float> data_;
};

inline constexpr char kProbmapMagic[4] = {'P', 'M', 'A', 'P'};
inline constexpr std::uint32_t kProbmapVersion = 1;

std::string serialize_probmap(const ProbabilityMap& map);
ProbabilityMap parse_probmap(std::span<const unsigned char> bytes);
ProbabilityMap load_probmap(const std::filesystem::path& path);
void save_probmap(const ProbabilityMap& map, const std::filesystem::path& path);

/// Reports values outside [0,1] and pixels whose class probabilities do not
/// sum to 1 within `tolerance`. Never throws.
std::size_t validate_probmap(const ProbabilityMap& map, Warnings* warnings = nullptr,
                             double tolerance = 1e-4);

}  // namespace docdet
