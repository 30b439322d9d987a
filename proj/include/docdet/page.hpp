#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "docdet/error.hpp"
#include "docdet/geometry.hpp"

namespace docdet {

/// One annotated or predicted object. Class 0 is reserved for background.
struct ObjectInstance {
    int class_id = 1;
    Polygon polygon;
    std::optional<double> confidence;
    std::optional<std::string> text;

    friend bool operator==(const ObjectInstance&, const ObjectInstance&) = default;
};

struct PageRecord {
    std::string image_id;
    int width = 0;
    int height = 0;
    std::vector<ObjectInstance> objects;
    /// Full-page reference transcription, lines joined by a single space in
    /// reading order.
    std::optional<std::string> page_text;

    friend bool operator==(const PageRecord&, const PageRecord&) = default;
};

/// Parses and validates a page. Vertices outside the image rectangle are
/// clamped onto it and reported through `warnings`.
PageRecord parse_page(std::string_view json_text, Warnings* warnings = nullptr);
PageRecord load_page(const std::filesystem::path& path, Warnings* warnings = nullptr);

std::string page_to_json(const PageRecord& page);
void save_page(const PageRecord& page, const std::filesystem::path& path);

/// Checks the record invariants, clamping out-of-range vertices in place.
void validate_page(PageRecord& page, Warnings* warnings = nullptr);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace docdet
