#include "docdet/page.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace docdet {

using nlohmann::json;

namespace {

constexpr long long kMaxDimension = 1'000'000;

int read_dimension(const json& doc, const char* key)
{
    if (!doc.contains(key)) throw ValidationError(std::string("missing field \"") + key + "\"");
    const json& v = doc.at(key);
    if (!v.is_number_integer())
        throw ValidationError(std::string("field \"") + key + "\" must be an integer");
    const long long value = v.get<long long>();
    if (value <= 0)
        throw ValidationError(std::string("field \"") + key + "\" must be positive, got " +
                              std::to_string(value));
    if (value > kMaxDimension)
        throw ValidationError(std::string("field \"") + key + "\" is unreasonably large");
    return static_cast<int>(value);
}

std::optional<std::string> read_optional_string(const json& obj, const char* key,
                                                const std::string& where)
{
    if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
    if (!obj.at(key).is_string())
        throw ValidationError(where + ": field \"" + key + "\" must be a string or null");
    return obj.at(key).get<std::string>();
}

ObjectInstance read_object(const json& obj, std::size_t index)
{
    const std::string where = "object " + std::to_string(index);
    if (!obj.is_object()) throw ValidationError(where + ": expected a JSON object");

    ObjectInstance inst;
    if (!obj.contains("class") || !obj.at("class").is_number_integer())
        throw ValidationError(where + ": field \"class\" must be an integer");
    const long long cls = obj.at("class").get<long long>();
    if (cls < 1 || cls > 65535)
        throw ValidationError(where + ": class id must be in [1, 65535], got " + std::to_string(cls));
    inst.class_id = static_cast<int>(cls);

    if (!obj.contains("polygon") || !obj.at("polygon").is_array())
        throw ValidationError(where + ": field \"polygon\" must be an array of [x, y] pairs");
    for (const json& pt : obj.at("polygon")) {
        if (!pt.is_array() || pt.size() != 2 || !pt[0].is_number() || !pt[1].is_number())
            throw ValidationError(where + ": polygon vertices must be [x, y] number pairs");
        const Point p{pt[0].get<double>(), pt[1].get<double>()};
        if (!std::isfinite(p.x) || !std::isfinite(p.y))
            throw ValidationError(where + ": non-finite vertex coordinate");
        inst.polygon.points.push_back(p);
    }

    if (obj.contains("confidence") && !obj.at("confidence").is_null()) {
        if (!obj.at("confidence").is_number())
            throw ValidationError(where + ": field \"confidence\" must be a number or null");
        inst.confidence = obj.at("confidence").get<double>();
    }
    inst.text = read_optional_string(obj, "text", where);
    return inst;
}

}  // namespace

void validate_page(PageRecord& page, Warnings* warnings)
{
    if (page.width <= 0 || page.height <= 0)
        throw ValidationError("page dimensions must be positive");
    for (std::size_t i = 0; i < page.objects.size(); ++i) {
        ObjectInstance& obj = page.objects[i];
        const std::string where = "object " + std::to_string(i);
        if (obj.class_id < 1) throw ValidationError(where + ": class id must be >= 1");
        if (obj.polygon.size() < 3)
            throw ValidationError(where + ": polygon has " + std::to_string(obj.polygon.size()) +
                                  " points, at least 3 required");
        if (obj.confidence && !(*obj.confidence >= 0.0 && *obj.confidence <= 1.0))
            throw ValidationError(where + ": confidence must be in [0, 1]");

        std::size_t clamped = 0;
        for (Point& p : obj.polygon.points) {
            if (!std::isfinite(p.x) || !std::isfinite(p.y))
                throw ValidationError(where + ": non-finite vertex coordinate");
            const Point before = p;
            p.x = std::clamp(p.x, 0.0, static_cast<double>(page.width));
            p.y = std::clamp(p.y, 0.0, static_cast<double>(page.height));
            if (!(p == before)) ++clamped;
        }
        if (clamped > 0)
            warn(warnings, page.image_id + ": " + where + ": " + std::to_string(clamped) +
                               " vertices clamped to the image");
        if (has_self_intersection(obj.polygon))
            warn(warnings, page.image_id + ": " + where + ": polygon is self-intersecting");
    }
}

PageRecord parse_page(std::string_view json_text, Warnings* warnings)
{
    json doc;
    try {
        doc = json::parse(json_text.begin(), json_text.end());
    } catch (const json::parse_error& e) {
        throw ParseError("malformed page JSON at byte " + std::to_string(e.byte) + ": " + e.what(),
                         e.byte);
    }
    if (!doc.is_object()) throw ValidationError("page must be a JSON object");

    PageRecord page;
    try {
        if (!doc.contains("image_id") || !doc.at("image_id").is_string())
            throw ValidationError("field \"image_id\" must be a string");
        page.image_id = doc.at("image_id").get<std::string>();
        page.width = read_dimension(doc, "width");
        page.height = read_dimension(doc, "height");
        page.page_text = read_optional_string(doc, "page_text", "page");
        if (!doc.contains("objects") || !doc.at("objects").is_array())
            throw ValidationError("field \"objects\" must be an array");
        const json& objects = doc.at("objects");
        page.objects.reserve(objects.size());
        for (std::size_t i = 0; i < objects.size(); ++i) page.objects.push_back(read_object(objects[i], i));
    } catch (const json::exception& e) {
        throw ValidationError(std::string("invalid page: ") + e.what());
    }
    validate_page(page, warnings);
    return page;
}

std::string read_text_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view contents)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

PageRecord load_page(const std::filesystem::path& path, Warnings* warnings)
{
    const std::string text = read_text_file(path);
    try {
        return parse_page(text, warnings);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), e.byte_offset());
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

std::string page_to_json(const PageRecord& page)
{
    nlohmann::ordered_json doc;
    doc["image_id"] = page.image_id;
    doc["width"] = page.width;
    doc["height"] = page.height;
    doc["page_text"] = page.page_text ? nlohmann::ordered_json(*page.page_text) : nullptr;
    auto objects = nlohmann::ordered_json::array();
    for (const ObjectInstance& obj : page.objects) {
        nlohmann::ordered_json o;
        o["class"] = obj.class_id;
        auto poly = nlohmann::ordered_json::array();
        for (const Point& p : obj.polygon.points) poly.push_back({p.x, p.y});
        o["polygon"] = std::move(poly);
        o["confidence"] = obj.confidence ? nlohmann::ordered_json(*obj.confidence) : nullptr;
        o["text"] = obj.text ? nlohmann::ordered_json(*obj.text) : nullptr;
        objects.push_back(std::move(o));
    }
    doc["objects"] = std::move(objects);
    return doc.dump() + "\n";
}

void save_page(const PageRecord& page, const std::filesystem::path& path)
{
    write_text_file(path, page_to_json(page));
}

}  // namespace docdet
