#include "docdet/manifest.hpp"

#include <set>
#include <sstream>

#include <json.hpp>

#include "docdet/error.hpp"
#include "docdet/page.hpp"

namespace docdet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path resolve(const fs::path& base, const std::string& p)
{
    fs::path path(p);
    if (path.is_relative()) path = base / path;
    return path.lexically_normal();
}

void require_exists(const fs::path& p, std::size_t line_no, bool check)
{
    if (check && !fs::exists(p))
        throw ValidationError("manifest line " + std::to_string(line_no) + ": file not found: " + p.string());
}

std::string required_string(const json& doc, const char* key, std::size_t line_no)
{
    if (!doc.contains(key) || !doc.at(key).is_string())
        throw ValidationError("manifest line " + std::to_string(line_no) + ": field \"" + key +
                              "\" must be a string");
    return doc.at(key).get<std::string>();
}

}  // namespace

DatasetManifest parse_manifest(std::string_view text, const fs::path& base_dir, bool check_files)
{
    DatasetManifest manifest;
    manifest.raw = std::string(text);
    std::set<std::string> seen;
    std::istringstream lines{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    std::size_t offset = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        const std::size_t line_offset = offset;
        offset += line.size() + 1;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json doc;
        try {
            doc = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError("manifest line " + std::to_string(line_no) + ": " + e.what(),
                             line_offset + e.byte);
        }
        if (!doc.is_object())
            throw ValidationError("manifest line " + std::to_string(line_no) + ": expected a JSON object");
        try {
            if (doc.contains("classes") && !doc.contains("image_id")) {
                manifest.classes = doc.at("classes").get<std::vector<std::string>>();
                continue;
            }
            ManifestEntry entry;
            entry.image_id = required_string(doc, "image_id", line_no);
            if (!seen.insert(entry.image_id).second)
                throw ValidationError("manifest line " + std::to_string(line_no) + ": duplicate image_id \"" +
                                      entry.image_id + "\"");
            entry.gt_path = resolve(base_dir, required_string(doc, "gt_path", line_no));
            entry.pred_path = resolve(base_dir, required_string(doc, "pred_path", line_no));
            require_exists(entry.gt_path, line_no, check_files);
            require_exists(entry.pred_path, line_no, check_files);
            if (doc.contains("probmap_path") && !doc.at("probmap_path").is_null()) {
                entry.probmap_path = resolve(base_dir, doc.at("probmap_path").get<std::string>());
                require_exists(*entry.probmap_path, line_no, check_files);
            }
            if (doc.contains("ensemble_paths") && !doc.at("ensemble_paths").is_null()) {
                for (const auto& p : doc.at("ensemble_paths").get<std::vector<std::string>>()) {
                    entry.ensemble_paths.push_back(resolve(base_dir, p));
                    require_exists(entry.ensemble_paths.back(), line_no, check_files);
                }
            }
            manifest.entries.push_back(std::move(entry));
        } catch (const json::exception& e) {
            throw ValidationError("manifest line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return manifest;
}

DatasetManifest load_manifest(const fs::path& path, bool check_files)
{
    return parse_manifest(read_text_file(path), path.parent_path(), check_files);
}

std::string manifest_to_jsonl(const DatasetManifest& manifest, const fs::path& base_dir)
{
    auto rel = [&](const fs::path& p) {
        if (base_dir.empty()) return p.generic_string();
        const fs::path r = fs::absolute(p).lexically_normal().lexically_relative(fs::absolute(base_dir).lexically_normal());
        return r.empty() ? p.generic_string() : r.generic_string();
    };
    std::string out;
    if (!manifest.classes.empty()) {
        nlohmann::ordered_json header;
        header["classes"] = manifest.classes;
        out += header.dump() + "\n";
    }
    for (const ManifestEntry& e : manifest.entries) {
        nlohmann::ordered_json doc;
        doc["image_id"] = e.image_id;
        doc["gt_path"] = rel(e.gt_path);
        doc["pred_path"] = rel(e.pred_path);
        if (e.probmap_path) doc["probmap_path"] = rel(*e.probmap_path);
        if (!e.ensemble_paths.empty()) {
            auto arr = nlohmann::ordered_json::array();
            for (const auto& p : e.ensemble_paths) arr.push_back(rel(p));
            doc["ensemble_paths"] = std::move(arr);
        }
        out += doc.dump() + "\n";
    }
    return out;
}

}  // namespace docdet
