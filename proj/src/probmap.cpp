#include "docdet/probmap.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace docdet {

ProbabilityMap::ProbabilityMap(std::uint32_t width, std::uint32_t height, std::uint32_t num_classes)
    : width_(width), height_(height), num_classes_(num_classes),
      data_(static_cast<std::size_t>(width) * height * num_classes, 0.0f)
{
}

std::span<const float> ProbabilityMap::plane(std::uint32_t cls) const
{
    const std::size_t n = static_cast<std::size_t>(width_) * height_;
    return {data_.data() + cls * n, n};
}

std::span<float> ProbabilityMap::plane(std::uint32_t cls)
{
    const std::size_t n = static_cast<std::size_t>(width_) * height_;
    return {data_.data() + cls * n, n};
}

namespace {

constexpr std::size_t kHeaderSize = 20;

void put_u32(std::string& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(std::span<const unsigned char> bytes, std::size_t offset)
{
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[offset + i]) << (8 * i);
    return v;
}

}  // namespace

std::string serialize_probmap(const ProbabilityMap& map)
{
    std::string out;
    out.reserve(kHeaderSize + map.data().size() * 4);
    out.append(kProbmapMagic, 4);
    put_u32(out, kProbmapVersion);
    put_u32(out, map.height());
    put_u32(out, map.width());
    put_u32(out, map.num_classes());
    for (float f : map.data()) put_u32(out, std::bit_cast<std::uint32_t>(f));
    return out;
}

ProbabilityMap parse_probmap(std::span<const unsigned char> bytes)
{
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kProbmapMagic, 4) != 0)
        throw FormatError("not a PMAP file (bad magic)");
    if (bytes.size() < kHeaderSize)
        throw LengthError("truncated PMAP header: expected " + std::to_string(kHeaderSize) +
                              " bytes, got " + std::to_string(bytes.size()),
                          kHeaderSize, bytes.size());
    const std::uint32_t version = get_u32(bytes, 4);
    if (version != kProbmapVersion)
        throw FormatError("unsupported PMAP version " + std::to_string(version));
    const std::uint32_t height = get_u32(bytes, 8);
    const std::uint32_t width = get_u32(bytes, 12);
    const std::uint32_t classes = get_u32(bytes, 16);

    const unsigned __int128 cells =
        static_cast<unsigned __int128>(width) * height * classes;
    const unsigned __int128 expected128 = kHeaderSize + cells * 4;
    if (expected128 != bytes.size()) {
        const std::size_t expected = expected128 > SIZE_MAX ? SIZE_MAX : static_cast<std::size_t>(expected128);
        throw LengthError("PMAP payload length mismatch: expected " + std::to_string(expected) +
                              " bytes, got " + std::to_string(bytes.size()),
                          expected, bytes.size());
    }

    ProbabilityMap map(width, height, classes);
    float* dst = map.values().data();
    const std::size_t n = static_cast<std::size_t>(cells);
    for (std::size_t i = 0; i < n; ++i)
        dst[i] = std::bit_cast<float>(get_u32(bytes, kHeaderSize + 4 * i));
    return map;
}

ProbabilityMap load_probmap(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return parse_probmap(bytes);
    } catch (const LengthError& e) {
        throw LengthError(path.string() + ": " + e.what(), e.expected(), e.actual());
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void save_probmap(const ProbabilityMap& map, const std::filesystem::path& path)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    const std::string bytes = serialize_probmap(map);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

std::size_t validate_probmap(const ProbabilityMap& map, Warnings* warnings, double tolerance)
{
    std::size_t out_of_range = 0;
    std::size_t bad_sum = 0;
    const std::size_t n = static_cast<std::size_t>(map.width()) * map.height();
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (std::uint32_t c = 0; c < map.num_classes(); ++c) {
            const float v = map.data()[c * n + i];
            if (!(v >= 0.0f && v <= 1.0f)) ++out_of_range;
            sum += v;
        }
        if (std::abs(sum - 1.0) > tolerance) ++bad_sum;
    }
    if (out_of_range > 0)
        warn(warnings, std::to_string(out_of_range) + " probability values outside [0, 1]");
    if (bad_sum > 0)
        warn(warnings, std::to_string(bad_sum) + " pixels whose class probabilities do not sum to 1");
    return out_of_range + bad_sum;
}

}  // namespace docdet
