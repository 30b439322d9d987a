#include "docdet/label_mask.hpp"

#include <fstream>
#include <iterator>

#include <png.h>
#include <zlib.h>

#include "docdet/error.hpp"

namespace docdet {

namespace {

constexpr unsigned char kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};

void put_be32(std::string& out, std::uint32_t v)
{
    out.push_back(static_cast<char>((v >> 24) & 0xFF));
    out.push_back(static_cast<char>((v >> 16) & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
    out.push_back(static_cast<char>(v & 0xFF));
}

void put_chunk(std::string& out, const char type[4], const std::string& payload)
{
    put_be32(out, static_cast<std::uint32_t>(payload.size()));
    std::string body(type, 4);
    body += payload;
    out += body;
    const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()));
    put_be32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

std::string encode_label_png(const LabelMask& mask)
{
    if (mask.width <= 0 || mask.height <= 0) throw DimensionError("label mask must be non-empty");
    for (std::uint16_t v : mask.labels)
        if (v > 255) throw RangeError("class id " + std::to_string(v) + " does not fit in an 8-bit PNG");

    std::string raw;
    raw.reserve(static_cast<std::size_t>(mask.width + 1) * mask.height);
    for (int y = 0; y < mask.height; ++y) {
        raw.push_back(0);  // filter: none
        for (int x = 0; x < mask.width; ++x) raw.push_back(static_cast<char>(mask.at(x, y)));
    }

    uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
    std::string packed(packed_size, '\0');
    if (compress2(reinterpret_cast<Bytef*>(packed.data()), &packed_size,
                  reinterpret_cast<const Bytef*>(raw.data()), static_cast<uLong>(raw.size()), 9) != Z_OK)
        throw Error("zlib compression failed");
    packed.resize(packed_size);

    std::string ihdr;
    put_be32(ihdr, static_cast<std::uint32_t>(mask.width));
    put_be32(ihdr, static_cast<std::uint32_t>(mask.height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(0);  // grayscale
    ihdr.push_back(0);  // deflate
    ihdr.push_back(0);  // adaptive filtering
    ihdr.push_back(0);  // no interlace

    std::string out(reinterpret_cast<const char*>(kPngSignature), 8);
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", packed);
    put_chunk(out, "IEND", "");
    return out;
}

LabelMask decode_label_png(std::span<const unsigned char> bytes)
{
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
        throw FormatError(std::string("cannot decode PNG: ") + image.message);
    if (image.format & (PNG_FORMAT_FLAG_COLOR | PNG_FORMAT_FLAG_LINEAR | PNG_FORMAT_FLAG_ALPHA)) {
        png_image_free(&image);
        throw FormatError("label masks must be 8-bit single-channel PNGs");
    }
    image.format = PNG_FORMAT_GRAY;
    LabelMask mask(static_cast<int>(image.width), static_cast<int>(image.height));
    std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw FormatError("cannot decode PNG: " + msg);
    }
    for (std::size_t i = 0; i < buffer.size(); ++i) mask.labels[i] = buffer[i];
    return mask;
}

void save_label_mask(const LabelMask& mask, const std::filesystem::path& path)
{
    const std::string bytes = encode_label_png(mask);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

LabelMask load_label_mask(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_label_png(bytes);
}

}  // namespace docdet
