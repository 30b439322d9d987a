#include "docdet/random.hpp"

#include <limits>
#include <vector>

namespace docdet {

Rng make_stream(std::uint64_t seed, std::string_view name, std::uint64_t index)
{
    std::vector<std::uint32_t> material{
        static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
        static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
        static_cast<std::uint32_t>(name.size())};
    for (unsigned char c : name) material.push_back(c);
    std::seed_seq seq(material.begin(), material.end());
    return Rng(seq);
}

std::uint64_t uniform_index(Rng& rng, std::uint64_t n)
{
    if (n <= 1) return 0;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    for (;;) {
        const std::uint64_t v = rng();
        if (v < limit) return v % n;
    }
}

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace docdet
