#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace musekit {

// std::uniform_int_distribution and std::shuffle are implementation-defined;
// seeded results must be identical everywhere, so draws are hand-rolled on
// top of mt19937_64 (whose output sequence the standard pins down exactly).

/// Uniform draw from [0, bound) by rejection sampling. bound > 0.
inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % bound;
    std::uint64_t raw;
    do {
        raw = rng();
    } while (raw >= limit);
    return raw % bound;
}

/// Fisher-Yates shuffle with deterministic draws.
template <typename T>
void shuffle(std::vector<T>& items, std::mt19937_64& rng) {
    for (std::size_t i = items.size(); i > 1; --i)
        std::swap(items[i - 1], items[bounded(rng, i)]);
}

/// First `count` elements of a shuffled index range (sampling without
/// replacement); count <= n.
inline std::vector<std::size_t> sample_indices(std::mt19937_64& rng, std::size_t n,
                                               std::size_t count) {
    std::vector<std::size_t> indices(n);
    for (std::size_t i = 0; i < n; ++i) indices[i] = i;
    for (std::size_t i = 0; i < count && i + 1 < n; ++i) {
        std::size_t j = i + std::size_t(bounded(rng, n - i));
        std::swap(indices[i], indices[j]);
    }
    indices.resize(count);
    return indices;
}

}  // namespace musekit
