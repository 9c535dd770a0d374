#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace musekit {

/// Counts of recoverable oddities a reader or codec noticed and worked
/// around (unmatched note-offs, skipped grace notes, ...). Never fatal.
struct Diagnostics {
    std::map<std::string, std::int64_t> counts;

    void add(const std::string& key, std::int64_t n = 1) { counts[key] += n; }
    bool empty() const { return counts.empty(); }

    void merge(const Diagnostics& other) {
        for (const auto& [key, n] : other.counts) counts[key] += n;
    }
};

}  // namespace musekit
