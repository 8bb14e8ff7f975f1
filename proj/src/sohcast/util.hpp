#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

namespace sohcast {

// Shortest representation that still round-trips a double exactly; used for
// every CSV/config value so reruns are byte-identical.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    double back = 0.0;
    std::sscanf(buf, "%lf", &back);
    if (back == v) {
        // try shorter representations first for readability
        for (int prec = 1; prec <= 16; ++prec) {
            char t[40];
            std::snprintf(t, sizeof(t), "%.*g", prec, v);
            std::sscanf(t, "%lf", &back);
            if (back == v) return t;
        }
    }
    return buf;
}

// FNV-1a 64-bit; dataset and artifact fingerprints.
inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string read_file(const std::string& path);
void write_file_atomic(const std::string& path, const std::string& content);
bool file_exists(const std::string& path);
std::string hex64(std::uint64_t v);
std::uint64_t hash_file(const std::string& path);

}  // namespace sohcast
