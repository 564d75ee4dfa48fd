#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace sftgen {

/// 64-bit FNV-1a. Stable across platforms, unlike std::hash.
constexpr std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Child seed for a named stream and item index:
///   derive_seed(parent, label, i) = mix64(mix64(parent ^ fnv1a64(label)) + i)
/// Every stage and every work item gets its own stream so items never share
/// random state and results are independent of processing order.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::string_view label,
                                    std::uint64_t index = 0) {
    return mix64(mix64(parent ^ fnv1a64(label)) + index);
}

std::string to_hex(std::uint64_t v);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace sftgen
