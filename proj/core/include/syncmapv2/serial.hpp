#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "syncmapv2/errors.hpp"

namespace syncmap {

// Little-endian binary readers/writers shared by the on-disk formats.
// The host is assumed little-endian; a static check in serial.cpp enforces it.

void write_bytes(std::ostream& os, const void* data, std::size_t n);
void read_bytes(std::istream& is, void* data, std::size_t n);

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    write_bytes(os, &v, sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    static_assert(std::is_trivially_copyable_v<T>);
    T v;
    read_bytes(is, &v, sizeof(T));
    return v;
}

void write_magic(std::ostream& os, std::string_view magic);
void expect_magic(std::istream& is, std::string_view magic);

std::ofstream open_output(const std::filesystem::path& path);
std::ifstream open_input(const std::filesystem::path& path);

// FNV-1a over a byte string; used for config hashes and corruption seeds.
std::uint64_t fnv1a(std::string_view bytes);
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed);

// splitmix64 mix step; derives independent seed streams from a master seed.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

}  // namespace syncmap
