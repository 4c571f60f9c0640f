#include "syncmapv2/serial.hpp"

#include <array>
#include <bit>

namespace syncmap {

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian; big-endian hosts unsupported");

void write_bytes(std::ostream& os, const void* data, std::size_t n) {
    os.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!os) throw IoError("write failed");
}

void read_bytes(std::istream& is, void* data, std::size_t n) {
    is.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n)
        throw FormatError("unexpected end of file");
}

void write_magic(std::ostream& os, std::string_view magic) {
    write_bytes(os, magic.data(), magic.size());
}

void expect_magic(std::istream& is, std::string_view magic) {
    std::array<char, 16> buf{};
    if (magic.size() > buf.size()) throw ArgumentError("magic too long");
    is.read(buf.data(), static_cast<std::streamsize>(magic.size()));
    if (static_cast<std::size_t>(is.gcount()) != magic.size() ||
        std::string_view(buf.data(), magic.size()) != magic)
        throw FormatError("bad magic, expected '" + std::string(magic) + "'");
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    return os;
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for reading: " + path.string());
    return is;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv1a(std::string_view bytes) {
    return fnv1a(bytes, 0xcbf29ce484222325ULL);
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(master + 0x9e3779b97f4a7c15ULL * stream);
}

}  // namespace syncmap
