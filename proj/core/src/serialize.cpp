#include "flcleaner/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "flcleaner/errors.hpp"

namespace flcleaner {

namespace {

void put_u64_le(std::ostream& out, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t get_u64_le(std::istream& in) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    if (!in) throw Error("checkpoint: truncated while reading u64");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

} // namespace

void write_f64_vector(std::ostream& out, const std::vector<double>& values) {
    put_u64_le(out, values.size());
    for (double d : values) put_u64_le(out, std::bit_cast<std::uint64_t>(d));
    if (!out) throw Error("checkpoint: write failed");
}

std::vector<double> read_f64_vector(std::istream& in) {
    const std::uint64_t n = get_u64_le(in);
    std::vector<double> values(n);
    for (std::uint64_t i = 0; i < n; ++i) values[i] = std::bit_cast<double>(get_u64_le(in));
    return values;
}

void save_f64_vector(const std::string& path, const std::vector<double>& values) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("checkpoint: cannot open for write: " + path);
    write_f64_vector(out, values);
}

std::vector<double> load_f64_vector(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("checkpoint: cannot open for read: " + path);
    return read_f64_vector(in);
}

} // namespace flcleaner
