#pragma once
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace flcleaner {

// Checkpoint wire format for flat weight vectors: a little-endian u64 element
// count followed by the elements as little-endian IEEE-754 doubles. Written
// byte by byte, so files are identical regardless of host endianness.

void write_f64_vector(std::ostream& out, const std::vector<double>& values);
std::vector<double> read_f64_vector(std::istream& in);

void save_f64_vector(const std::string& path, const std::vector<double>& values);
std::vector<double> load_f64_vector(const std::string& path);

} // namespace flcleaner
