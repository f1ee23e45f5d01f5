#pragma once

#include <string>

#include "m4nls/core.hpp"

namespace m4nls {

/// Binary field snapshot, bit-exact:
///   bytes 0-3  magic "M4NL"
///   u32 LE     version = 1
///   u8         dim
///   u8         dtype (0 = real f64, 1 = complex f64 interleaved)
///   u16        reserved = 0
///   u32 LE     n_per_dim
///   f64 LE     box_length
///   payload    n^dim (x2 if complex) f64 LE values, row-major
void save_field(const std::string& path, const Field& f);
Field load_field(const std::string& path);

/// FNV-1a 64-bit checksum of a file, as "fnv1a:<16 hex digits>".
std::string file_checksum(const std::string& path);

}  // namespace m4nls
