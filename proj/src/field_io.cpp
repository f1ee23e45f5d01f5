#include "m4nls/field_io.hpp"

#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

namespace m4nls {

namespace {

constexpr char kMagic[4] = {'M', '4', 'N', 'L'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(char((v >> (8 * i)) & 0xFF));
}

void put_u16(std::string& buf, std::uint16_t v) {
  for (int i = 0; i < 2; ++i) buf.push_back(char((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& buf, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i) buf.push_back(char((bits >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const char* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | std::uint8_t(p[i]);
  return v;
}

double get_f64(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | std::uint8_t(p[i]);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void save_field(const std::string& path, const Field& f) {
  std::string buf;
  buf.reserve(24 + f.size() * 16);
  buf.append(kMagic, 4);
  put_u32(buf, kVersion);
  buf.push_back(char(f.grid->dim()));
  buf.push_back(char(f.is_real() ? 0 : 1));
  put_u16(buf, 0);
  put_u32(buf, std::uint32_t(f.grid->n()));
  put_f64(buf, f.grid->length());
  for (const auto& v : f.values) {
    put_f64(buf, v.real());
    if (!f.is_real()) put_f64(buf, v.imag());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("save_field: cannot open " + path);
  out.write(buf.data(), std::streamsize(buf.size()));
  if (!out) throw std::runtime_error("save_field: write failed for " + path);
}

Field load_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_field: cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 24) throw std::runtime_error("load_field: truncated header in " + path);
  if (std::memcmp(buf.data(), kMagic, 4) != 0)
    throw std::runtime_error("load_field: bad magic in " + path);
  const std::uint32_t version = get_u32(buf.data() + 4);
  if (version != kVersion) {
    std::ostringstream os;
    os << "load_field: version mismatch in " << path << " (got " << version << ", expected "
       << kVersion << ")";
    throw std::runtime_error(os.str());
  }
  const int dim = std::uint8_t(buf[8]);
  const int dtype = std::uint8_t(buf[9]);
  if (dtype != 0 && dtype != 1) throw std::runtime_error("load_field: unknown dtype in " + path);
  const std::uint32_t n = get_u32(buf.data() + 12);
  const double length = get_f64(buf.data() + 16);

  auto grid = make_grid(dim, int(n), length);
  const std::size_t count = grid->size() * (dtype == 1 ? 2 : 1);
  const std::size_t expected = 24 + count * 8;
  if (buf.size() < expected) throw std::runtime_error("load_field: truncated payload in " + path);
  if (buf.size() > expected)
    throw std::runtime_error("load_field: trailing bytes after payload in " + path);

  Field f = Field::zeros(grid, dtype == 1 ? FieldKind::complex : FieldKind::real);
  const char* p = buf.data() + 24;
  for (std::size_t i = 0; i < grid->size(); ++i) {
    const double re = get_f64(p);
    p += 8;
    double im = 0.0;
    if (dtype == 1) {
      im = get_f64(p);
      p += 8;
    }
    f.values[i] = cplx(re, im);
  }
  return f;
}

std::string file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("file_checksum: cannot open " + path);
  std::uint64_t hash = 0xcbf29ce484222325ull;
  char chunk[4096];
  while (in) {
    in.read(chunk, sizeof(chunk));
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      hash ^= std::uint8_t(chunk[i]);
      hash *= 0x100000001b3ull;
    }
  }
  std::ostringstream os;
  os << "fnv1a:" << std::hex << std::setw(16) << std::setfill('0') << hash;
  return os.str();
}

}  // namespace m4nls
