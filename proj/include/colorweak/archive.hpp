#pragma once

#include "colorweak/types.hpp"

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace colorweak::archive {

// Little-endian binary encoding shared by the CWMF1 / CWNC1 / CWIM1 formats.
// Doubles are stored as their IEEE-754 bit patterns so round trips are exact.

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void magic(std::string_view m) { out_.write(m.data(), static_cast<std::streamsize>(m.size())); }
  void u64(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out_.write(reinterpret_cast<const char*>(b), 8);
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    u64(bits);
  }
  void str(const std::string& s) {
    u64(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void vec(const Vec& v) {
    u64(static_cast<std::uint64_t>(v.size()));
    for (int i = 0; i < v.size(); ++i) f64(v[i]);
  }
  void f64s(const std::vector<double>& v) {
    u64(v.size());
    for (double d : v) f64(d);
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  void expect_magic(std::string_view m) {
    std::string got(m.size(), '\0');
    in_.read(got.data(), static_cast<std::streamsize>(m.size()));
    if (!in_ || got != m) throw ParseError("bad magic, expected " + std::string(m), 0);
  }
  std::uint64_t u64() {
    unsigned char b[8];
    in_.read(reinterpret_cast<char*>(b), 8);
    if (!in_) throw ParseError("truncated archive", 0);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }
  std::size_t count(std::size_t limit = std::size_t{1} << 32) {
    const std::uint64_t n = u64();
    if (n > limit) throw ParseError("implausible element count in archive", 0);
    return static_cast<std::size_t>(n);
  }
  std::string str() {
    std::string s(count(1 << 20), '\0');
    in_.read(s.data(), static_cast<std::streamsize>(s.size()));
    if (!in_) throw ParseError("truncated archive", 0);
    return s;
  }
  Vec vec() {
    const std::size_t n = count(3);
    Vec v(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) v[static_cast<Eigen::Index>(i)] = f64();
    return v;
  }
  std::vector<double> f64s() {
    std::vector<double> v(count());
    for (double& d : v) d = f64();
    return v;
  }

 private:
  std::istream& in_;
};

}  // namespace colorweak::archive
