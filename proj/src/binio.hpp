#ifndef VIPER_BINIO_HPP
#define VIPER_BINIO_HPP

#include <Eigen/Core>
#include <cstdint>
#include <cstring>
#include <string>

#include "errors.hpp"

// Raw little-endian serialization helpers for the binary checkpoint and
// policy formats. Readers verify the endianness tag written by
// append_endian_tag.

namespace viper::binio {

constexpr uint32_t kEndianTag = 0x01020304u;

inline void append_raw(std::string& out, const void* p, size_t n) {
  out.append(reinterpret_cast<const char*>(p), n);
}

template <typename T>
void append_pod(std::string& out, T v) {
  append_raw(out, &v, sizeof v);
}

template <typename T>
T read_pod(const std::string& bytes, size_t& off, const std::string& origin) {
  if (off + sizeof(T) > bytes.size())
    throw FormatError(origin + ": truncated at byte offset " +
                      std::to_string(off));
  T v;
  std::memcpy(&v, bytes.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

inline void append_endian_tag(std::string& out) {
  append_pod(out, kEndianTag);
}

inline void check_endian_tag(const std::string& bytes, size_t& off,
                             const std::string& origin) {
  if (read_pod<uint32_t>(bytes, off, origin) != kEndianTag)
    throw FormatError(origin + ": endianness mismatch");
}

inline void append_string(std::string& out, const std::string& s) {
  append_pod<uint64_t>(out, s.size());
  out += s;
}

inline std::string read_string(const std::string& bytes, size_t& off,
                               const std::string& origin) {
  const uint64_t n = read_pod<uint64_t>(bytes, off, origin);
  if (off + n > bytes.size())
    throw FormatError(origin + ": truncated at byte offset " +
                      std::to_string(off));
  std::string s = bytes.substr(off, n);
  off += n;
  return s;
}

// Row-major doubles, shape written by the caller.
inline void append_matrix(std::string& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) append_pod(out, m(i, j));
}

inline Eigen::MatrixXd read_matrix(const std::string& bytes, size_t& off,
                                   Eigen::Index rows, Eigen::Index cols,
                                   const std::string& origin) {
  if (rows < 0 || cols < 0 ||
      (rows > 0 && cols > 0 &&
       static_cast<uint64_t>(rows) * static_cast<uint64_t>(cols) >
           (bytes.size() - std::min(off, bytes.size())) / sizeof(double) + 1))
    throw FormatError(origin + ": implausible matrix shape");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      m(i, j) = read_pod<double>(bytes, off, origin);
  return m;
}

inline void append_vector(std::string& out, const Eigen::VectorXd& v) {
  append_pod<uint64_t>(out, static_cast<uint64_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) append_pod(out, v[i]);
}

inline Eigen::VectorXd read_vector(const std::string& bytes, size_t& off,
                                   const std::string& origin) {
  const uint64_t n = read_pod<uint64_t>(bytes, off, origin);
  if (off + n * sizeof(double) > bytes.size())
    throw FormatError(origin + ": truncated at byte offset " +
                      std::to_string(off));
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (uint64_t i = 0; i < n; ++i) v[static_cast<Eigen::Index>(i)] =
      read_pod<double>(bytes, off, origin);
  return v;
}

}  // namespace viper::binio

#endif
