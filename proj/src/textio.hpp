#ifndef VIPER_TEXTIO_HPP
#define VIPER_TEXTIO_HPP

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

// Small text formats shared across the library:
//   - kv: "key = value" lines, '#' comments, reals at 17 significant digits
//   - columnar: whitespace-separated numeric columns with kv header lines
//     prefixed by '#'
// plus atomic file writes and content digests.

namespace viper::textio {

std::string format_real(double v);  // round-trip exact decimal
double parse_real(const std::string& s);

class KvMap {
 public:
  void set(const std::string& key, const std::string& value);
  void set_int(const std::string& key, int64_t v);
  void set_uint(const std::string& key, uint64_t v);
  void set_real(const std::string& key, double v);

  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;  // FormatError if absent
  int64_t get_int(const std::string& key) const;
  uint64_t get_uint(const std::string& key) const;
  double get_real(const std::string& key) const;

  std::string serialize() const;                    // deterministic key order
  static KvMap parse(const std::string& text, const std::string& origin);

  const std::map<std::string, std::string>& entries() const { return map_; }

 private:
  std::map<std::string, std::string> map_;
};

// Write via a temporary file in the same directory, then rename.
void atomic_write(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

// Hex SHA-256 of a byte string.
std::string sha256_hex(const std::string& bytes);

// Matrix export in the columnar text format: a "# rows= cols=" header
// followed by one row per line.
std::string matrix_to_text(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_text(const std::string& text,
                                 const std::string& origin);

std::vector<std::string> split(const std::string& s, char sep);
std::string trim(const std::string& s);

}  // namespace viper::textio

#endif
