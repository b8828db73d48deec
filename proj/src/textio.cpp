#include "textio.hpp"

#include <openssl/evp.h>

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "errors.hpp"

namespace viper::textio {

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_real(const std::string& s) {
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    throw FormatError("not a real number: '" + s + "'");
  return v;
}

void KvMap::set(const std::string& key, const std::string& value) {
  map_[key] = value;
}
void KvMap::set_int(const std::string& key, int64_t v) {
  map_[key] = std::to_string(v);
}
void KvMap::set_uint(const std::string& key, uint64_t v) {
  map_[key] = std::to_string(v);
}
void KvMap::set_real(const std::string& key, double v) {
  map_[key] = format_real(v);
}

bool KvMap::has(const std::string& key) const { return map_.count(key) > 0; }

const std::string& KvMap::get(const std::string& key) const {
  auto it = map_.find(key);
  if (it == map_.end()) throw FormatError("missing key '" + key + "'");
  return it->second;
}

int64_t KvMap::get_int(const std::string& key) const {
  const std::string& s = get(key);
  errno = 0;
  char* end = nullptr;
  long long v = std::strtoll(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0' || errno == ERANGE)
    throw FormatError("key '" + key + "': not an integer: '" + s + "'");
  return v;
}

uint64_t KvMap::get_uint(const std::string& key) const {
  const std::string& s = get(key);
  errno = 0;
  char* end = nullptr;
  unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0' || errno == ERANGE)
    throw FormatError("key '" + key + "': not an unsigned integer: '" + s + "'");
  return v;
}

double KvMap::get_real(const std::string& key) const {
  try {
    return parse_real(get(key));
  } catch (const FormatError& e) {
    throw FormatError("key '" + key + "': " + e.what());
  }
}

std::string KvMap::serialize() const {
  std::string out;
  for (const auto& [k, v] : map_) {
    out += k;
    out += " = ";
    out += v;
    out += '\n';
  }
  return out;
}

KvMap KvMap::parse(const std::string& text, const std::string& origin) {
  KvMap kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw FormatError(origin + ":" + std::to_string(lineno) +
                        ": expected 'key = value'");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw FormatError(origin + ":" + std::to_string(lineno) + ": empty key");
    kv.map_[key] = value;
  }
  return kv;
}

void atomic_write(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("short write to '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw IoError("cannot rename '" + tmp + "' to '" + path + "': " +
                  std::strerror(errno));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(),
                 nullptr) != 1)
    throw NumericError("sha256 failed");
  static const char hex[] = "0123456789abcdef";
  std::string out(2 * len, '0');
  for (unsigned i = 0; i < len; ++i) {
    out[2 * i] = hex[digest[i] >> 4];
    out[2 * i + 1] = hex[digest[i] & 0xf];
  }
  return out;
}

std::string matrix_to_text(const Eigen::MatrixXd& m) {
  std::string out =
      "# rows = " + std::to_string(m.rows()) + "\n# cols = " +
      std::to_string(m.cols()) + "\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ' ';
      out += format_real(m(i, j));
    }
    out += '\n';
  }
  return out;
}

Eigen::MatrixXd matrix_from_text(const std::string& text,
                                 const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  long rows = -1, cols = -1;
  std::vector<double> values;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      KvMap kv = KvMap::parse(t.substr(1), origin);
      if (kv.has("rows")) rows = kv.get_int("rows");
      if (kv.has("cols")) cols = kv.get_int("cols");
      continue;
    }
    for (const std::string& tok : split(t, ' '))
      if (!tok.empty()) values.push_back(parse_real(tok));
  }
  if (rows < 0 || cols < 0)
    throw FormatError(origin + ": missing rows/cols header");
  if (static_cast<long>(values.size()) != rows * cols)
    throw FormatError(origin + ": expected " + std::to_string(rows * cols) +
                      " values, found " + std::to_string(values.size()));
  Eigen::MatrixXd m(rows, cols);
  for (long i = 0; i < rows; ++i)
    for (long j = 0; j < cols; ++j) m(i, j) = values[static_cast<size_t>(i * cols + j)];
  return m;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace viper::textio
