#include "slubench/text.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "slubench/errors.hpp"

namespace slubench {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

}  // namespace

std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    out.push_back(c);
  }
  return out;
}

Tokens tokenize(std::string_view text) {
  Tokens tokens;
  std::string norm = normalize_text(text);
  std::size_t pos = 0;
  while (pos < norm.size()) {
    std::size_t next = norm.find(' ', pos);
    if (next == std::string::npos) next = norm.size();
    tokens.emplace_back(norm.substr(pos, next - pos));
    pos = next + 1;
  }
  return tokens;
}

std::string join(const Tokens& tokens, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.append(sep);
    out.append(tokens[i]);
  }
  return out;
}

std::vector<std::string> split_exact(std::string_view text, char sep) {
  std::vector<std::string> fields;
  std::size_t pos = 0;
  while (true) {
    std::size_t next = text.find(sep, pos);
    if (next == std::string_view::npos) {
      fields.emplace_back(text.substr(pos));
      break;
    }
    fields.emplace_back(text.substr(pos, next - pos));
    pos = next + 1;
  }
  return fields;
}

std::uint64_t fnv1a(std::string_view text, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t stream_seed(std::uint64_t seed, std::string_view key) {
  // splitmix64 finalizer over the combined hash
  std::uint64_t z = fnv1a(key, 0xcbf29ce484222325ULL ^ (seed * 0x9e3779b97f4a7c15ULL));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string format_double(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string format_fixed(double value, int decimals) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed, decimals);
  std::string out(buf, res.ptr);
  if (out.size() > 1 && out[0] == '-' && out.find_first_not_of("-0.") == std::string::npos)
    out.erase(0, 1);  // no "-0.00"
  return out;
}

std::string format_half_up(double value, int decimals) {
  double scale = std::pow(10.0, decimals);
  // The epsilon absorbs binary representation error of decimal halves.
  double rounded = std::floor(value * scale + 0.5 + 1e-9) / scale;
  return format_fixed(rounded, decimals);
}

bool parse_double(std::string_view field, double& out) {
  if (field.empty()) return false;
  const char* begin = field.data();
  if (*begin == '+') ++begin;
  auto res = std::from_chars(begin, field.data() + field.size(), out);
  return res.ec == std::errc() && res.ptr == field.data() + field.size();
}

bool parse_size(std::string_view field, std::size_t& out) {
  if (field.empty()) return false;
  auto res = std::from_chars(field.data(), field.data() + field.size(), out);
  return res.ec == std::errc() && res.ptr == field.data() + field.size();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace slubench
