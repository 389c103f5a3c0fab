#include "text_io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "uavip/error.hpp"

namespace uavip::detail {

std::vector<std::string> split_fields(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open " + path.string());
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    lines.push_back(std::move(line));
  }
  return lines;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ConfigError("cannot write " + path.string());
  }
  out << text;
  if (!out) {
    throw std::runtime_error("write failed: " + path.string());
  }
}

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

double parse_double(const std::string& text) {
  if (text.empty()) {
    throw std::invalid_argument("empty number");
  }
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size() || errno == ERANGE) {
    throw std::invalid_argument("not a number: '" + text + "'");
  }
  return v;
}

long long parse_integer(const std::string& text) {
  if (text.empty()) {
    throw std::invalid_argument("empty integer");
  }
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(text.c_str(), &end, 10);
  if (end != text.c_str() + text.size() || errno == ERANGE) {
    throw std::invalid_argument("not an integer: '" + text + "'");
  }
  return v;
}

std::size_t parse_index(const std::string& text) {
  const long long v = parse_integer(text);
  if (v < 0) {
    throw std::invalid_argument("negative index: '" + text + "'");
  }
  return static_cast<std::size_t>(v);
}

}  // namespace uavip::detail
