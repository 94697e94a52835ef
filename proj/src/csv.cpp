#include "actex/csv.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>

#include "actex/error.hpp"
#include "actex/rng.hpp"

namespace actex {

namespace {

void split_fields(std::string_view line, std::vector<std::string_view>& out) {
  out.clear();
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

}  // namespace

CsvReader::CsvReader(std::string path, std::vector<std::string> required_columns)
    : path_(std::move(path)), in_(path_), columns_(std::move(required_columns)) {
  if (!in_) raise(ErrorKind::io, "cannot open " + path_);
  if (!std::getline(in_, line_)) raise(ErrorKind::schema, path_ + ": missing header row");
  if (!line_.empty() && line_.back() == '\r') line_.pop_back();
  std::vector<std::string_view> header;
  split_fields(line_, header);
  n_file_columns_ = header.size();
  column_index_.resize(columns_.size());
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    bool found = false;
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (header[j] == columns_[i]) {
        column_index_[i] = j;
        found = true;
        break;
      }
    }
    if (!found)
      raise(ErrorKind::schema, path_ + ": missing required column '" + columns_[i] + "'");
  }
}

bool CsvReader::next() {
  while (std::getline(in_, line_)) {
    if (!line_.empty() && line_.back() == '\r') line_.pop_back();
    ++row_;
    if (line_.empty()) continue;  // tolerate blank lines, e.g. a trailing newline
    split_fields(line_, fields_);
    if (fields_.size() != n_file_columns_)
      fail_row("expected " + std::to_string(n_file_columns_) + " fields, found " +
               std::to_string(fields_.size()));
    return true;
  }
  return false;
}

std::string_view CsvReader::field(std::size_t col) const { return fields_[column_index_[col]]; }

double CsvReader::get_double(std::size_t col) const {
  const std::string_view s = field(col);
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) fail(col, "not a number");
  return v;
}

std::int64_t CsvReader::get_int(std::size_t col) const {
  const std::string_view s = field(col);
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) fail(col, "not an integer");
  return v;
}

std::optional<double> CsvReader::get_optional_double(std::size_t col) const {
  if (field(col).empty()) return std::nullopt;
  return get_double(col);
}

void CsvReader::fail(std::size_t col, const std::string& why) const {
  raise(ErrorKind::schema, path_ + ": column '" + columns_[col] + "', row " +
                               std::to_string(row_) + ": " + why + " ('" +
                               std::string(field(col)) + "')");
}

void CsvReader::fail_row(const std::string& why) const {
  raise(ErrorKind::schema, path_ + ": row " + std::to_string(row_) + ": " + why);
}

AtomicFile::AtomicFile(std::string path) : path_(std::move(path)), tmp_path_(path_ + ".tmp") {
  out_.open(tmp_path_, std::ios::binary | std::ios::trunc);
  if (!out_) raise(ErrorKind::io, "cannot open " + tmp_path_ + " for writing");
}

AtomicFile::~AtomicFile() {
  if (!committed_) {
    out_.close();
    std::error_code ec;
    std::filesystem::remove(tmp_path_, ec);
  }
}

void AtomicFile::commit() {
  out_.flush();
  if (!out_) raise(ErrorKind::io, "write failed: " + tmp_path_);
  out_.close();
  std::filesystem::rename(tmp_path_, path_);
  committed_ = true;
}

std::string fmt_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string fmt_int(std::int64_t v) {
  char buf[24];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string bytes_digest_hex(std::string_view bytes) {
  const std::uint64_t h = fnv1a64(bytes);
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_digest_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::io, "cannot open " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
    if (!in) break;
  }
  char out[20];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

}  // namespace actex
