#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace actex {

// Strict reader for the toolkit's CSV schemas: UTF-8, comma-separated, one
// header row, '.' decimal separator, no quoting. Columns are addressed by the
// indices of `required_columns`; extra columns in the file are ignored.
class CsvReader {
 public:
  CsvReader(std::string path, std::vector<std::string> required_columns);

  bool next();  // false at end of file
  std::int64_t row() const { return row_; }
  const std::string& path() const { return path_; }

  std::string_view field(std::size_t col) const;
  std::string get_string(std::size_t col) const { return std::string(field(col)); }
  double get_double(std::size_t col) const;
  std::int64_t get_int(std::size_t col) const;
  // empty field -> nullopt
  std::optional<double> get_optional_double(std::size_t col) const;

  [[noreturn]] void fail(std::size_t col, const std::string& why) const;
  [[noreturn]] void fail_row(const std::string& why) const;

 private:
  std::string path_;
  std::ifstream in_;
  std::vector<std::string> columns_;
  std::vector<std::size_t> column_index_;
  std::string line_;
  std::vector<std::string_view> fields_;
  std::size_t n_file_columns_ = 0;
  std::int64_t row_ = 0;  // 1-based data row number (header excluded)
};

// Writes to "<path>.tmp" and renames into place on commit; the temporary is
// removed if the writer is destroyed uncommitted, so failed stages leave no
// partial outputs.
class AtomicFile {
 public:
  explicit AtomicFile(std::string path);
  ~AtomicFile();
  AtomicFile(const AtomicFile&) = delete;
  AtomicFile& operator=(const AtomicFile&) = delete;

  std::ofstream& stream() { return out_; }
  void commit();

 private:
  std::string path_;
  std::string tmp_path_;
  std::ofstream out_;
  bool committed_ = false;
};

// Shortest round-trip decimal representation.
std::string fmt_double(double v);
std::string fmt_int(std::int64_t v);

// FNV-1a-64 over a file's bytes, as a fixed-width hex string; used for run
// manifests, not security.
std::string file_digest_hex(const std::string& path);
std::string bytes_digest_hex(std::string_view bytes);

}  // namespace actex
