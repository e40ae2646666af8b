#pragma once

#include <cstdio>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace exposcope {

// Reads newline-delimited text, transparently decompressing gzip input.
class LineReader {
 public:
  explicit LineReader(const std::filesystem::path& path);
  ~LineReader();
  LineReader(const LineReader&) = delete;
  LineReader& operator=(const LineReader&) = delete;

  // Next line without its terminator; nullopt at end of input.
  std::optional<std::string> next();
  std::size_t line_number() const { return line_no_; }

 private:
  void* handle_ = nullptr;  // gzFile
  std::filesystem::path path_;
  std::size_t line_no_ = 0;
};

void for_each_line(const std::filesystem::path& path,
                   const std::function<void(std::string_view, std::size_t)>& fn);

std::string read_file(const std::filesystem::path& path);

// Writes `contents` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

// Fails with ConfigError when `path` exists and `force` is false.
void ensure_writable(const std::filesystem::path& path, bool force);

// Serialized appender for newline-delimited records; each record is flushed whole.
class AppendFile {
 public:
  explicit AppendFile(const std::filesystem::path& path);
  ~AppendFile();
  AppendFile(const AppendFile&) = delete;
  AppendFile& operator=(const AppendFile&) = delete;

  void append_line(std::string_view line);

 private:
  std::FILE* file_ = nullptr;
  std::filesystem::path path_;
};

// RFC 4180 style: fields holding a comma, quote or line break are quoted.
std::string csv_field(std::string_view field);
// Splits one CSV record; quoted fields may contain commas and doubled quotes.
std::vector<std::string> split_csv_record(std::string_view line);

}  // namespace exposcope
