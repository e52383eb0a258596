#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <string_view>

#include <json.hpp>

namespace genderpair {

using Json = nlohmann::json;

// JSONL files used by the toolchain carry a header object on line 1: {"schema": "<name>/<major>", ...}.
class JsonlReader {
 public:
  // Throws MissingFile if the file cannot be opened, SchemaViolation on a missing or wrong header.
  JsonlReader(const std::filesystem::path& path, std::string_view expected_schema);

  const Json& header() const { return header_; }

  // Next record; false at end of file. Blank lines are skipped.
  bool next(Json& out);

  size_t line_number() const { return line_no_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  Json header_;
  size_t line_no_ = 0;
};

class JsonlWriter {
 public:
  // Truncates the file and writes the header.
  JsonlWriter(const std::filesystem::path& path, const Json& header);

  void write(const Json& record);
  void flush();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

Json make_header(std::string_view schema);

// Reads every record after the header.
void for_each_record(const std::filesystem::path& path, std::string_view schema,
                     const std::function<void(const Json& header, const Json& record)>& fn);

void write_text_file(const std::filesystem::path& path, std::string_view contents);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace genderpair
