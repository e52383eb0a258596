#include "genderpair/jsonl.hpp"

#include <sstream>

#include "genderpair/error.hpp"

namespace genderpair {

JsonlReader::JsonlReader(const std::filesystem::path& path, std::string_view expected_schema)
    : path_(path), in_(path) {
  if (!in_) throw Error(ErrorCode::MissingFile, path.string());
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    if (!line.empty() && line.find_first_not_of(" \t\r") != std::string::npos) break;
  }
  header_ = Json::parse(line, nullptr, false);
  if (header_.is_discarded() || !header_.is_object() || !header_.contains("schema") ||
      !header_["schema"].is_string()) {
    throw Error(ErrorCode::SchemaViolation, path.string() + ": missing header line with \"schema\"");
  }
  if (header_["schema"].get<std::string>() != expected_schema) {
    throw Error(ErrorCode::SchemaViolation, path.string() + ": expected schema " + std::string(expected_schema) +
                                                ", found " + header_["schema"].get<std::string>());
  }
}

bool JsonlReader::next(Json& out) {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out = Json::parse(line, nullptr, false);
    if (out.is_discarded() || !out.is_object()) {
      throw Error(ErrorCode::SchemaViolation, path_.string() + ":" + std::to_string(line_no_) + ": not a JSON object");
    }
    return true;
  }
  return false;
}

JsonlWriter::JsonlWriter(const std::filesystem::path& path, const Json& header) : path_(path), out_(path) {
  if (!out_) throw Error(ErrorCode::IoError, "cannot open for writing: " + path.string());
  write(header);
}

void JsonlWriter::write(const Json& record) {
  out_ << record.dump() << '\n';
  if (!out_) throw Error(ErrorCode::IoError, "write failed: " + path_.string());
}

void JsonlWriter::flush() { out_.flush(); }

Json make_header(std::string_view schema) {
  Json h = Json::object();
  h["schema"] = std::string(schema);
  return h;
}

void for_each_record(const std::filesystem::path& path, std::string_view schema,
                     const std::function<void(const Json& header, const Json& record)>& fn) {
  JsonlReader reader(path, schema);
  Json rec;
  while (reader.next(rec)) fn(reader.header(), rec);
}

void write_text_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open for writing: " + path.string());
  out << contents;
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace genderpair
