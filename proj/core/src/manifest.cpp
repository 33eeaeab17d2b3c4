#include <sstream>

#include <json.hpp>

#include "blindsr/degradation.hpp"
#include "blindsr/errors.hpp"
#include "blindsr/io_util.hpp"

namespace blindsr {

namespace fs = std::filesystem;
using nlohmann::json;

std::string serialize_record(const DatasetRecord& record) {
  json j;
  j["id"] = record.id;
  j["lr_path"] = record.lr_path.generic_string();
  if (record.hr_path) j["hr_path"] = record.hr_path->generic_string();
  if (record.kernel_path) {
    j["kernel_path"] = record.kernel_path->generic_string();
  }
  if (record.b2_true) {
    auto v = record.b2_true->values();
    j["b2_true"] = std::vector<double>(v.begin(), v.end());
  }
  return j.dump();
}

DatasetRecord parse_record(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw IoError(std::string("manifest: invalid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("id") || !j.contains("lr_path")) {
    throw IoError("manifest: record needs 'id' and 'lr_path'");
  }
  DatasetRecord rec;
  try {
    rec.id = j.at("id").get<std::string>();
    rec.lr_path = j.at("lr_path").get<std::string>();
    if (j.contains("hr_path")) rec.hr_path = j["hr_path"].get<std::string>();
    if (j.contains("kernel_path")) {
      rec.kernel_path = j["kernel_path"].get<std::string>();
    }
    if (j.contains("b2_true")) {
      rec.b2_true = BandwidthVector(j["b2_true"].get<std::vector<double>>());
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("manifest: bad field type: ") + e.what());
  }
  if (rec.kernel_path && !rec.hr_path) {
    throw IoError("manifest: kernel-supervised record '" + rec.id +
                  "' lacks hr_path");
  }
  return rec;
}

std::string serialize_manifest(const std::vector<DatasetRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += serialize_record(r);
    out += '\n';
  }
  return out;
}

std::vector<DatasetRecord> parse_manifest(const std::string& text) {
  std::vector<DatasetRecord> records;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    records.push_back(parse_record(line));
  }
  return records;
}

void write_manifest(const fs::path& path,
                    const std::vector<DatasetRecord>& records) {
  write_file_atomic(path, serialize_manifest(records));
}

std::vector<DatasetRecord> read_manifest(const fs::path& path) {
  return parse_manifest(read_file(path));
}

}  // namespace blindsr
