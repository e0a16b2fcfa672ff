// SPDX-License-Identifier: Apache-2.0
#include "reorient/io.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <sstream>
#include <stdexcept>

namespace reorient::io {

std::string format_double(double value) {
  char buffer[64];
  // %.17g round-trips; trim to the shortest representation that still does.
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buffer, sizeof(buffer), "%.*g", precision, value);
    if (std::strtod(buffer, nullptr) == value) break;
  }
  return buffer;
}

CsvWriter::CsvWriter(const std::string& path,
                     const std::vector<std::string>& header)
    : out_(path), columns_(header.size()) {
  if (!out_) throw std::runtime_error("CsvWriter: cannot write " + path);
  for (std::size_t i = 0; i < header.size(); ++i) {
    out_ << header[i] << (i + 1 < header.size() ? "," : "");
  }
  out_ << "\n";
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) {
    throw std::invalid_argument("CsvWriter: column count mismatch");
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    out_ << cells[i] << (i + 1 < cells.size() ? "," : "");
  }
  out_ << "\n";
}

void CsvWriter::row_numeric(const std::vector<double>& cells) {
  std::vector<std::string> formatted;
  formatted.reserve(cells.size());
  for (double v : cells) formatted.push_back(format_double(v));
  row(formatted);
}

JsonlWriter::JsonlWriter(const std::string& path) : out_(path) {
  if (!out_) throw std::runtime_error("JsonlWriter: cannot write " + path);
}

void JsonlWriter::write(const nlohmann::json& record) {
  out_ << record.dump() << "\n";
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_csv: cannot open " + path);
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (first) {
      table.header = cells;
      first = false;
    } else if (!cells.empty()) {
      table.rows.push_back(cells);
    }
  }
  return table;
}

std::string make_run_directory(const std::string& root,
                               const std::string& name) {
  namespace fs = std::filesystem;
  fs::create_directories(root);
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", std::localtime(&t));
  for (int counter = 0;; ++counter) {
    std::string dir = root + "/" + stamp + "-" + name;
    if (counter > 0) dir += "-" + std::to_string(counter);
    if (!fs::exists(dir)) {
      fs::create_directories(dir);
      return dir;
    }
  }
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_text_file: cannot write " + path);
  out << content;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_text_file: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace reorient::io
