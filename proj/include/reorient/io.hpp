// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace reorient::io {

// Deterministic float formatting (shortest round-trip form) so identical runs
// produce byte-identical files.
std::string format_double(double value);

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);

  void row(const std::vector<std::string>& cells);
  // Convenience for all-numeric rows.
  void row_numeric(const std::vector<double>& cells);
  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
  std::size_t columns_;
};

class JsonlWriter {
 public:
  explicit JsonlWriter(const std::string& path);
  void write(const nlohmann::json& record);
  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
CsvTable read_csv(const std::string& path);

// Creates <root>/<stamp>-<name>/ and returns its path; never reuses an
// existing directory (appends a counter instead).
std::string make_run_directory(const std::string& root, const std::string& name);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace reorient::io
