// output.hpp
// CSV tables and all-or-nothing file bundles for the experiment runner.

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace mmes::cli {

/// Shortest round-trip representation of a double.
std::string format_number(double value);

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  void add_row(std::vector<std::string> cells);
  std::size_t rows() const { return rows_.size(); }
  std::string str() const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Files staged in memory and committed together. Each file goes to a
/// temporary name first and is renamed into place; any failure removes what
/// was already written.
class OutputBundle {
 public:
  void add(std::string name, std::string content);
  std::vector<std::string> names() const;

  void commit(const std::filesystem::path& dir) const;

 private:
  std::vector<std::pair<std::string, std::string>> files_;
};

}  // namespace mmes::cli
