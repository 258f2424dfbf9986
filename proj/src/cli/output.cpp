#include "output.hpp"

#include <charconv>
#include <fstream>
#include <stdexcept>
#include <system_error>

namespace mmes::cli {

std::string format_number(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

void CsvTable::add_row(std::vector<std::string> cells) {
  if (cells.size() != header_.size()) throw std::logic_error("CsvTable: row width mismatch");
  rows_.push_back(std::move(cells));
}

std::string CsvTable::str() const {
  std::string out;
  auto line = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return out;
}

void OutputBundle::add(std::string name, std::string content) {
  files_.emplace_back(std::move(name), std::move(content));
}

std::vector<std::string> OutputBundle::names() const {
  std::vector<std::string> out;
  for (const auto& f : files_) out.push_back(f.first);
  return out;
}

void OutputBundle::commit(const std::filesystem::path& dir) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<fs::path> temps;
  std::vector<fs::path> placed;
  auto cleanup = [&] {
    std::error_code ec;
    for (const auto& p : temps) fs::remove(p, ec);
    for (const auto& p : placed) fs::remove(p, ec);
  };
  try {
    for (const auto& [name, content] : files_) {
      const fs::path tmp = dir / ("." + name + ".partial");
      temps.push_back(tmp);
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out << content;
      out.close();
      if (!out) throw std::runtime_error("cannot write " + tmp.string());
    }
    for (std::size_t i = 0; i < files_.size(); ++i) {
      const fs::path target = dir / files_[i].first;
      fs::rename(temps[i], target);
      placed.push_back(target);
    }
  } catch (...) {
    cleanup();
    throw;
  }
}

}  // namespace mmes::cli
