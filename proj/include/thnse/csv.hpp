#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <type_traits>
#include <vector>

#include "thnse/error.hpp"

namespace thnse {

/// Locale-independent; doubles carry 17 significant digits.
inline std::string format_number(double x)
{
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, r.ptr);
}

template <typename Int, std::enable_if_t<std::is_integral_v<Int>, int> = 0>
std::string format_number(Int x)
{
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

class CsvTable
{
public:
  explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  class Row
  {
  public:
    Row& operator<<(const std::string& s)
    {
      cells_.push_back(s);
      return *this;
    }
    Row& operator<<(const char* s) { return *this << std::string(s); }
    Row& operator<<(double x) { return *this << format_number(x); }
    template <typename Int, std::enable_if_t<std::is_integral_v<Int> && !std::is_same_v<Int, bool>, int> = 0>
    Row& operator<<(Int x)
    {
      return *this << format_number(x);
    }
    Row& operator<<(bool b) { return *this << std::string(b ? "true" : "false"); }

  private:
    friend class CsvTable;
    std::vector<std::string> cells_;
  };

  void add(const Row& row)
  {
    if (row.cells_.size() != columns_.size())
      throw IoError("csv row has " + std::to_string(row.cells_.size()) + " cells, expected " +
                    std::to_string(columns_.size()));
    rows_.push_back(row.cells_);
  }

  const std::vector<std::string>& columns() const { return columns_; }
  std::size_t rows() const { return rows_.size(); }
  const std::vector<std::string>& row(std::size_t i) const { return rows_.at(i); }

  std::string str() const
  {
    std::string s = join(columns_);
    for (const auto& r : rows_)
      s += join(r);
    return s;
  }

  void write(const std::filesystem::path& path) const
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
      throw IoError("cannot open '" + path.string() + "' for writing");
    out << str();
    if (!out)
      throw IoError("write to '" + path.string() + "' failed");
  }

private:
  static std::string join(const std::vector<std::string>& cells)
  {
    std::string s;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i)
        s += ',';
      s += cells[i];
    }
    s += '\n';
    return s;
  }

  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

} // namespace thnse
