#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "chargelab/errors.hpp"

namespace chargelab {

/// Round-trip-safe decimal rendering: 17 significant digits, trailing
/// zeros trimmed by %g, locale-independent.
inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// CSV table with a fixed column set.  Cells are either numbers (17
/// significant digits) or verbatim strings; the writer refuses rows of
/// the wrong width so emitted baselines keep a stable shape.
class CsvTable {
  public:
    explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {
        if (columns_.empty()) throw ConfigError("CsvTable: need at least one column");
        for (const auto& c : columns_) append_cell(header_, c);
        header_ += '\n';
    }

    class Row {
      public:
        explicit Row(CsvTable& t) : table_(t) {}
        Row& num(double v) { return cell(format_number(v)); }
        Row& integer(long long v) { return cell(std::to_string(v)); }
        Row& text(const std::string& s) { return cell(s); }
        // finish_row throws on width mismatch, so the implicit noexcept must go
        ~Row() noexcept(false) { table_.finish_row(cells_); }

      private:
        Row& cell(const std::string& s) {
            cells_.push_back(s);
            return *this;
        }
        CsvTable& table_;
        std::vector<std::string> cells_;
    };

    Row row() { return Row(*this); }

    std::size_t rows() const { return rows_; }

    /// Full file contents (header + rows), '\n' separated.
    std::string str() const { return header_ + body_; }

  private:
    friend class Row;
    static void append_cell(std::string& out, const std::string& cell) {
        if (!out.empty() && out.back() != '\n') out += ',';
        // cells are machine-generated tokens; commas/quotes would corrupt
        // the table shape, so reject rather than quote
        if (cell.find_first_of(",\"\n") != std::string::npos)
            throw ConfigError("CsvTable: cell would need quoting: " + cell);
        out += cell;
    }
    void finish_row(const std::vector<std::string>& cells) {
        if (cells.size() != columns_.size())
            throw ConfigError("CsvTable: row width " + std::to_string(cells.size()) +
                              " does not match " + std::to_string(columns_.size()) +
                              " columns");
        std::string line;
        for (const auto& c : cells) append_cell(line, c);
        body_ += line;
        body_ += '\n';
        ++rows_;
    }

    std::vector<std::string> columns_;
    std::string header_;
    std::string body_;
    std::size_t rows_ = 0;
};

/// FNV-1a 64-bit over a byte string.
inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string fnv1a64_hex(const std::string& bytes) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

/// Binary write so emitted bytes are platform-independent.
inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("write_file: cannot open " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw ConfigError("write_file: short write to " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("read_file: cannot open " + path.string());
    std::string content((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
    return content;
}

}  // namespace chargelab
