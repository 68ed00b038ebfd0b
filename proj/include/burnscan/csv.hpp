#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace burnscan::csv {

/// Splits one CSV record; double quotes delimit fields containing commas.
std::vector<std::string> split(std::string_view line);

/// Quotes a field when it contains a comma, quote or newline.
std::string escape(std::string_view field);

/// Shortest decimal form that round-trips the double; "NA" for NaN.
std::string format(double value);

/// Fixed-precision decimal; used for human-facing reports.
std::string format_fixed(double value, int digits);

/// Parses a double; empty or "NA" yields NaN. Throws FormatError.
double parse_double(std::string_view text);
long long parse_int(std::string_view text);

/// Header plus records, loaded eagerly.
class Table {
public:
    static Table read(const std::filesystem::path& path);
    static Table parse(std::istream& in, const std::string& source = "<stream>");

    const std::vector<std::string>& header() const noexcept { return header_; }
    const std::vector<std::vector<std::string>>& rows() const noexcept { return rows_; }
    /// Throws FormatError naming the missing column.
    std::size_t column(std::string_view name) const;
    std::optional<std::size_t> find_column(std::string_view name) const;

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

/// Writes whole-file output with the header first.
void write_rows(const std::filesystem::path& path, const std::vector<std::string>& header,
                const std::vector<std::vector<std::string>>& rows);

}  // namespace burnscan::csv
