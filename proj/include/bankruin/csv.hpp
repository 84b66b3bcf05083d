#pragma once

#include <istream>
#include <string>
#include <vector>

namespace bankruin {

// Minimal delimited-text reader: header row required, double-quote quoting,
// "" escapes a quote inside a quoted field. Line numbers are 1-based and
// count physical lines (the header is line 1).
class CsvReader {
public:
    CsvReader(std::istream& in, char delim = ',');

    const std::vector<std::string>& header() const { return header_; }
    // -1 when the column is absent.
    int column_index(const std::string& name) const;

    // Reads the next record into `fields`; false at EOF. Throws DataError on
    // an unterminated quote.
    bool next(std::vector<std::string>& fields);
    int line_no() const { return line_no_; }

private:
    std::istream& in_;
    char delim_;
    std::vector<std::string> header_;
    int line_no_ = 0;
};

std::string csv_escape(const std::string& field, char delim);
std::string csv_join(const std::vector<std::string>& fields, char delim);

}  // namespace bankruin
