#include "bankruin/csv.hpp"

#include "bankruin/common.hpp"

namespace bankruin {
namespace {

// Parses one record starting at the current stream position. Quoted fields
// may contain newlines; each physical line consumed bumps `line_no`.
bool read_record(std::istream& in, char delim, std::vector<std::string>& fields, int& line_no) {
    fields.clear();
    int c = in.get();
    if (c == EOF) return false;
    ++line_no;
    std::string field;
    bool quoted = false;
    while (true) {
        if (c == EOF) {
            if (quoted) throw DataError("line " + std::to_string(line_no) + ": unterminated quote");
            fields.push_back(std::move(field));
            return true;
        }
        char ch = static_cast<char>(c);
        if (quoted) {
            if (ch == '"') {
                int peek = in.peek();
                if (peek == '"') {
                    in.get();
                    field.push_back('"');
                } else {
                    quoted = false;
                }
            } else {
                if (ch == '\n') ++line_no;
                field.push_back(ch);
            }
        } else if (ch == '"' && field.empty()) {
            quoted = true;
        } else if (ch == delim) {
            fields.push_back(std::move(field));
            field.clear();
        } else if (ch == '\r') {
            // swallow; handles CRLF
        } else if (ch == '\n') {
            fields.push_back(std::move(field));
            return true;
        } else {
            field.push_back(ch);
        }
        c = in.get();
    }
}

}  // namespace

CsvReader::CsvReader(std::istream& in, char delim) : in_(in), delim_(delim) {
    if (!read_record(in_, delim_, header_, line_no_)) {
        throw DataError("empty input: header row required");
    }
    // strip a UTF-8 BOM if present
    if (!header_.empty() && header_[0].size() >= 3 && header_[0].compare(0, 3, "\xEF\xBB\xBF") == 0) {
        header_[0].erase(0, 3);
    }
    for (auto& h : header_) h = trim(h);
}

int CsvReader::column_index(const std::string& name) const {
    for (size_t i = 0; i < header_.size(); ++i) {
        if (header_[i] == name) return static_cast<int>(i);
    }
    return -1;
}

bool CsvReader::next(std::vector<std::string>& fields) {
    return read_record(in_, delim_, fields, line_no_);
}

std::string csv_escape(const std::string& field, char delim) {
    bool needs_quote = field.find_first_of("\"\n\r") != std::string::npos ||
                       field.find(delim) != std::string::npos;
    if (!needs_quote) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string csv_join(const std::vector<std::string>& fields, char delim) {
    std::string out;
    for (size_t i = 0; i < fields.size(); ++i) {
        if (i) out.push_back(delim);
        out += csv_escape(fields[i], delim);
    }
    return out;
}

}  // namespace bankruin
