#pragma once

#include <charconv>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace bankruin {

// Data problems (bad files, invariant violations, estimation failures).
// The CLI maps these to exit code 1.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Caller misuse (bad flags, malformed configs). CLI exit code 2.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EstimationError : public DataError {
public:
    using DataError::DataError;
};

class SeparationError : public EstimationError {
public:
    using EstimationError::EstimationError;
};

// Calendar date at annual or quarterly resolution. quarter == 0 means a
// plain year; quarters 1..4 order within the year.
struct Date {
    int year = 0;
    int quarter = 0;

    double frac() const {
        return static_cast<double>(year) + (quarter > 0 ? (quarter - 1) / 4.0 : 0.0);
    }
    bool quarterly() const { return quarter > 0; }

    friend bool operator==(const Date& a, const Date& b) = default;
    friend auto operator<=>(const Date& a, const Date& b) = default;

    std::string str() const;

    // Accepts "1893", "1893Q2", or "1893-06-15" (month mapped to quarter).
    static std::optional<Date> parse(std::string_view text);
};

// One rejected input row: physical line number plus the reason.
struct RejectedRow {
    int line_no = 0;
    std::string reason;
};

std::string trim(std::string_view s);
std::string lower(std::string_view s);
// Lowercase, trimmed, internal whitespace collapsed to single spaces.
std::string normalize_text(std::string_view s);

std::optional<double> parse_double(std::string_view s);
std::optional<long> parse_long(std::string_view s);

// Shortest-ish decimal rendering used for all tabular output so repeated
// runs are byte-identical.
std::string format_double(double v);

}  // namespace bankruin
