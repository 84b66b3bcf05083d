#include "bankruin/common.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace bankruin {

std::string Date::str() const {
    char buf[16];
    if (quarter > 0) {
        std::snprintf(buf, sizeof(buf), "%dQ%d", year, quarter);
    } else {
        std::snprintf(buf, sizeof(buf), "%d", year);
    }
    return buf;
}

std::optional<Date> Date::parse(std::string_view text) {
    std::string s = trim(text);
    if (s.empty()) return std::nullopt;
    auto q_pos = s.find_first_of("Qq");
    if (q_pos != std::string::npos) {
        auto y = parse_long(s.substr(0, q_pos));
        auto q = parse_long(s.substr(q_pos + 1));
        if (!y || !q || *q < 1 || *q > 4) return std::nullopt;
        return Date{static_cast<int>(*y), static_cast<int>(*q)};
    }
    auto dash = s.find('-', 1);
    if (dash != std::string::npos) {
        auto y = parse_long(s.substr(0, dash));
        auto rest = s.substr(dash + 1);
        auto dash2 = rest.find('-');
        auto m = parse_long(dash2 == std::string::npos ? rest : rest.substr(0, dash2));
        if (!y || !m || *m < 1 || *m > 12) return std::nullopt;
        return Date{static_cast<int>(*y), static_cast<int>((*m - 1) / 3 + 1)};
    }
    auto y = parse_long(s);
    if (!y) return std::nullopt;
    return Date{static_cast<int>(*y), 0};
}

std::string trim(std::string_view s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string normalize_text(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool in_space = true;  // swallows leading whitespace
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!in_space) out.push_back(' ');
            in_space = true;
        } else {
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
            in_space = false;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

std::optional<double> parse_double(std::string_view sv) {
    std::string s = trim(sv);
    if (s.empty()) return std::nullopt;
    const char* begin = s.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0') return std::nullopt;
    if (!std::isfinite(v)) return std::nullopt;
    return v;
}

std::optional<long> parse_long(std::string_view sv) {
    std::string s = trim(sv);
    if (s.empty()) return std::nullopt;
    long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
    return v;
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

}  // namespace bankruin
