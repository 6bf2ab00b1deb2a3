#pragma once

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nsfde::csv {

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    for (auto& f : out) {
        while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
        while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r'))
            f.remove_suffix(1);
    }
    return out;
}

inline double to_double(std::string_view s) {
    // std::from_chars for double is available in libstdc++ 11
    double v = 0.0;
    const auto* first = s.data();
    const auto* last = s.data() + s.size();
    if (!s.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last)
        throw ParseError("not a number: '" + std::string(s) + "'");
    return v;
}

/// Reads non-empty lines; the first is returned as the header.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

inline Table read_table(std::istream& is) {
    Table t;
    std::string line;
    bool have_header = false;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto fields = split(line);
        if (!have_header) {
            for (auto f : fields) t.header.emplace_back(f);
            have_header = true;
            continue;
        }
        if (fields.size() != t.header.size())
            throw ParseError("line " + std::to_string(lineno) + ": expected " +
                             std::to_string(t.header.size()) + " fields");
        std::vector<double> row;
        row.reserve(fields.size());
        for (auto f : fields) row.push_back(to_double(f));
        t.rows.push_back(std::move(row));
    }
    if (!have_header) throw ParseError("empty CSV input");
    return t;
}

/// Writes doubles with a fixed number of significant digits.
class Writer {
public:
    Writer(std::ostream& os, int precision) : os_(os) { os_.precision(precision); }

    Writer& header(std::initializer_list<std::string_view> names) {
        bool first = true;
        for (auto n : names) {
            if (!first) os_ << ',';
            os_ << n;
            first = false;
        }
        os_ << '\n';
        return *this;
    }

    Writer& header(const std::vector<std::string>& names) {
        for (std::size_t k = 0; k < names.size(); ++k) os_ << (k ? "," : "") << names[k];
        os_ << '\n';
        return *this;
    }

    template <typename... Ts>
    Writer& row(const Ts&... fields) {
        bool first = true;
        ((os_ << (first ? "" : ",") << fields, first = false), ...);
        os_ << '\n';
        return *this;
    }

    /// Leading fields followed by a span of values.
    template <typename Range, typename... Ts>
    Writer& row_with(const Range& tail, const Ts&... fields) {
        bool first = true;
        ((os_ << (first ? "" : ",") << fields, first = false), ...);
        for (const auto& v : tail) {
            os_ << (first ? "" : ",") << v;
            first = false;
        }
        os_ << '\n';
        return *this;
    }

private:
    std::ostream& os_;
};

}  // namespace nsfde::csv
