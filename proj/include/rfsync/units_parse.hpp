#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

namespace rfsync {

enum class Dimension { Time, Length, PowerDbm, RatioDb };

inline const char* to_string(Dimension d) {
    switch (d) {
    case Dimension::Time: return "time (ps, ns, us, ms, s)";
    case Dimension::Length: return "length (mm, cm, m, km)";
    case Dimension::PowerDbm: return "power (dBm)";
    case Dimension::RatioDb: return "ratio (dB)";
    }
    return "?";
}

class UnitError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Parse "192us", "68 m", "-7dB", "0dBm" into SI base units (seconds,
/// meters, dBm, dB). A unit suffix is mandatory.
inline double parse_quantity(std::string_view text, Dimension dim) {
    auto trim = [](std::string_view s) {
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
        return s;
    };
    const std::string_view s = trim(text);
    double value = 0.0;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    if (!s.empty() && *begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr == begin)
        throw UnitError("'" + std::string(text) + "' is not a number with a unit");
    const std::string_view unit = trim(std::string_view(ptr, static_cast<std::size_t>(end - ptr)));
    if (unit.empty())
        throw UnitError("'" + std::string(text) + "' has no unit; expected " + to_string(dim));

    auto bad = [&]() -> double {
        throw UnitError("'" + std::string(text) + "': unit '" + std::string(unit) + "' is not a "
                        + to_string(dim));
    };
    switch (dim) {
    case Dimension::Time:
        if (unit == "ps") return value * 1e-12;
        if (unit == "ns") return value * 1e-9;
        if (unit == "us" || unit == "µs") return value * 1e-6;
        if (unit == "ms") return value * 1e-3;
        if (unit == "s") return value;
        return bad();
    case Dimension::Length:
        if (unit == "mm") return value * 1e-3;
        if (unit == "cm") return value * 1e-2;
        if (unit == "m") return value;
        if (unit == "km") return value * 1e3;
        return bad();
    case Dimension::PowerDbm:
        if (unit == "dBm") return value;
        return bad();
    case Dimension::RatioDb:
        if (unit == "dB") return value;
        return bad();
    }
    return bad();
}

/// Shortest round-trippable rendering in the given unit, e.g. "192us".
inline std::string format_quantity(double x, Dimension dim) {
    double scaled = x;
    const char* unit = "";
    switch (dim) {
    case Dimension::Time: {
        const double a = x < 0 ? -x : x;
        if (a == 0 || a >= 1.0) unit = "s";
        else if (a >= 1e-3) { scaled = x * 1e3; unit = "ms"; }
        else if (a >= 1e-6) { scaled = x * 1e6; unit = "us"; }
        else if (a >= 1e-9) { scaled = x * 1e9; unit = "ns"; }
        else { scaled = x * 1e12; unit = "ps"; }
        break;
    }
    case Dimension::Length: unit = "m"; break;
    case Dimension::PowerDbm: unit = "dBm"; break;
    case Dimension::RatioDb: unit = "dB"; break;
    }
    scaled = std::round(scaled * 1e6) / 1e6;
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, scaled);
    (void)ec;
    return std::string(buf, p) + unit;
}

} // namespace rfsync
