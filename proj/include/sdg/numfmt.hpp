#pragma once

#include <charconv>
#include <string>

namespace sdg {

// Locale-independent decimal formatting with 17 significant digits, enough
// to round-trip any double exactly. All CSV output funnels through this so
// two runs of the same experiment produce byte-identical files.
inline std::string format_double(double v) {
    char buf[48];
    auto res = std::to_chars(buf, buf + sizeof(buf), v,
                             std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

}  // namespace sdg
