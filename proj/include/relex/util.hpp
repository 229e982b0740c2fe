#pragma once

#include <cstdarg>
#include <cstdio>
#include <string>

namespace relex {

inline std::string str_format(const char* fmt, ...) {
    va_list args;
    va_start(args, fmt);
    va_list copy;
    va_copy(copy, args);
    int n = std::vsnprintf(nullptr, 0, fmt, copy);
    va_end(copy);
    std::string out(n > 0 ? static_cast<size_t>(n) : 0, '\0');
    std::vsnprintf(out.data(), out.size() + 1, fmt, args);
    va_end(args);
    return out;
}

// Fixed numeric formatting so repeated runs emit byte-identical text.
inline std::string fmt_double(double x) { return str_format("%.12g", x); }

}  // namespace relex
