#pragma once

// Shared helpers for the text serialization formats: 17-significant-digit
// doubles (bit-exact round trips) and atomic file writes.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "oilml/errors.hpp"

namespace oilml::textio {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline bool try_parse_double(std::string_view text, double& out) {
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, out, std::chars_format::general);
    return ec == std::errc{} && ptr == end;
}

inline double parse_double(std::string_view text, const std::string& what) {
    double v = 0.0;
    if (!try_parse_double(text, v)) {
        throw data_error("unparseable " + what + " '" + std::string(text) + "'");
    }
    return v;
}

inline bool try_parse_int(std::string_view text, long long& out) {
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc{} && ptr == end;
}

inline long long parse_int(std::string_view text, const std::string& what) {
    long long v = 0;
    if (!try_parse_int(text, v)) {
        throw data_error("unparseable " + what + " '" + std::string(text) + "'");
    }
    return v;
}

inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw data_error("cannot write '" + tmp.string() + "'");
        f << content;
        f.flush();
        if (!f) throw data_error("failed while writing '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw data_error("cannot open '" + path.string() + "'");
    std::ostringstream out;
    out << f.rdbuf();
    return out.str();
}

}  // namespace oilml::textio
