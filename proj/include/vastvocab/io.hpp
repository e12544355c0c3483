#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "vastvocab/matrix.hpp"

namespace vastvocab {

// Shortest text form that round-trips a double exactly.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_text_file(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot open for writing: " + path);
    out << body;
    require(out.good(), "write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---- base64 of little-endian doubles --------------------------------------

inline const char* b64_alphabet() {
    return "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

inline std::string base64_encode(const std::uint8_t* data, std::size_t len) {
    const char* tab = b64_alphabet();
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    for (std::size_t i = 0; i < len; i += 3) {
        std::uint32_t v = data[i] << 16;
        if (i + 1 < len) v |= data[i + 1] << 8;
        if (i + 2 < len) v |= data[i + 2];
        out.push_back(tab[(v >> 18) & 63]);
        out.push_back(tab[(v >> 12) & 63]);
        out.push_back(i + 1 < len ? tab[(v >> 6) & 63] : '=');
        out.push_back(i + 2 < len ? tab[v & 63] : '=');
    }
    return out;
}

inline std::vector<std::uint8_t> base64_decode(const std::string& s) {
    auto val = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        if (c == '=') return -1;
        throw std::invalid_argument("base64: bad character");
    };
    require(s.size() % 4 == 0, "base64: length not a multiple of 4");
    std::vector<std::uint8_t> out;
    out.reserve(s.size() / 4 * 3);
    for (std::size_t i = 0; i < s.size(); i += 4) {
        int a = val(s[i]), b = val(s[i + 1]), c = val(s[i + 2]), d = val(s[i + 3]);
        require(a >= 0 && b >= 0, "base64: malformed block");
        std::uint32_t v = (static_cast<std::uint32_t>(a) << 18) |
                          (static_cast<std::uint32_t>(b) << 12) |
                          (c >= 0 ? static_cast<std::uint32_t>(c) << 6 : 0) |
                          (d >= 0 ? static_cast<std::uint32_t>(d) : 0);
        out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xFF));
        if (c >= 0) out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
        if (d >= 0) out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    }
    return out;
}

inline std::string base64_encode_doubles(const std::vector<double>& v) {
    return base64_encode(reinterpret_cast<const std::uint8_t*>(v.data()),
                         v.size() * sizeof(double));
}

inline std::vector<double> base64_decode_doubles(const std::string& s) {
    auto bytes = base64_decode(s);
    require(bytes.size() % sizeof(double) == 0, "base64: not a double array");
    std::vector<double> v(bytes.size() / sizeof(double));
    std::memcpy(v.data(), bytes.data(), bytes.size());
    return v;
}

}  // namespace vastvocab
