#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace unidex {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad bytes on disk or on the wire.
struct ParseError : Error {
    using Error::Error;
};

// Data violates a documented invariant (duplicate id, out-of-range SID, ...).
struct ValidationError : Error {
    using Error::Error;
};

// Shapes or settings are inconsistent.
struct ConfigError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Little-endian binary helpers. All on-disk formats (UDXE/UDXQ/UDXI) are
// little-endian; these serialize explicitly so the files are portable.

class ByteWriter {
  public:
    void raw(const void* p, size_t n) {
        const auto* b = static_cast<const uint8_t*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    template <typename T>
    void le(T v) {
        static_assert(std::is_integral_v<T>);
        for (size_t i = 0; i < sizeof(T); ++i)
            buf_.push_back(static_cast<uint8_t>((static_cast<uint64_t>(v) >> (8 * i)) & 0xff));
    }
    void f32(float v) {
        uint32_t bits;
        std::memcpy(&bits, &v, 4);
        le<uint32_t>(bits);
    }
    void f64(double v) {
        uint64_t bits;
        std::memcpy(&bits, &v, 8);
        le<uint64_t>(bits);
    }
    void str(const std::string& s) { raw(s.data(), s.size()); }

    const std::vector<uint8_t>& bytes() const { return buf_; }

    void write_file(const std::string& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open for writing: " + path);
        out.write(reinterpret_cast<const char*>(buf_.data()),
                  static_cast<std::streamsize>(buf_.size()));
        if (!out) throw IoError("write failed: " + path);
    }

  private:
    std::vector<uint8_t> buf_;
};

class ByteReader {
  public:
    explicit ByteReader(std::vector<uint8_t> bytes) : buf_(std::move(bytes)) {}

    static ByteReader from_file(const std::string& path) {
        std::ifstream in(path, std::ios::binary | std::ios::ate);
        if (!in) throw IoError("cannot open: " + path);
        auto size = in.tellg();
        in.seekg(0);
        std::vector<uint8_t> bytes(static_cast<size_t>(size));
        in.read(reinterpret_cast<char*>(bytes.data()), size);
        if (!in) throw IoError("read failed: " + path);
        return ByteReader(std::move(bytes));
    }

    void raw(void* p, size_t n) {
        need(n);
        std::memcpy(p, buf_.data() + pos_, n);
        pos_ += n;
    }
    template <typename T>
    T le() {
        static_assert(std::is_integral_v<T>);
        need(sizeof(T));
        uint64_t v = 0;
        for (size_t i = 0; i < sizeof(T); ++i)
            v |= static_cast<uint64_t>(buf_[pos_ + i]) << (8 * i);
        pos_ += sizeof(T);
        return static_cast<T>(v);
    }
    float f32() {
        uint32_t bits = le<uint32_t>();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    double f64() {
        uint64_t bits = le<uint64_t>();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str(size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    size_t remaining() const { return buf_.size() - pos_; }
    bool done() const { return pos_ == buf_.size(); }

  private:
    void need(size_t n) const {
        if (buf_.size() - pos_ < n) throw ParseError("truncated input");
    }
    std::vector<uint8_t> buf_;
    size_t pos_ = 0;
};

inline void expect_magic(ByteReader& r, const char (&magic)[5]) {
    char got[4];
    r.raw(got, 4);
    if (std::memcmp(got, magic, 4) != 0)
        throw ParseError(std::string("bad magic, expected ") + magic);
}

}  // namespace unidex
