#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mpda::io {

/// File could not be opened, read or written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Structural problem in one of the binary containers.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Every file read by the library goes through here and is recorded in the
/// access log, so tests can prove which files a code path touched.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

std::vector<std::filesystem::path> access_log();
void clear_access_log();

/// FNV-1a 64, lowercase hex.
std::string digest_hex(std::string_view bytes);
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state = 0xcbf29ce484222325ULL);

/// Little-endian append-only encoder.
class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) { put_le(v); }
    void u64(std::uint64_t v) { put_le(v); }
    void f32(float v)
    {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        put_le(bits);
    }
    void f64(double v)
    {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        put_le(bits);
    }
    void str(std::string_view s)
    {
        u32(static_cast<std::uint32_t>(s.size()));
        buf_.append(s);
    }
    void raw(std::string_view s) { buf_.append(s); }
    void floats(const float* data, std::size_t n)
    {
        for (std::size_t i = 0; i < n; ++i)
            f32(data[i]);
    }

    const std::string& bytes() const { return buf_; }
    std::size_t size() const { return buf_.size(); }

private:
    template <typename U>
    void put_le(U v)
    {
        for (std::size_t i = 0; i < sizeof(U); ++i)
            buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }

    std::string buf_;
};

/// Little-endian decoder over a byte buffer; throws FormatError on overrun.
class Reader {
public:
    explicit Reader(std::string_view bytes, std::string context = "input")
        : bytes_(bytes), context_(std::move(context))
    {
    }

    std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
    std::uint32_t u32() { return get_le<std::uint32_t>(); }
    std::uint64_t u64() { return get_le<std::uint64_t>(); }
    float f32()
    {
        const auto bits = get_le<std::uint32_t>();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    double f64()
    {
        const auto bits = get_le<std::uint64_t>();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str()
    {
        const auto n = u32();
        return std::string(take(n));
    }
    std::string_view raw(std::size_t n) { return take(n); }
    void floats(float* out, std::size_t n)
    {
        for (std::size_t i = 0; i < n; ++i)
            out[i] = f32();
    }

    std::size_t position() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    std::string_view take(std::size_t n)
    {
        if (n > remaining())
            throw FormatError(context_ + ": unexpected end of data at byte " + std::to_string(pos_));
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    template <typename U>
    U get_le()
    {
        const auto s = take(sizeof(U));
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i)
            v |= static_cast<U>(static_cast<unsigned char>(s[i])) << (8 * i);
        return v;
    }

    std::string_view bytes_;
    std::string context_;
    std::size_t pos_ = 0;
};

}  // namespace mpda::io
