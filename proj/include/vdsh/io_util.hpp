#ifndef VDSH_IO_UTIL_HPP
#define VDSH_IO_UTIL_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "vdsh/errors.hpp"

namespace vdsh::io {

/// Little-endian binary reader with truncation detection.
class Reader {
public:
    explicit Reader(const std::filesystem::path& path) : path_(path.string()), in_(path, std::ios::binary) {
        if (!in_) throw IoError("cannot open " + path_ + " for reading");
    }

    void read_exact(void* dst, std::size_t n) {
        in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) {
            throw TruncatedFileError(path_ + ": unexpected end of file");
        }
    }

    std::uint8_t u8() {
        std::uint8_t b;
        read_exact(&b, 1);
        return b;
    }

    std::uint32_t u32_le() {
        std::uint8_t b[4];
        read_exact(b, 4);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    }

    std::uint64_t u64_le() {
        std::uint8_t b[8];
        read_exact(b, 8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
        return v;
    }

    std::uint32_t u32_be() {
        std::uint8_t b[4];
        read_exact(b, 4);
        return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
               (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
    }

    double f64_le() {
        const std::uint64_t bits = u64_le();
        double v;
        static_assert(sizeof(v) == sizeof(bits));
        __builtin_memcpy(&v, &bits, sizeof(v));
        return v;
    }

    /// True when the stream is exactly at end of file.
    bool at_eof() {
        return in_.peek() == std::char_traits<char>::eof();
    }

    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::ifstream in_;
};

/// Writes to "<path>.tmp" and renames into place on commit, so a failed or
/// aborted write never leaves a partial file at the destination.
class AtomicWriter {
public:
    explicit AtomicWriter(const std::filesystem::path& path)
        : final_(path), tmp_(path.string() + ".tmp"), out_(tmp_, std::ios::binary | std::ios::trunc) {
        if (!out_) throw IoError("cannot open " + tmp_.string() + " for writing");
    }

    ~AtomicWriter() {
        if (!committed_) {
            out_.close();
            std::error_code ec;
            std::filesystem::remove(tmp_, ec);
        }
    }

    void write(const void* src, std::size_t n) {
        out_.write(static_cast<const char*>(src), static_cast<std::streamsize>(n));
        if (!out_) throw IoError("write failed on " + tmp_.string());
    }

    void u8(std::uint8_t v) { write(&v, 1); }

    void u32_le(std::uint32_t v) {
        std::uint8_t b[4] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8),
                             static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 24)};
        write(b, 4);
    }

    void u64_le(std::uint64_t v) {
        std::uint8_t b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
        write(b, 8);
    }

    void f64_le(double v) {
        std::uint64_t bits;
        __builtin_memcpy(&bits, &v, sizeof(bits));
        u64_le(bits);
    }

    void commit() {
        out_.flush();
        if (!out_) throw IoError("flush failed on " + tmp_.string());
        out_.close();
        std::filesystem::rename(tmp_, final_);
        committed_ = true;
    }

private:
    std::filesystem::path final_;
    std::filesystem::path tmp_;
    std::ofstream out_;
    bool committed_ = false;
};

}  // namespace vdsh::io

#endif  // VDSH_IO_UTIL_HPP
