#ifndef VDSH_CODES_HPP
#define VDSH_CODES_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace vdsh {

/// One K-bit code viewed as packed 64-bit words. Bit k of the code is bit
/// (k mod 64) of word (k div 64); a set bit means +1, clear means -1.
struct CodeView {
    std::span<const std::uint64_t> words;
    std::size_t bits = 0;
};

/// Number of positions where a and b differ. Throws DimensionError when the
/// bit widths disagree.
std::size_t hamming_distance(CodeView a, CodeView b);

/// K x N matrix of {-1,+1} codes, stored packed 64 bits per word per code.
/// Unused bits of the last word are always zero.
class HashCodeMatrix {
public:
    HashCodeMatrix() = default;
    explicit HashCodeMatrix(std::size_t bits) : bits_(bits) {}

    std::size_t bits() const { return bits_; }
    std::size_t count() const { return count_; }
    std::size_t words_per_code() const { return (bits_ + 63) / 64; }

    /// Append one code given as {-1,+1} entries of length bits().
    void append(std::span<const std::int8_t> code);

    /// Entry in {-1,+1}.
    int get(std::size_t index, std::size_t bit) const {
        const std::uint64_t w = words_[index * words_per_code() + bit / 64];
        return (w >> (bit % 64)) & 1 ? 1 : -1;
    }

    CodeView view(std::size_t index) const {
        return {{words_.data() + index * words_per_code(), words_per_code()}, bits_};
    }

    std::span<const std::uint64_t> raw_words() const { return words_; }

    bool operator==(const HashCodeMatrix& o) const = default;

private:
    std::size_t bits_ = 0;
    std::size_t count_ = 0;
    std::vector<std::uint64_t> words_;
};

/// Code file persistence. Binary little-endian layout:
///   magic "VDSB" | version u32=1 | K u32 | N u64 |
///   N packed codes of ceil(K/64) u64 words each.
void save_codes(const HashCodeMatrix& codes, const std::filesystem::path& path);

/// Errors: BadMagicError, BadVersionError, TruncatedFileError, ShapeError.
HashCodeMatrix load_codes(const std::filesystem::path& path);

}  // namespace vdsh

#endif  // VDSH_CODES_HPP
