#include "vdsh/codes.hpp"

#include <bit>
#include <string>

#include "vdsh/errors.hpp"
#include "vdsh/io_util.hpp"

namespace vdsh {

namespace {
constexpr char kMagic[4] = {'V', 'D', 'S', 'B'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

std::size_t hamming_distance(CodeView a, CodeView b) {
    if (a.bits != b.bits) {
        throw DimensionError("hamming_distance: widths differ (" + std::to_string(a.bits) +
                             " vs " + std::to_string(b.bits) + ")");
    }
    std::size_t d = 0;
    for (std::size_t w = 0; w < a.words.size(); ++w) {
        d += static_cast<std::size_t>(std::popcount(a.words[w] ^ b.words[w]));
    }
    return d;
}

void HashCodeMatrix::append(std::span<const std::int8_t> code) {
    if (code.size() != bits_) {
        throw DimensionError("HashCodeMatrix::append: code has " + std::to_string(code.size()) +
                             " bits, matrix holds " + std::to_string(bits_));
    }
    const std::size_t w = words_per_code();
    words_.resize(words_.size() + w, 0);
    std::uint64_t* dst = words_.data() + count_ * w;
    for (std::size_t k = 0; k < bits_; ++k) {
        const std::int8_t v = code[k];
        if (v == 1) {
            dst[k / 64] |= std::uint64_t{1} << (k % 64);
        } else if (v != -1) {
            throw NumericError("HashCodeMatrix::append: entry " + std::to_string(k) +
                               " is not -1 or +1");
        }
    }
    ++count_;
}

void save_codes(const HashCodeMatrix& codes, const std::filesystem::path& path) {
    io::AtomicWriter out(path);
    out.write(kMagic, 4);
    out.u32_le(kVersion);
    out.u32_le(static_cast<std::uint32_t>(codes.bits()));
    out.u64_le(static_cast<std::uint64_t>(codes.count()));
    for (std::uint64_t w : codes.raw_words()) out.u64_le(w);
    out.commit();
}

HashCodeMatrix load_codes(const std::filesystem::path& path) {
    io::Reader in(path);
    char magic[4];
    in.read_exact(magic, 4);
    if (magic[0] != kMagic[0] || magic[1] != kMagic[1] || magic[2] != kMagic[2] ||
        magic[3] != kMagic[3]) {
        throw BadMagicError(in.path() + ": not a code file (bad magic)");
    }
    const std::uint32_t version = in.u32_le();
    if (version != kVersion) {
        throw BadVersionError(in.path() + ": unsupported code file version " +
                              std::to_string(version));
    }
    const std::uint32_t bits = in.u32_le();
    if (bits == 0) throw ShapeError(in.path() + ": zero code width");
    const std::uint64_t n = in.u64_le();

    HashCodeMatrix codes(bits);
    const std::size_t wpc = codes.words_per_code();
    const std::uint64_t tail_mask =
        bits % 64 == 0 ? ~std::uint64_t{0} : ((std::uint64_t{1} << (bits % 64)) - 1);
    std::vector<std::int8_t> buf(bits);
    std::vector<std::uint64_t> words(wpc);
    for (std::uint64_t i = 0; i < n; ++i) {
        for (std::size_t w = 0; w < wpc; ++w) words[w] = in.u64_le();
        if ((words[wpc - 1] & ~tail_mask) != 0) {
            throw ShapeError(in.path() + ": nonzero padding bits in code " + std::to_string(i));
        }
        for (std::size_t k = 0; k < bits; ++k) {
            buf[k] = (words[k / 64] >> (k % 64)) & 1 ? 1 : -1;
        }
        codes.append(buf);
    }
    if (!in.at_eof()) {
        throw ShapeError(in.path() + ": trailing bytes after payload");
    }
    return codes;
}

}  // namespace vdsh
