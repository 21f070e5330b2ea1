#ifndef CSPROXY_BITVEC_HPP
#define CSPROXY_BITVEC_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <vector>

#include "csproxy/errors.hpp"

namespace csproxy {

/// Non-owning view of a packed bit string. Bit i lives in words[i/64] at
/// position i%64 (LSB first). Unused high bits of the last word are zero.
struct BitView {
  const std::uint64_t* words = nullptr;
  std::size_t nbits = 0;

  bool get(std::size_t i) const {
    return (words[i >> 6] >> (i & 63)) & 1u;
  }
};

inline std::size_t hamming(BitView a, BitView b) {
  if (a.nbits != b.nbits)
    throw ArgumentError("hamming: bit lengths differ (" +
                        std::to_string(a.nbits) + " vs " +
                        std::to_string(b.nbits) + ")");
  const std::size_t nwords = (a.nbits + 63) / 64;
  std::size_t d = 0;
  for (std::size_t i = 0; i < nwords; ++i)
    d += static_cast<std::size_t>(std::popcount(a.words[i] ^ b.words[i]));
  return d;
}

/// Owning packed bit vector.
class BitVec {
 public:
  BitVec() = default;
  explicit BitVec(std::size_t nbits)
      : words_((nbits + 63) / 64, 0), nbits_(nbits) {}

  std::size_t size() const { return nbits_; }

  bool get(std::size_t i) const {
    return (words_[i >> 6] >> (i & 63)) & 1u;
  }

  void set(std::size_t i, bool v) {
    const std::uint64_t mask = std::uint64_t{1} << (i & 63);
    if (v)
      words_[i >> 6] |= mask;
    else
      words_[i >> 6] &= ~mask;
  }

  const std::vector<std::uint64_t>& words() const { return words_; }

  operator BitView() const { return BitView{words_.data(), nbits_}; }

  bool operator==(const BitVec&) const = default;

  /// Little-endian byte serialization: byte j holds bits 8j..8j+7, LSB first.
  std::vector<std::uint8_t> to_bytes() const {
    std::vector<std::uint8_t> out((nbits_ + 7) / 8, 0);
    for (std::size_t j = 0; j < out.size(); ++j)
      out[j] = static_cast<std::uint8_t>(words_[j >> 3] >> ((j & 7) * 8));
    return out;
  }

  static BitVec from_bytes(std::size_t nbits, const std::uint8_t* bytes,
                           std::size_t nbytes) {
    if (nbytes < (nbits + 7) / 8)
      throw ArgumentError("BitVec::from_bytes: byte buffer too short");
    BitVec v(nbits);
    for (std::size_t j = 0; j < (nbits + 7) / 8; ++j)
      v.words_[j >> 3] |= static_cast<std::uint64_t>(bytes[j]) << ((j & 7) * 8);
    v.mask_tail();
    return v;
  }

 private:
  void mask_tail() {
    const std::size_t rem = nbits_ & 63;
    if (rem != 0 && !words_.empty())
      words_.back() &= (~std::uint64_t{0}) >> (64 - rem);
  }

  std::vector<std::uint64_t> words_;
  std::size_t nbits_ = 0;
};

/// Dense row-major matrix of equal-length bit strings (one descriptor or
/// centroid per row). Rows are word-aligned so BitView slices are cheap.
class BitMatrix {
 public:
  BitMatrix() = default;
  BitMatrix(std::size_t rows, std::size_t bits)
      : rows_(rows),
        bits_(bits),
        words_per_row_((bits + 63) / 64),
        data_(rows * words_per_row_, 0) {}

  std::size_t rows() const { return rows_; }
  std::size_t bits() const { return bits_; }
  std::size_t words_per_row() const { return words_per_row_; }

  BitView row(std::size_t r) const {
    return BitView{data_.data() + r * words_per_row_, bits_};
  }

  bool get(std::size_t r, std::size_t bit) const {
    return row(r).get(bit);
  }

  void set(std::size_t r, std::size_t bit, bool v) {
    std::uint64_t* w = data_.data() + r * words_per_row_ + (bit >> 6);
    const std::uint64_t mask = std::uint64_t{1} << (bit & 63);
    if (v)
      *w |= mask;
    else
      *w &= ~mask;
  }

  void set_row(std::size_t r, BitView src) {
    if (src.nbits != bits_)
      throw ArgumentError("BitMatrix::set_row: bit length mismatch");
    std::memcpy(data_.data() + r * words_per_row_, src.words,
                words_per_row_ * sizeof(std::uint64_t));
  }

  BitVec row_copy(std::size_t r) const {
    BitVec v(bits_);
    const BitView src = row(r);
    for (std::size_t b = 0; b < bits_; ++b)
      if (src.get(b)) v.set(b, true);
    return v;
  }

  bool operator==(const BitMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t bits_ = 0;
  std::size_t words_per_row_ = 0;
  std::vector<std::uint64_t> data_;
};

}  // namespace csproxy

#endif
