#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "linhash/rng.hpp"

namespace linhash {

using Word = std::uint64_t;
inline constexpr std::size_t kWordBits = 64;

inline constexpr std::size_t words_for(std::size_t bits) { return (bits + kWordBits - 1) / kWordBits; }

// Vector in F_2^dim. Coordinate i lives in bit (i % 64) of word (i / 64);
// bits above dim are always zero.
class BitVector {
public:
    BitVector() = default;
    explicit BitVector(std::size_t dim) : dim_(dim), words_(words_for(dim), 0) {}

    // Low `dim` bits of `value`; dim may exceed 64 (upper coordinates zero).
    static BitVector from_word(std::size_t dim, Word value);
    // "101" means coordinate 0 = 1, coordinate 1 = 0, coordinate 2 = 1.
    static BitVector from_bits(std::string_view bits);
    static BitVector unit(std::size_t dim, std::size_t index);
    static BitVector random(std::size_t dim, RngStream& rng);

    std::size_t dim() const { return dim_; }
    std::span<const Word> words() const { return words_; }
    std::span<Word> words() { return words_; }

    bool get(std::size_t i) const { return (words_[i / kWordBits] >> (i % kWordBits)) & 1U; }
    void set(std::size_t i, bool v);
    void flip(std::size_t i) { words_[i / kWordBits] ^= Word{1} << (i % kWordBits); }

    bool is_zero() const;
    std::size_t popcount() const;
    // Index of the lowest set coordinate, or dim() if zero.
    std::size_t lowest_set() const;
    // First word, for dims up to 64.
    Word low_word() const { return words_.empty() ? 0 : words_[0]; }

    BitVector& operator^=(const BitVector& other);
    friend BitVector operator^(BitVector a, const BitVector& b) { return a ^= b; }
    friend bool operator==(const BitVector&, const BitVector&) = default;

    bool parity_of_and(const BitVector& other) const;

    std::string to_bits() const;
    std::string to_hex() const;
    static BitVector from_hex(std::size_t dim, std::string_view hex);

    std::size_t hash() const;

private:
    void mask_padding();

    std::size_t dim_ = 0;
    std::vector<Word> words_;
};

struct BitVectorHash {
    std::size_t operator()(const BitVector& v) const { return v.hash(); }
};

// Dense matrix over F_2 with bit-packed rows; represents a linear map
// F_2^cols -> F_2^rows.
class BitMatrix {
public:
    BitMatrix() = default;
    BitMatrix(std::size_t rows, std::size_t cols) : rows_(rows, BitVector(cols)), cols_(cols) {}
    explicit BitMatrix(std::vector<BitVector> rows, std::size_t cols);

    static BitMatrix identity(std::size_t n);
    static BitMatrix from_rows(std::initializer_list<std::string_view> bit_rows);

    std::size_t rows() const { return rows_.size(); }
    std::size_t cols() const { return cols_; }

    const BitVector& row(std::size_t i) const { return rows_[i]; }
    BitVector& row(std::size_t i) { return rows_[i]; }
    const std::vector<BitVector>& row_data() const { return rows_; }

    bool get(std::size_t r, std::size_t c) const { return rows_[r].get(c); }
    void set(std::size_t r, std::size_t c, bool v) { rows_[r].set(c, v); }

    // Submatrix made of the first `count` columns (the restriction to the
    // span of the first `count` standard basis vectors).
    BitMatrix leading_columns(std::size_t count) const;

    friend bool operator==(const BitMatrix&, const BitMatrix&) = default;

private:
    std::vector<BitVector> rows_;
    std::size_t cols_ = 0;
};

// Subspace of F_2^ambient_dim stored as a reduced row echelon basis. The pivot
// of a basis row is its lowest set coordinate; pivots strictly increase and
// every pivot column is zero outside its own row.
class Subspace {
public:
    Subspace() = default;
    explicit Subspace(std::size_t ambient_dim) : ambient_dim_(ambient_dim) {}

    static Subspace span_of(std::size_t ambient_dim, std::span<const BitVector> vectors);
    static Subspace full(std::size_t ambient_dim);

    std::size_t ambient_dim() const { return ambient_dim_; }
    std::size_t dim() const { return basis_.size(); }
    std::size_t codim() const { return ambient_dim_ - basis_.size(); }
    const std::vector<BitVector>& basis() const { return basis_; }
    const std::vector<std::size_t>& pivots() const { return pivots_; }

    // Clears every pivot coordinate of x; the result is the canonical coset
    // representative of x + V.
    BitVector reduce(BitVector x) const;
    bool contains(const BitVector& x) const;

    // Adds x to the span; returns false (and changes nothing) if x was
    // already a member.
    bool adjoin(const BitVector& x);

    // Coordinates that are not pivots, in increasing order. Canonical
    // representatives are supported on these.
    std::vector<std::size_t> free_coordinates() const;

    friend bool operator==(const Subspace&, const Subspace&) = default;

private:
    std::size_t ambient_dim_ = 0;
    std::vector<BitVector> basis_;
    std::vector<std::size_t> pivots_;
};

BitVector mat_vec_mul(const BitMatrix& m, const BitVector& x);
std::size_t rank(const BitMatrix& m);
Subspace row_space(const BitMatrix& m);
Subspace kernel_basis(const BitMatrix& m);
BitVector canonical_rep(const Subspace& v, const BitVector& x);

BitMatrix sample_uniform_matrix(std::size_t rows, std::size_t cols, RngStream& rng);
BitMatrix sample_surjective_matrix(std::size_t rows, std::size_t cols, RngStream& rng);
BitVector sample_outside(const Subspace& v, RngStream& rng);

// Packed evaluation for maps with at most 64 rows and 64 columns: bit i of
// the result is the parity of row i AND x.
class PackedMap {
public:
    explicit PackedMap(const BitMatrix& m);
    std::size_t rows() const { return rows_.size(); }
    Word apply(Word x) const {
        Word y = 0;
        for (std::size_t i = 0; i < rows_.size(); ++i)
            y |= static_cast<Word>(__builtin_parityll(rows_[i] & x)) << i;
        return y;
    }

private:
    std::vector<Word> rows_;
};

// Text forms. A vector file is "dim:<n>" followed by one hex line; a matrix
// file is "rows cols" followed by one hex row per line.
void write_vector(std::ostream& out, const BitVector& v);
BitVector read_vector(std::istream& in);
void write_matrix(std::ostream& out, const BitMatrix& m);
BitMatrix read_matrix(std::istream& in);

}  // namespace linhash
