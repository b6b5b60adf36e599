#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "linhash/gf2.hpp"
#include "oracles.hpp"

using namespace linhash;

namespace {

std::vector<std::uint64_t> words_of(const BitMatrix& m) {
    std::vector<std::uint64_t> out;
    for (const auto& r : m.row_data()) out.push_back(r.low_word());
    return out;
}

}  // namespace

TEST_CASE("bit vector basics") {
    const auto v = BitVector::from_bits("101");
    CHECK(v.dim() == 3);
    CHECK(v.get(0));
    CHECK_FALSE(v.get(1));
    CHECK(v.get(2));
    CHECK(v.popcount() == 2);
    CHECK(v.lowest_set() == 0);
    CHECK(v.to_bits() == "101");
    CHECK(BitVector(5).lowest_set() == 5);

    BitVector big(130);
    big.set(129, true);
    big.set(64, true);
    CHECK(big.popcount() == 2);
    CHECK(big.lowest_set() == 64);
    CHECK(BitVector::from_hex(130, big.to_hex()) == big);
    CHECK_THROWS_AS(BitVector::from_hex(3, "f"), std::invalid_argument);
    CHECK(BitVector::from_word(3, 0xff).popcount() == 3);
}

TEST_CASE("mat_vec_mul examples") {
    CHECK(mat_vec_mul(BitMatrix::identity(3), BitVector::from_bits("101")) == BitVector::from_bits("101"));
    CHECK(mat_vec_mul(BitMatrix(2, 3), BitVector::from_bits("111")).is_zero());
    const auto m = BitMatrix::from_rows({"110", "011"});
    CHECK(mat_vec_mul(m, BitVector::from_bits("110")) == BitVector::from_bits("01"));
    CHECK_THROWS_AS(mat_vec_mul(m, BitVector(4)), std::invalid_argument);
}

TEST_CASE("mat_vec_mul agrees with the scalar oracle") {
    RngStream rng(11, 0);
    for (int t = 0; t < 200; ++t) {
        const std::size_t rows = 1 + rng.uniform_below(10), cols = 1 + rng.uniform_below(20);
        const auto m = sample_uniform_matrix(rows, cols, rng);
        const auto x = BitVector::random(cols, rng);
        CHECK(mat_vec_mul(m, x).low_word() == oracle::mat_vec(words_of(m), x.low_word(), static_cast<unsigned>(cols)));
        CHECK(PackedMap(m).apply(x.low_word()) == mat_vec_mul(m, x).low_word());
    }
}

TEST_CASE("rank examples and exhaustive oracle up to 4x4") {
    CHECK(rank(BitMatrix::identity(3)) == 3);
    CHECK(rank(BitMatrix(4, 4)) == 0);
    CHECK(rank(BitMatrix::from_rows({"110", "011", "101"})) == 2);
    for (unsigned rows = 1; rows <= 4; ++rows)
        for (unsigned cols = 1; cols <= 4; ++cols)
            for (std::uint64_t code = 0; code < (std::uint64_t{1} << (rows * cols)); ++code) {
                BitMatrix m(rows, cols);
                for (unsigned r = 0; r < rows; ++r)
                    for (unsigned c = 0; c < cols; ++c) m.set(r, c, (code >> (r * cols + c)) & 1U);
                REQUIRE(rank(m) == oracle::rank(words_of(m)));
            }
}

TEST_CASE("kernel_basis") {
    CHECK(kernel_basis(BitMatrix::identity(4)).dim() == 0);
    CHECK(kernel_basis(BitMatrix(2, 5)).dim() == 5);
    const auto k = kernel_basis(BitMatrix::from_rows({"11"}));
    REQUIRE(k.dim() == 1);
    CHECK(k.basis()[0] == BitVector::from_bits("11"));

    RngStream rng(3, 1);
    for (int t = 0; t < 100; ++t) {
        const std::size_t rows = 1 + rng.uniform_below(6), cols = 1 + rng.uniform_below(8);
        const auto m = sample_uniform_matrix(rows, cols, rng);
        const auto ker = kernel_basis(m);
        CHECK(ker.dim() + rank(m) == cols);
        std::size_t zeros = 0;
        for (Word x = 0; x < (Word{1} << cols); ++x) {
            const auto v = BitVector::from_word(cols, x);
            const bool in_ker = mat_vec_mul(m, v).is_zero();
            zeros += in_ker ? 1 : 0;
            CHECK(ker.contains(v) == in_ker);
        }
        CHECK(zeros == (std::size_t{1} << ker.dim()));
    }
}

TEST_CASE("canonical_rep") {
    const auto x = BitVector::from_bits("101");
    CHECK(canonical_rep(Subspace(3), x) == x);
    CHECK(canonical_rep(Subspace::full(3), x).is_zero());
    const std::vector<BitVector> gen{BitVector::from_bits("110")};
    const auto v = Subspace::span_of(3, gen);
    CHECK(canonical_rep(v, BitVector::from_bits("100")) == BitVector::from_bits("010"));
    CHECK(canonical_rep(v, BitVector::from_bits("010")) == BitVector::from_bits("010"));
    CHECK_THROWS_AS(canonical_rep(v, BitVector(4)), std::invalid_argument);

    // Two vectors share a representative exactly when they differ by an element of V.
    RngStream rng(5, 5);
    for (int t = 0; t < 50; ++t) {
        std::vector<BitVector> gens;
        const std::size_t k = rng.uniform_below(5);
        for (std::size_t i = 0; i < k; ++i) gens.push_back(BitVector::random(6, rng));
        const auto s = Subspace::span_of(6, gens);
        std::vector<std::uint64_t> gw;
        for (const auto& g : gens) gw.push_back(g.low_word());
        const auto elems = oracle::span(gw);
        for (Word a = 0; a < 64; ++a) {
            const auto ra = canonical_rep(s, BitVector::from_word(6, a));
            for (std::uint64_t w : elems) CHECK(canonical_rep(s, BitVector::from_word(6, a ^ w)) == ra);
        }
    }
}

TEST_CASE("subspace adjoin and free coordinates") {
    Subspace s(4);
    CHECK(s.adjoin(BitVector::from_bits("1100")));
    CHECK_FALSE(s.adjoin(BitVector::from_bits("1100")));
    CHECK(s.adjoin(BitVector::from_bits("0110")));
    CHECK_FALSE(s.adjoin(BitVector::from_bits("1010")));
    CHECK(s.dim() == 2);
    CHECK(s.codim() == 2);
    CHECK(s.free_coordinates().size() == 2);
    for (std::size_t i = 0; i < s.dim(); ++i)
        for (std::size_t j = 0; j < s.dim(); ++j) CHECK(s.basis()[j].get(s.pivots()[i]) == (i == j));
}

TEST_CASE("uniform matrix sampling") {
    RngStream a(42, 7), b(42, 7);
    CHECK(sample_uniform_matrix(2, 2, a) == sample_uniform_matrix(2, 2, b));

    RngStream rng(1, 2);
    const int n = 100000;
    int ones = 0, invertible = 0;
    for (int i = 0; i < n; ++i) {
        const auto m = sample_uniform_matrix(2, 2, rng);
        ones += static_cast<int>(m.row(0).popcount() + m.row(1).popcount());
        invertible += rank(m) == 2 ? 1 : 0;
    }
    const double mean = ones / (4.0 * n);
    CHECK(std::fabs(mean - 0.5) <= 3 * std::sqrt(0.25 / (4.0 * n)));
    const double p = invertible / static_cast<double>(n);
    CHECK(std::fabs(p - 0.375) <= 3 * std::sqrt(0.375 * 0.625 / n));
}

TEST_CASE("surjective sampling and sampling outside a subspace") {
    RngStream rng(9, 9);
    for (int i = 0; i < 20; ++i) CHECK(sample_surjective_matrix(1, 1, rng) == BitMatrix::from_rows({"1"}));
    for (int i = 0; i < 200; ++i) CHECK(rank(sample_surjective_matrix(4, 6, rng)) == 4);
    CHECK_THROWS_AS(sample_surjective_matrix(3, 2, rng), std::invalid_argument);

    for (int i = 0; i < 20; ++i) CHECK(sample_outside(Subspace(1), rng) == BitVector::from_bits("1"));
    CHECK_THROWS_AS(sample_outside(Subspace::full(3), rng), std::invalid_argument);

    const std::vector<BitVector> gen{BitVector::from_bits("110")};
    const auto v = Subspace::span_of(3, gen);
    std::map<Word, int> freq;
    const int n = 60000;
    for (int i = 0; i < n; ++i) {
        const auto w = sample_outside(v, rng);
        CHECK_FALSE(v.contains(w));
        ++freq[w.low_word()];
    }
    CHECK(freq.size() == 6);
    for (const auto& [w, c] : freq) CHECK(std::fabs(c / static_cast<double>(n) - 1.0 / 6) <= 3 * std::sqrt((1.0 / 6) * (5.0 / 6) / n));
}

TEST_CASE("vector and matrix text round trip") {
    RngStream rng(2, 2);
    const auto v = BitVector::random(77, rng);
    std::stringstream ss;
    write_vector(ss, v);
    CHECK(read_vector(ss) == v);

    const auto m = sample_uniform_matrix(5, 70, rng);
    std::stringstream ms;
    write_matrix(ms, m);
    CHECK(read_matrix(ms) == m);

    std::stringstream bad("dim:4\nzz\n");
    CHECK_THROWS_AS(read_vector(bad), std::runtime_error);
}
