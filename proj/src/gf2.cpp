#include "linhash/gf2.hpp"

#include <algorithm>
#include <bit>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace linhash {

namespace {

int hex_digit_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

std::string next_content_line(std::istream& in, const char* what) {
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
            line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        return line.substr(first);
    }
    throw std::runtime_error(std::string("unexpected end of input while reading ") + what);
}

}  // namespace

BitVector BitVector::from_word(std::size_t dim, Word value) {
    BitVector v(dim);
    if (!v.words_.empty()) {
        v.words_[0] = value;
        v.mask_padding();
    }
    return v;
}

BitVector BitVector::from_bits(std::string_view bits) {
    BitVector v(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i] == '1')
            v.set(i, true);
        else if (bits[i] != '0')
            throw std::invalid_argument("bit string may contain only '0' and '1'");
    }
    return v;
}

BitVector BitVector::unit(std::size_t dim, std::size_t index) {
    if (index >= dim) throw std::invalid_argument("unit vector index out of range");
    BitVector v(dim);
    v.set(index, true);
    return v;
}

BitVector BitVector::random(std::size_t dim, RngStream& rng) {
    BitVector v(dim);
    for (auto& w : v.words_) w = rng.next_u64();
    v.mask_padding();
    return v;
}

void BitVector::set(std::size_t i, bool v) {
    const Word mask = Word{1} << (i % kWordBits);
    if (v)
        words_[i / kWordBits] |= mask;
    else
        words_[i / kWordBits] &= ~mask;
}

bool BitVector::is_zero() const {
    return std::all_of(words_.begin(), words_.end(), [](Word w) { return w == 0; });
}

std::size_t BitVector::popcount() const {
    std::size_t s = 0;
    for (Word w : words_) s += static_cast<std::size_t>(std::popcount(w));
    return s;
}

std::size_t BitVector::lowest_set() const {
    for (std::size_t i = 0; i < words_.size(); ++i)
        if (words_[i] != 0) return i * kWordBits + static_cast<std::size_t>(std::countr_zero(words_[i]));
    return dim_;
}

BitVector& BitVector::operator^=(const BitVector& other) {
    if (other.dim_ != dim_) throw std::invalid_argument("vector dimension mismatch");
    for (std::size_t i = 0; i < words_.size(); ++i) words_[i] ^= other.words_[i];
    return *this;
}

bool BitVector::parity_of_and(const BitVector& other) const {
    if (other.dim_ != dim_) throw std::invalid_argument("vector dimension mismatch");
    Word acc = 0;
    for (std::size_t i = 0; i < words_.size(); ++i) acc ^= words_[i] & other.words_[i];
    return (std::popcount(acc) & 1) != 0;
}

std::string BitVector::to_bits() const {
    std::string s(dim_, '0');
    for (std::size_t i = 0; i < dim_; ++i)
        if (get(i)) s[i] = '1';
    return s;
}

std::string BitVector::to_hex() const {
    static constexpr char kDigits[] = "0123456789abcdef";
    const std::size_t digits = (dim_ + 3) / 4;
    std::string s(digits, '0');
    for (std::size_t d = 0; d < digits; ++d) {
        const std::size_t bit = 4 * d;
        const unsigned nibble = static_cast<unsigned>((words_[bit / kWordBits] >> (bit % kWordBits)) & 0xFU);
        s[digits - 1 - d] = kDigits[nibble];
    }
    return s;
}

BitVector BitVector::from_hex(std::size_t dim, std::string_view hex) {
    const std::size_t digits = (dim + 3) / 4;
    if (hex.size() != digits)
        throw std::invalid_argument("hex vector of dim " + std::to_string(dim) + " needs " +
                                    std::to_string(digits) + " digits, got '" + std::string(hex) + "'");
    BitVector v(dim);
    for (std::size_t d = 0; d < digits; ++d) {
        const int value = hex_digit_value(hex[digits - 1 - d]);
        if (value < 0) throw std::invalid_argument("invalid hex digit in '" + std::string(hex) + "'");
        const std::size_t bit = 4 * d;
        v.words_[bit / kWordBits] |= static_cast<Word>(value) << (bit % kWordBits);
    }
    const Word before = v.words_.empty() ? 0 : v.words_.back();
    v.mask_padding();
    if (!v.words_.empty() && v.words_.back() != before)
        throw std::invalid_argument("hex vector '" + std::string(hex) + "' sets bits beyond dim " +
                                    std::to_string(dim));
    return v;
}

std::size_t BitVector::hash() const {
    std::uint64_t h = mix64(dim_);
    for (Word w : words_) h = mix64(h ^ w);
    return static_cast<std::size_t>(h);
}

void BitVector::mask_padding() {
    const std::size_t tail = dim_ % kWordBits;
    if (tail != 0 && !words_.empty()) words_.back() &= (Word{1} << tail) - 1;
}

BitMatrix::BitMatrix(std::vector<BitVector> rows, std::size_t cols) : rows_(std::move(rows)), cols_(cols) {
    for (const auto& r : rows_)
        if (r.dim() != cols_) throw std::invalid_argument("matrix row has wrong dimension");
}

BitMatrix BitMatrix::identity(std::size_t n) {
    BitMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m.set(i, i, true);
    return m;
}

BitMatrix BitMatrix::from_rows(std::initializer_list<std::string_view> bit_rows) {
    std::vector<BitVector> rows;
    for (auto r : bit_rows) rows.push_back(BitVector::from_bits(r));
    const std::size_t cols = rows.empty() ? 0 : rows.front().dim();
    return BitMatrix(std::move(rows), cols);
}

BitMatrix BitMatrix::leading_columns(std::size_t count) const {
    if (count > cols_) throw std::invalid_argument("leading_columns: count exceeds column count");
    BitMatrix out(rows(), count);
    for (std::size_t r = 0; r < rows(); ++r)
        for (std::size_t c = 0; c < count; ++c)
            if (get(r, c)) out.set(r, c, true);
    return out;
}

Subspace Subspace::span_of(std::size_t ambient_dim, std::span<const BitVector> vectors) {
    Subspace s(ambient_dim);
    for (const auto& v : vectors) s.adjoin(v);
    return s;
}

Subspace Subspace::full(std::size_t ambient_dim) {
    Subspace s(ambient_dim);
    for (std::size_t i = 0; i < ambient_dim; ++i) {
        s.basis_.push_back(BitVector::unit(ambient_dim, i));
        s.pivots_.push_back(i);
    }
    return s;
}

BitVector Subspace::reduce(BitVector x) const {
    if (x.dim() != ambient_dim_) throw std::invalid_argument("vector dimension does not match subspace");
    for (std::size_t i = 0; i < basis_.size(); ++i)
        if (x.get(pivots_[i])) x ^= basis_[i];
    return x;
}

bool Subspace::contains(const BitVector& x) const { return reduce(x).is_zero(); }

bool Subspace::adjoin(const BitVector& x) {
    BitVector r = reduce(x);
    const std::size_t p = r.lowest_set();
    if (p == r.dim()) return false;
    for (auto& row : basis_)
        if (row.get(p)) row ^= r;
    const auto pos = std::lower_bound(pivots_.begin(), pivots_.end(), p) - pivots_.begin();
    pivots_.insert(pivots_.begin() + pos, p);
    basis_.insert(basis_.begin() + pos, std::move(r));
    return true;
}

std::vector<std::size_t> Subspace::free_coordinates() const {
    std::vector<std::size_t> out;
    out.reserve(codim());
    std::size_t next_pivot = 0;
    for (std::size_t c = 0; c < ambient_dim_; ++c) {
        if (next_pivot < pivots_.size() && pivots_[next_pivot] == c) {
            ++next_pivot;
            continue;
        }
        out.push_back(c);
    }
    return out;
}

BitVector mat_vec_mul(const BitMatrix& m, const BitVector& x) {
    if (x.dim() != m.cols())
        throw std::invalid_argument("mat_vec_mul: vector dim " + std::to_string(x.dim()) +
                                    " does not match matrix cols " + std::to_string(m.cols()));
    BitVector y(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        if (m.row(i).parity_of_and(x)) y.set(i, true);
    return y;
}

Subspace row_space(const BitMatrix& m) { return Subspace::span_of(m.cols(), m.row_data()); }

std::size_t rank(const BitMatrix& m) {
    std::vector<BitVector> rows = m.row_data();
    std::size_t r = 0;
    for (std::size_t c = 0; c < m.cols() && r < rows.size(); ++c) {
        std::size_t sel = r;
        while (sel < rows.size() && !rows[sel].get(c)) ++sel;
        if (sel == rows.size()) continue;
        std::swap(rows[r], rows[sel]);
        for (std::size_t i = r + 1; i < rows.size(); ++i)
            if (rows[i].get(c)) rows[i] ^= rows[r];
        ++r;
    }
    return r;
}

Subspace kernel_basis(const BitMatrix& m) {
    const Subspace rs = row_space(m);
    Subspace ker(m.cols());
    const auto& pivots = rs.pivots();
    for (std::size_t f : rs.free_coordinates()) {
        BitVector v = BitVector::unit(m.cols(), f);
        for (std::size_t i = 0; i < pivots.size(); ++i)
            if (rs.basis()[i].get(f)) v.set(pivots[i], true);
        ker.adjoin(v);
    }
    return ker;
}

BitVector canonical_rep(const Subspace& v, const BitVector& x) {
    if (x.dim() != v.ambient_dim())
        throw std::invalid_argument("canonical_rep: vector dim does not match subspace ambient dim");
    return v.reduce(x);
}

BitMatrix sample_uniform_matrix(std::size_t rows, std::size_t cols, RngStream& rng) {
    std::vector<BitVector> data;
    data.reserve(rows);
    for (std::size_t i = 0; i < rows; ++i) data.push_back(BitVector::random(cols, rng));
    return BitMatrix(std::move(data), cols);
}

BitMatrix sample_surjective_matrix(std::size_t rows, std::size_t cols, RngStream& rng) {
    if (cols < rows) throw std::invalid_argument("sample_surjective_matrix: requires cols >= rows");
    for (;;) {
        BitMatrix m = sample_uniform_matrix(rows, cols, rng);
        if (rank(m) == rows) return m;
    }
}

BitVector sample_outside(const Subspace& v, RngStream& rng) {
    if (v.dim() >= v.ambient_dim()) throw std::invalid_argument("sample_outside: subspace is the full space");
    for (;;) {
        BitVector x = BitVector::random(v.ambient_dim(), rng);
        if (!v.contains(x)) return x;
    }
}

PackedMap::PackedMap(const BitMatrix& m) {
    if (m.rows() > kWordBits || m.cols() > kWordBits)
        throw std::invalid_argument("PackedMap supports at most 64 rows and 64 columns");
    rows_.reserve(m.rows());
    for (const auto& r : m.row_data()) rows_.push_back(r.low_word());
}

void write_vector(std::ostream& out, const BitVector& v) { out << "dim:" << v.dim() << '\n' << v.to_hex() << '\n'; }

BitVector read_vector(std::istream& in) {
    const std::string header = next_content_line(in, "vector header");
    if (header.rfind("dim:", 0) != 0) throw std::runtime_error("vector file must start with 'dim:<n>'");
    std::size_t dim = 0;
    try {
        std::size_t used = 0;
        dim = std::stoull(header.substr(4), &used);
        if (used != header.size() - 4) throw std::invalid_argument("trailing text");
    } catch (const std::exception&) {
        throw std::runtime_error("malformed vector header '" + header + "'");
    }
    if (dim == 0) return BitVector(0);
    const std::string hex = next_content_line(in, "vector body");
    try {
        return BitVector::from_hex(dim, hex);
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(e.what());
    }
}

void write_matrix(std::ostream& out, const BitMatrix& m) {
    out << m.rows() << ' ' << m.cols() << '\n';
    for (const auto& r : m.row_data()) out << r.to_hex() << '\n';
}

BitMatrix read_matrix(std::istream& in) {
    std::istringstream header(next_content_line(in, "matrix header"));
    long long rows = -1, cols = -1;
    std::string extra;
    if (!(header >> rows >> cols) || rows < 0 || cols < 0 || (header >> extra))
        throw std::runtime_error("matrix file must start with 'rows cols'");
    std::vector<BitVector> data;
    for (long long i = 0; i < rows; ++i) {
        if (cols == 0) {
            data.emplace_back(0);
            continue;
        }
        try {
            data.push_back(BitVector::from_hex(static_cast<std::size_t>(cols), next_content_line(in, "matrix row")));
        } catch (const std::invalid_argument& e) {
            throw std::runtime_error(e.what());
        }
    }
    return BitMatrix(std::move(data), static_cast<std::size_t>(cols));
}

}  // namespace linhash
