#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "linhash/gf2.hpp"
#include "linhash/rng.hpp"

namespace linhash {

// Ordered set of distinct keys in F_2^u. Distinctness (and the nonzero rule
// when allow_zero is false) is checked on construction.
class KeySet {
public:
    KeySet() = default;
    KeySet(std::size_t ambient_dim, std::vector<BitVector> keys, bool allow_zero);

    std::size_t ambient_dim() const { return ambient_dim_; }
    std::size_t size() const { return keys_.size(); }
    bool empty() const { return keys_.empty(); }
    bool allow_zero() const { return allow_zero_; }
    const std::vector<BitVector>& keys() const { return keys_; }
    const BitVector& operator[](std::size_t i) const { return keys_[i]; }

    // Keys as single words; only valid when ambient_dim() <= 64.
    std::vector<Word> packed() const;

    friend bool operator==(const KeySet&, const KeySet&) = default;

private:
    std::size_t ambient_dim_ = 0;
    std::vector<BitVector> keys_;
    bool allow_zero_ = false;
};

class LoadHistogram {
public:
    using Map = std::unordered_map<BitVector, std::uint64_t, BitVectorHash>;

    LoadHistogram(std::size_t bucket_dim, Map loads);

    std::size_t bucket_dim() const { return bucket_dim_; }
    const Map& loads() const { return loads_; }
    std::uint64_t total_keys() const { return total_keys_; }
    std::uint64_t max_load() const { return max_load_; }
    std::uint64_t load(const BitVector& y) const;

    // (label, load) pairs by descending load, then ascending hex label.
    std::vector<std::pair<BitVector, std::uint64_t>> sorted() const;

private:
    std::size_t bucket_dim_;
    Map loads_;
    std::uint64_t total_keys_ = 0;
    std::uint64_t max_load_ = 0;
};

LoadHistogram bucket_loads(const BitMatrix& h, const KeySet& s);
std::uint64_t fixed_bucket_load(const BitMatrix& h, const KeySet& s, const BitVector& y);

// Maximum bucket load without materializing the histogram.
std::uint64_t max_load(const BitMatrix& h, const KeySet& s);

enum class KeySetKind { random_distinct_nonzero, random_distinct, subspace_plus_one, from_file };

struct KeySetParams {
    std::size_t u = 0;
    std::uint64_t m = 0;  // for subspace_plus_one, 0 means "derive from d"
    std::size_t d = 0;    // subspace dimension for subspace_plus_one
    std::string path;     // for from_file
};

KeySet build_key_set(KeySetKind kind, const KeySetParams& params, RngStream& rng);
KeySetKind parse_key_set_kind(const std::string& name);

// Key-set file: "u m allow_zero" then one hex vector per line.
void write_key_set(std::ostream& out, const KeySet& s);
KeySet read_key_set(std::istream& in);
KeySet read_key_set_file(const std::string& path);

// Histogram CSV with columns bucket_hex,load.
void write_histogram_csv(std::ostream& out, const LoadHistogram& hist);

}  // namespace linhash
