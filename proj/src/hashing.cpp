#include "linhash/hashing.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace linhash {

namespace {

constexpr std::size_t kDenseBucketBits = 24;

void require_dims(const BitMatrix& h, const KeySet& s) {
    if (h.cols() != s.ambient_dim())
        throw std::invalid_argument("hash matrix has " + std::to_string(h.cols()) + " columns but keys live in F_2^" +
                                    std::to_string(s.ambient_dim()));
}

bool packable(const BitMatrix& h) { return h.rows() <= kWordBits && h.cols() <= kWordBits; }

std::string trimmed_line(std::istream& in, const char* what) {
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first != std::string::npos) return line.substr(first);
    }
    throw std::runtime_error(std::string("key-set file ended early while reading ") + what);
}

}  // namespace

KeySet::KeySet(std::size_t ambient_dim, std::vector<BitVector> keys, bool allow_zero)
    : ambient_dim_(ambient_dim), keys_(std::move(keys)), allow_zero_(allow_zero) {
    std::unordered_set<BitVector, BitVectorHash> seen;
    seen.reserve(keys_.size());
    for (const auto& k : keys_) {
        if (k.dim() != ambient_dim_) throw std::invalid_argument("key dimension does not match key-set ambient dim");
        if (!allow_zero_ && k.is_zero()) throw std::invalid_argument("zero key not allowed in this key set");
        if (!seen.insert(k).second) throw std::invalid_argument("duplicate key " + k.to_hex());
    }
}

std::vector<Word> KeySet::packed() const {
    if (ambient_dim_ > kWordBits) throw std::invalid_argument("packed keys need ambient dim <= 64");
    std::vector<Word> out;
    out.reserve(keys_.size());
    for (const auto& k : keys_) out.push_back(k.low_word());
    return out;
}

LoadHistogram::LoadHistogram(std::size_t bucket_dim, Map loads) : bucket_dim_(bucket_dim), loads_(std::move(loads)) {
    for (const auto& [label, count] : loads_) {
        if (label.dim() != bucket_dim_) throw std::invalid_argument("bucket label has wrong dimension");
        if (count == 0) throw std::invalid_argument("histogram must not store empty buckets");
        total_keys_ += count;
        max_load_ = std::max(max_load_, count);
    }
}

std::uint64_t LoadHistogram::load(const BitVector& y) const {
    const auto it = loads_.find(y);
    return it == loads_.end() ? 0 : it->second;
}

std::vector<std::pair<BitVector, std::uint64_t>> LoadHistogram::sorted() const {
    std::vector<std::pair<BitVector, std::uint64_t>> out(loads_.begin(), loads_.end());
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first.to_hex() < b.first.to_hex();
    });
    return out;
}

LoadHistogram bucket_loads(const BitMatrix& h, const KeySet& s) {
    require_dims(h, s);
    LoadHistogram::Map loads;
    if (packable(h)) {
        const PackedMap map(h);
        std::unordered_map<Word, std::uint64_t> counts;
        for (Word x : s.packed()) ++counts[map.apply(x)];
        for (const auto& [label, c] : counts) loads.emplace(BitVector::from_word(h.rows(), label), c);
    } else {
        for (const auto& x : s.keys()) ++loads[mat_vec_mul(h, x)];
    }
    return LoadHistogram(h.rows(), std::move(loads));
}

std::uint64_t fixed_bucket_load(const BitMatrix& h, const KeySet& s, const BitVector& y) {
    require_dims(h, s);
    if (y.dim() != h.rows()) throw std::invalid_argument("bucket label dimension does not match hash rows");
    std::uint64_t count = 0;
    if (packable(h)) {
        const PackedMap map(h);
        const Word target = y.low_word();
        for (const auto& k : s.keys()) count += map.apply(k.low_word()) == target ? 1 : 0;
    } else {
        for (const auto& k : s.keys()) count += mat_vec_mul(h, k) == y ? 1 : 0;
    }
    return count;
}

std::uint64_t max_load(const BitMatrix& h, const KeySet& s) {
    require_dims(h, s);
    if (s.empty()) return 0;
    if (packable(h) && h.rows() <= kDenseBucketBits) {
        const PackedMap map(h);
        std::vector<std::uint32_t> counts(std::size_t{1} << h.rows(), 0);
        std::uint32_t best = 0;
        for (const auto& k : s.keys()) best = std::max(best, ++counts[map.apply(k.low_word())]);
        return best;
    }
    return bucket_loads(h, s).max_load();
}

KeySetKind parse_key_set_kind(const std::string& name) {
    if (name == "random_distinct_nonzero" || name == "random") return KeySetKind::random_distinct_nonzero;
    if (name == "random_distinct") return KeySetKind::random_distinct;
    if (name == "subspace_plus_one" || name == "subspace") return KeySetKind::subspace_plus_one;
    if (name == "from_file" || name == "file") return KeySetKind::from_file;
    throw std::invalid_argument("unknown key-set kind '" + name + "'");
}

namespace {

KeySet random_distinct(const KeySetParams& p, bool nonzero, RngStream& rng) {
    const std::size_t u = p.u;
    const long double space = u >= 64 ? 0x1p64L : static_cast<long double>(std::uint64_t{1} << u);
    const long double available = nonzero ? space - 1 : space;
    if (static_cast<long double>(p.m) > available)
        throw std::invalid_argument("cannot draw " + std::to_string(p.m) + " distinct" + (nonzero ? " nonzero" : "") +
                                    " vectors from F_2^" + std::to_string(u));
    std::vector<BitVector> keys;
    keys.reserve(p.m);
    // Dense draws (more than half the space) use a partial Fisher-Yates over
    // the whole space; sparse draws reject duplicates.
    if (u <= 26 && static_cast<long double>(p.m) * 2 > available) {
        std::vector<Word> pool;
        pool.reserve(static_cast<std::size_t>(available));
        for (Word x = nonzero ? 1 : 0; x < (Word{1} << u); ++x) pool.push_back(x);
        for (std::uint64_t i = 0; i < p.m; ++i) {
            const auto j = i + rng.uniform_below(pool.size() - i);
            std::swap(pool[i], pool[j]);
            keys.push_back(BitVector::from_word(u, pool[i]));
        }
    } else {
        std::unordered_set<BitVector, BitVectorHash> seen;
        seen.reserve(p.m);
        while (keys.size() < p.m) {
            BitVector x = BitVector::random(u, rng);
            if (nonzero && x.is_zero()) continue;
            if (seen.insert(x).second) keys.push_back(std::move(x));
        }
    }
    return KeySet(u, std::move(keys), !nonzero);
}

KeySet subspace_plus_one(const KeySetParams& p) {
    if (p.d == 0) throw std::invalid_argument("subspace_plus_one requires d >= 1");
    if (p.d >= 63) throw std::invalid_argument("subspace_plus_one requires d <= 62");
    if (p.u < p.d + 1) throw std::invalid_argument("subspace_plus_one requires u >= d + 1");
    const std::uint64_t m = std::uint64_t{1} << p.d;
    if (p.m != 0 && p.m != m)
        throw std::invalid_argument("subspace_plus_one needs m = 2^d; m = " + std::to_string(p.m) +
                                    " is not 2^" + std::to_string(p.d));
    std::vector<BitVector> keys;
    keys.reserve(m);
    for (Word w = 1; w < m; ++w) keys.push_back(BitVector::from_word(p.u, w));
    keys.push_back(BitVector::unit(p.u, p.d));
    return KeySet(p.u, std::move(keys), false);
}

}  // namespace

KeySet build_key_set(KeySetKind kind, const KeySetParams& params, RngStream& rng) {
    switch (kind) {
        case KeySetKind::random_distinct_nonzero: return random_distinct(params, true, rng);
        case KeySetKind::random_distinct: return random_distinct(params, false, rng);
        case KeySetKind::subspace_plus_one: return subspace_plus_one(params);
        case KeySetKind::from_file: {
            KeySet s = read_key_set_file(params.path);
            if (params.u != 0 && params.u != s.ambient_dim())
                throw std::invalid_argument("key file has u = " + std::to_string(s.ambient_dim()) + ", expected " +
                                            std::to_string(params.u));
            if (params.m != 0 && params.m != s.size())
                throw std::invalid_argument("key file has m = " + std::to_string(s.size()) + ", expected " +
                                            std::to_string(params.m));
            return s;
        }
    }
    throw std::invalid_argument("unknown key-set kind");
}

void write_key_set(std::ostream& out, const KeySet& s) {
    out << s.ambient_dim() << ' ' << s.size() << ' ' << (s.allow_zero() ? 1 : 0) << '\n';
    for (const auto& k : s.keys()) out << k.to_hex() << '\n';
}

KeySet read_key_set(std::istream& in) {
    std::istringstream header(trimmed_line(in, "header"));
    long long u = -1, m = -1;
    std::string allow, extra;
    if (!(header >> u >> m >> allow) || u < 0 || m < 0 || (header >> extra))
        throw std::runtime_error("key-set file must start with 'u m allow_zero'");
    bool allow_zero = false;
    if (allow == "1" || allow == "true")
        allow_zero = true;
    else if (allow != "0" && allow != "false")
        throw std::runtime_error("allow_zero must be 0/1 or true/false, got '" + allow + "'");
    std::vector<BitVector> keys;
    keys.reserve(static_cast<std::size_t>(m));
    for (long long i = 0; i < m; ++i) {
        const std::string line = u == 0 ? std::string() : trimmed_line(in, "keys");
        try {
            keys.push_back(BitVector::from_hex(static_cast<std::size_t>(u), line));
        } catch (const std::invalid_argument& e) {
            throw std::runtime_error(std::string("malformed key: ") + e.what());
        }
    }
    try {
        return KeySet(static_cast<std::size_t>(u), std::move(keys), allow_zero);
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(std::string("invalid key set: ") + e.what());
    }
}

KeySet read_key_set_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open key-set file '" + path + "'");
    return read_key_set(in);
}

void write_histogram_csv(std::ostream& out, const LoadHistogram& hist) {
    out << "bucket_hex,load\n";
    for (const auto& [label, load] : hist.sorted()) out << label.to_hex() << ',' << load << '\n';
}

}  // namespace linhash
