#ifndef MAGLOC_RNG_HPP
#define MAGLOC_RNG_HPP

#include <cstdint>
#include <initializer_list>

namespace magloc {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Counter-based stream: the value depends only on the key words, never on call order.
inline std::uint64_t hash_words(std::initializer_list<std::uint64_t> words) {
    std::uint64_t h = 0x243f6a8885a308d3ULL;
    for (auto w : words) h = splitmix64(h ^ splitmix64(w));
    return h;
}

// Uniform in (0,1), never exactly 0 or 1.
inline double to_unit(std::uint64_t bits) {
    return (static_cast<double>(bits >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    return hash_words({seed, stream, index});
}

// Small sequential generator for solver start vectors.
class SplitMix {
public:
    explicit SplitMix(std::uint64_t s) : state_(s) {}
    std::uint64_t next() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return splitmix64(state_);
    }
    double uniform() { return to_unit(next()); }

private:
    std::uint64_t state_;
};

}  // namespace magloc

#endif
