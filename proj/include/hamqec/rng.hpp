#pragma once

#include <cmath>
#include <cstdint>

namespace hamqec {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t hash_combine(uint64_t a, uint64_t b) { return splitmix64(a ^ splitmix64(b)); }

inline uint64_t hash_key(uint64_t a, uint64_t b, uint64_t c) { return hash_combine(hash_combine(a, b), c); }

inline double to_unit(uint64_t x) { return double(x >> 11) * 0x1.0p-53; }

// counter based stream; position in the stream is the only state
class Stream {
  public:
    using result_type = uint64_t;
    explicit Stream(uint64_t key) : key_(key) {}
    static constexpr uint64_t min() { return 0; }
    static constexpr uint64_t max() { return ~uint64_t(0); }
    uint64_t operator()() { return splitmix64(key_ + 0x632be59bd9b4e019ULL * (++ctr_)); }
    double uniform() { return to_unit((*this)()); }
    // n > 0
    uint32_t below(uint32_t n) { return uint32_t((((*this)() >> 32) * uint64_t(n)) >> 32); }
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

  private:
    uint64_t key_;
    uint64_t ctr_ = 0;
};

}  // namespace hamqec
