#pragma once

#include <cstdint>

namespace octofunc {

// Counter-based splittable RNG (splitmix64 core). Streams are a pure function
// of the seed, so identical seeds reproduce bit-identical sequences on any
// platform. split() derives an independent stream without advancing this one.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    float uniform_float() { return static_cast<float>(uniform()); }

    // inclusive range
    int uniform_int(int lo, int hi) {
        return lo + static_cast<int>(next_u64() % static_cast<uint64_t>(hi - lo + 1));
    }

    float gaussian(float mean, float stddev);

    // pick an index with probability proportional to weights[i]
    int categorical(const float* weights, int n);

    Rng split(uint64_t tag) const;

private:
    uint64_t state_;
};

}  // namespace octofunc
