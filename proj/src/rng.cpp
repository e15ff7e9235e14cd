#include "octofunc/rng.hpp"

#include <cmath>

namespace octofunc {

namespace {
uint64_t mix64(uint64_t x) {
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}
}  // namespace

float Rng::gaussian(float mean, float stddev) {
    // Box-Muller; the second variate is discarded to keep the stream layout
    // independent of call interleaving.
    double u1 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    if (u1 < 1e-300) u1 = 1e-300;
    double r = std::sqrt(-2.0 * std::log(u1));
    double z = r * std::cos(2.0 * 3.14159265358979323846 * u2);
    return mean + stddev * static_cast<float>(z);
}

int Rng::categorical(const float* weights, int n) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += weights[i];
    double x = uniform() * total;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        acc += weights[i];
        if (x < acc) return i;
    }
    return n - 1;
}

Rng Rng::split(uint64_t tag) const {
    return Rng(mix64(state_ ^ mix64(tag + 0xA5A5A5A5A5A5A5A5ull)));
}

}  // namespace octofunc
