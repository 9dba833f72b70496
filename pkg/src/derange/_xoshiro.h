/* xoshiro256+ and exact bounded draws, shared by the Cython kernels.
 * Must stay bit-identical to derange/rng.py. */
#ifndef DERANGE_XOSHIRO_H
#define DERANGE_XOSHIRO_H

#include <stdint.h>

static inline uint64_t xo_rotl(const uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

static inline uint64_t xo_next(uint64_t *s) {
    const uint64_t result = s[0] + s[3];
    const uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = xo_rotl(s[3], 45);
    return result;
}

/* uniform on 0..n-1, n >= 1; Lemire's method on the high bits */
static inline uint64_t xo_below(uint64_t *s, uint64_t n) {
    unsigned __int128 m = (unsigned __int128)xo_next(s) * n;
    uint64_t low = (uint64_t)m;
    if (low < n) {
        const uint64_t threshold = (0 - n) % n;
        while (low < threshold) {
            m = (unsigned __int128)xo_next(s) * n;
            low = (uint64_t)m;
        }
    }
    return (uint64_t)(m >> 64);
}

static inline double xo_unit_open(uint64_t *s) {
    uint64_t x;
    do {
        x = xo_next(s) >> 11;
    } while (x == 0);
    return (double)x * 0x1.0p-53;
}

#endif
