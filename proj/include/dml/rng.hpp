/* Copyright 2026 the dm-testlab authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef DML_RNG_HPP
#define DML_RNG_HPP

// Counter-based pseudo-random generator (Philox4x32-10).  Each logical
// stream is addressed by a 64-bit stream id placed in the low counter
// words, with a 64-bit block counter in the high words and the 64-bit
// master seed as the key.  Draws are therefore a pure function of
// (seed, stream, position): replications can be assigned to threads in
// any order without changing a single bit of the output.

#include <array>
#include <cstdint>

namespace dml {

namespace detail::rng {

inline constexpr std::uint32_t kMul0 = 0xD2511F53u;
inline constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
inline constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void round_once(std::array<std::uint32_t, 4>& ctr,
                       const std::array<std::uint32_t, 2>& key) {
    const std::uint64_t prod0 =
        static_cast<std::uint64_t>(kMul0) * ctr[0];
    const std::uint64_t prod1 =
        static_cast<std::uint64_t>(kMul1) * ctr[2];
    const std::uint32_t hi0 = static_cast<std::uint32_t>(prod0 >> 32);
    const std::uint32_t lo0 = static_cast<std::uint32_t>(prod0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(prod1 >> 32);
    const std::uint32_t lo1 = static_cast<std::uint32_t>(prod1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
}

}  // namespace detail::rng

/// One 10-round Philox4x32 block: 128 counter bits, 64 key bits, 128
/// output bits.  Exposed so known-answer vectors can be checked directly.
inline std::array<std::uint32_t, 4> philox4x32(
    std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key) {
    for (int r = 0; r < 10; ++r) {
        detail::rng::round_once(counter, key);
        key[0] += detail::rng::kWeyl0;
        key[1] += detail::rng::kWeyl1;
    }
    return counter;
}

/// Stateful view over one stream of the counter-based generator.  Copying
/// is cheap and copies the position.
class Philox {
public:
    Philox(std::uint64_t seed, std::uint64_t stream) noexcept
        : key_{static_cast<std::uint32_t>(seed),
               static_cast<std::uint32_t>(seed >> 32)},
          stream_(stream) {}

    [[nodiscard]] std::uint64_t seed_lo_hi() const noexcept {
        return static_cast<std::uint64_t>(key_[0]) |
               (static_cast<std::uint64_t>(key_[1]) << 32);
    }
    [[nodiscard]] std::uint64_t stream() const noexcept { return stream_; }

    /// Next raw 64-bit word of the stream.
    std::uint64_t next_u64() {
        if (!buffered_) {
            const std::array<std::uint32_t, 4> ctr{
                static_cast<std::uint32_t>(stream_),
                static_cast<std::uint32_t>(stream_ >> 32),
                static_cast<std::uint32_t>(block_),
                static_cast<std::uint32_t>(block_ >> 32)};
            const auto out = philox4x32(ctr, key_);
            ++block_;
            const std::uint64_t first =
                static_cast<std::uint64_t>(out[0]) |
                (static_cast<std::uint64_t>(out[1]) << 32);
            spare_ = static_cast<std::uint64_t>(out[2]) |
                     (static_cast<std::uint64_t>(out[3]) << 32);
            buffered_ = true;
            return first;
        }
        buffered_ = false;
        return spare_;
    }

    /// Uniform draw strictly inside (0, 1): 53 significant bits centered
    /// on the representable grid, so neither endpoint can be returned.
    double uniform() {
        const std::uint64_t x = next_u64();
        return (static_cast<double>(x >> 11) + 0.5) * 0x1p-53;
    }

private:
    std::array<std::uint32_t, 2> key_;
    std::uint64_t stream_ = 0;
    std::uint64_t block_ = 0;
    std::uint64_t spare_ = 0;
    bool buffered_ = false;
};

/// Stream id reserved for covariate generation; replication streams use
/// their replication index and must stay clear of this value.
inline constexpr std::uint64_t kCovariateStream = ~std::uint64_t{0};

}  // namespace dml

#endif  // DML_RNG_HPP
