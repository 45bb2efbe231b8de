#pragma once

// Counter-based Philox4x32-10 generator (Salmon et al., SC'11). A stream is
// identified by (seed, stream_id); the draw position is a 64-bit counter, so
// streams are independent and reproducible without shared state.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace obm {

class RngStream {
public:
    using result_type = std::uint64_t;

    RngStream() = default;
    RngStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_id_(stream_id) {}

    [[nodiscard]] std::uint64_t seed() const { return seed_; }
    [[nodiscard]] std::uint64_t stream_id() const { return stream_id_; }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        if (buffered_ == 0) {
            block_ = philox(counter_++);
            buffered_ = 2;
        }
        --buffered_;
        const std::size_t i = buffered_ * 2;
        return (static_cast<std::uint64_t>(block_[i]) << 32) | block_[i + 1];
    }

    // Uniform on the open interval (0, 1).
    double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double phi = 2.0 * std::numbers::pi * uniform();
        spare_ = r * std::sin(phi);
        has_spare_ = true;
        return r * std::cos(phi);
    }

    double exponential() { return -std::log(uniform()); }

    // Independent child stream derived from the next draw of this one.
    RngStream split(std::uint64_t child_id) { return RngStream((*this)(), child_id); }

    friend bool operator==(const RngStream&, const RngStream&) = default;

private:
    std::array<std::uint32_t, 4> philox(std::uint64_t position) const {
        std::array<std::uint32_t, 4> ctr{static_cast<std::uint32_t>(position),
                                         static_cast<std::uint32_t>(position >> 32),
                                         static_cast<std::uint32_t>(stream_id_),
                                         static_cast<std::uint32_t>(stream_id_ >> 32)};
        std::uint32_t k0 = static_cast<std::uint32_t>(seed_);
        std::uint32_t k1 = static_cast<std::uint32_t>(seed_ >> 32);
        constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
        constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
            ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ k0, static_cast<std::uint32_t>(p1),
                   static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ k1, static_cast<std::uint32_t>(p0)};
            k0 += kW0;
            k1 += kW1;
        }
        return ctr;
    }

    std::uint64_t seed_{0};
    std::uint64_t stream_id_{0};
    std::uint64_t counter_{0};
    std::array<std::uint32_t, 4> block_{};
    std::size_t buffered_{0};
    double spare_{0.0};
    bool has_spare_{false};
};

} // namespace obm
