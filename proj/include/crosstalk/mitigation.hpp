#pragma once

#include <cstdint>
#include <stdexcept>

namespace crosstalk::detect {

// Control-plane hardening transforms applied by the router.
//
// RandomDelay adds uniform(0, max_delay_us) to every control-plane response.
// TimeSlice statically alternates service between the two segments in slices
// of slice_us; a request starts only inside its own segment's slice and its
// service must fit the slice.
struct MitigationConfig {
    enum class Mode { None, RandomDelay, TimeSlice };

    Mode mode = Mode::None;
    std::uint64_t max_delay_us = 0;  // RandomDelay
    std::uint64_t slice_us = 0;      // TimeSlice

    static MitigationConfig none() { return {}; }
    static MitigationConfig random_delay(std::uint64_t max_us) {
        if (max_us == 0) throw std::invalid_argument("random_delay: max_us must be positive");
        return {Mode::RandomDelay, max_us, 0};
    }
    static MitigationConfig time_slice(std::uint64_t slice_us) {
        if (slice_us == 0) throw std::invalid_argument("time_slice: slice_us must be positive");
        return {Mode::TimeSlice, 0, slice_us};
    }
};

}  // namespace crosstalk::detect
