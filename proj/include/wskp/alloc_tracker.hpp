#pragma once

#include <cstddef>

namespace wskp::alloc_tracker {

// Process-wide accounting of bytes obtained through the replaceable global
// operator new. Linking this module installs the counting allocator.

std::size_t current_bytes();
std::size_t peak_bytes();

// Restarts peak tracking from the current live total.
void reset_peak();

// Measures the peak live allocation above the level at construction.
class PeakScope {
public:
    PeakScope();
    std::size_t peak_above_baseline() const;

private:
    std::size_t baseline_;
};

} // namespace wskp::alloc_tracker
