#include "wskp/alloc_tracker.hpp"

#include <atomic>
#include <cstdlib>
#include <new>

namespace wskp::alloc_tracker {

namespace {

std::atomic<std::size_t> g_current{0};
std::atomic<std::size_t> g_peak{0};

// Header in front of each block records its size; 16 bytes keeps the
// returned pointer at the default new alignment.
constexpr std::size_t kHeader = 16;
static_assert(kHeader >= sizeof(std::size_t));
static_assert(kHeader % alignof(std::max_align_t) == 0);

void note_alloc(std::size_t n)
{
    const std::size_t now = g_current.fetch_add(n, std::memory_order_relaxed) + n;
    std::size_t peak = g_peak.load(std::memory_order_relaxed);
    while (now > peak && !g_peak.compare_exchange_weak(peak, now, std::memory_order_relaxed)) {
    }
}

void* tracked_alloc(std::size_t n) noexcept
{
    void* block = std::malloc(n + kHeader);
    if (block == nullptr) {
        return nullptr;
    }
    *static_cast<std::size_t*>(block) = n;
    note_alloc(n);
    return static_cast<char*>(block) + kHeader;
}

void tracked_free(void* p) noexcept
{
    if (p == nullptr) {
        return;
    }
    void* block = static_cast<char*>(p) - kHeader;
    g_current.fetch_sub(*static_cast<std::size_t*>(block), std::memory_order_relaxed);
    std::free(block);
}

void* tracked_alloc_or_throw(std::size_t n)
{
    if (void* p = tracked_alloc(n == 0 ? 1 : n)) {
        return p;
    }
    throw std::bad_alloc();
}

} // namespace

std::size_t current_bytes() { return g_current.load(); }
std::size_t peak_bytes() { return g_peak.load(); }
void reset_peak() { g_peak.store(g_current.load()); }

PeakScope::PeakScope() : baseline_(current_bytes()) { reset_peak(); }

std::size_t PeakScope::peak_above_baseline() const
{
    const std::size_t peak = peak_bytes();
    return peak > baseline_ ? peak - baseline_ : 0;
}

} // namespace wskp::alloc_tracker

using wskp::alloc_tracker::tracked_alloc;
using wskp::alloc_tracker::tracked_alloc_or_throw;
using wskp::alloc_tracker::tracked_free;

void* operator new(std::size_t n) { return tracked_alloc_or_throw(n); }
void* operator new[](std::size_t n) { return tracked_alloc_or_throw(n); }
void* operator new(std::size_t n, const std::nothrow_t&) noexcept { return tracked_alloc(n == 0 ? 1 : n); }
void* operator new[](std::size_t n, const std::nothrow_t&) noexcept { return tracked_alloc(n == 0 ? 1 : n); }
void operator delete(void* p) noexcept { tracked_free(p); }
void operator delete[](void* p) noexcept { tracked_free(p); }
void operator delete(void* p, std::size_t) noexcept { tracked_free(p); }
void operator delete[](void* p, std::size_t) noexcept { tracked_free(p); }
void operator delete(void* p, const std::nothrow_t&) noexcept { tracked_free(p); }
void operator delete[](void* p, const std::nothrow_t&) noexcept { tracked_free(p); }
