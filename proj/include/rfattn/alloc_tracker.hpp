#pragma once

#include <malloc.h>

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <new>

namespace rfattn {

/// Process-wide high-water allocation counter. The counting operator
/// new/delete pair is defined by RFATTN_DEFINE_ALLOC_TRACKING in exactly one
/// translation unit of a binary; without it the counter just stays at zero.
struct AllocStats {
  std::atomic<std::uint64_t> current{0};
  std::atomic<std::uint64_t> peak{0};

  void on_alloc(std::size_t bytes) {
    const std::uint64_t now = current.fetch_add(bytes, std::memory_order_relaxed) + bytes;
    std::uint64_t prev = peak.load(std::memory_order_relaxed);
    while (prev < now &&
           !peak.compare_exchange_weak(prev, now, std::memory_order_relaxed)) {
    }
  }

  void on_free(std::size_t bytes) {
    current.fetch_sub(bytes, std::memory_order_relaxed);
  }

  void reset_peak() { peak.store(current.load()); }
};

inline AllocStats& alloc_stats() {
  static AllocStats stats;
  return stats;
}

}  // namespace rfattn

// Counting replacements for the global allocation functions. glibc's
// malloc_usable_size supplies the size on the deallocation side.
#define RFATTN_DEFINE_ALLOC_TRACKING                                              \
  void* operator new(std::size_t size) {                                          \
    void* p = std::malloc(size ? size : 1);                                       \
    if (!p) throw std::bad_alloc();                                               \
    ::rfattn::alloc_stats().on_alloc(malloc_usable_size(p));                      \
    return p;                                                                     \
  }                                                                               \
  void* operator new[](std::size_t size) { return ::operator new(size); }         \
  void* operator new(std::size_t size, const std::nothrow_t&) noexcept {          \
    void* p = std::malloc(size ? size : 1);                                       \
    if (p) ::rfattn::alloc_stats().on_alloc(malloc_usable_size(p));               \
    return p;                                                                     \
  }                                                                               \
  void* operator new[](std::size_t size, const std::nothrow_t&) noexcept {        \
    return ::operator new(size, std::nothrow);                                    \
  }                                                                               \
  void operator delete(void* p) noexcept {                                        \
    if (!p) return;                                                               \
    ::rfattn::alloc_stats().on_free(malloc_usable_size(p));                       \
    std::free(p);                                                                 \
  }                                                                               \
  void operator delete[](void* p) noexcept { ::operator delete(p); }              \
  void operator delete(void* p, std::size_t) noexcept { ::operator delete(p); }   \
  void operator delete[](void* p, std::size_t) noexcept { ::operator delete(p); } \
  void operator delete(void* p, const std::nothrow_t&) noexcept {                 \
    ::operator delete(p);                                                         \
  }                                                                               \
  void operator delete[](void* p, const std::nothrow_t&) noexcept {               \
    ::operator delete(p);                                                         \
  }
