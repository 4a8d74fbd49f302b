#pragma once

#if defined(__SSE2__)
#include <xmmintrin.h>
#endif

namespace rinktrack::detail {

// Flushes subnormal results and operands to zero for the current thread
// while alive. Deep GELU tails produce subnormals that otherwise slow every
// later product by two orders of magnitude.
class FlushDenormals {
 public:
#if defined(__SSE2__)
  FlushDenormals() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | kFtzDaz); }
  ~FlushDenormals() { _mm_setcsr(saved_); }

 private:
  static constexpr unsigned kFtzDaz = 0x8040;
  unsigned saved_;
#else
  FlushDenormals() = default;
#endif
  FlushDenormals(const FlushDenormals&) = delete;
  FlushDenormals& operator=(const FlushDenormals&) = delete;
};

}  // namespace rinktrack::detail
