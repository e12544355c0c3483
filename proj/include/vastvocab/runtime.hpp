#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace vastvocab {

// The tape allocates and frees a few MB of matrices per training step; with
// default glibc thresholds the heap gets trimmed back to the OS on every
// step and re-faulted on the next, which costs more than the matmuls.
// Raising the trim/mmap thresholds keeps the pages resident.
inline void tune_allocator() {
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 64 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 256 * 1024 * 1024);
    mallopt(M_TOP_PAD, 16 * 1024 * 1024);
#endif
}

}  // namespace vastvocab
