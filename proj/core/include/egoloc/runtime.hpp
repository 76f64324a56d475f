#pragma once

namespace egoloc {

/// Keeps large tensor buffers on the heap instead of fresh mmap'd pages.
/// Training allocates and frees tens of megabytes per step; with the default
/// glibc thresholds every step pays the page faults again. Call once at
/// program start; no-op on other C libraries.
void tune_allocator();

}  // namespace egoloc
