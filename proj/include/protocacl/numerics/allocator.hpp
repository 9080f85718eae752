#pragma once

namespace protocacl::num {

// Every episode allocates and frees the same multi-megabyte buffers. Keeps
// them in the heap instead of returning them to the kernel after each
// episode. No-op outside glibc.
void retain_freed_memory();

}  // namespace protocacl::num
