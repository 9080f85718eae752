#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "protocacl/numerics/allocator.hpp"

int main(int argc, char** argv) {
  protocacl::num::retain_freed_memory();
  doctest::Context context(argc, argv);
  return context.run();
}
