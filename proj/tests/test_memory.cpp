// Allocation accounting for the normal-equation builder. Replaces the global
// allocator, so this binary does not share the doctest main.
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <new>
#include <random>

#include "rigidflow/dense_se3.hpp"
#include "rigidflow/verify.hpp"

namespace {
std::atomic<std::size_t> g_bytes{0};
std::atomic<std::size_t> g_count{0};
}  // namespace

void* operator new(std::size_t n) {
  g_bytes += n;
  ++g_count;
  if (void* p = std::malloc(n == 0 ? 1 : n)) return p;
  throw std::bad_alloc();
}
void operator delete(void* p) noexcept { std::free(p); }
void operator delete(void* p, std::size_t) noexcept { std::free(p); }

using namespace rigidflow;

namespace {

struct Usage {
  std::size_t bytes;
  std::size_t count;
};

Usage measure(const verify::RandomProblem& p, int radius) {
  const std::size_t b0 = g_bytes.load();
  const std::size_t c0 = g_count.load();
  const auto systems = build_normal_equations(p.field, p.embeddings, p.revisions, p.depth1, p.K,
                                              Neighborhood{radius, 1}, 1);
  return {g_bytes.load() - b0, g_count.load() - c0};
}

}  // namespace

int main() {
  std::mt19937_64 rng(11);
  const auto problem = verify::random_problem(rng, 24, 32, 3);
  const Usage r2 = measure(problem, 2);
  const Usage r8 = measure(problem, 8);
  const Usage r16 = measure(problem, 16);
  std::printf("radius 2: %zu bytes in %zu allocations\n", r2.bytes, r2.count);
  std::printf("radius 8: %zu bytes in %zu allocations\n", r8.bytes, r8.count);
  std::printf("radius 16: %zu bytes in %zu allocations\n", r16.bytes, r16.count);
  // Output grid only: memory must not grow with the neighborhood.
  const std::size_t output = sizeof(NormalSystem6) * 24 * 32;
  const bool ok = r2.bytes == r8.bytes && r8.bytes == r16.bytes && r16.bytes < 2 * output + 4096;
  std::printf("%s\n", ok ? "PASS" : "FAIL");
  return ok ? 0 : 1;
}
