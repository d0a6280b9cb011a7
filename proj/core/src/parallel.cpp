#include "pancraft/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>

#ifdef PANCRAFT_HAVE_OPENMP
#include <omp.h>
#endif
#ifdef __GLIBC__
#include <malloc.h>
#endif

namespace pancraft {
namespace {

int initial_threads() {
  if (const char* env = std::getenv("PANCRAFT_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

int g_threads = initial_threads();
bool g_deterministic = false;

void apply() {
#ifdef PANCRAFT_HAVE_OPENMP
  omp_set_num_threads(g_deterministic ? 1 : g_threads);
#endif
}

// Training reallocates the same multi-megabyte activations every step; keep
// them on the heap instead of mapping and unmapping pages each time.
void tune_allocator() {
#ifdef __GLIBC__
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

struct Init {
  Init() {
    tune_allocator();
    apply();
  }
} g_init;

}  // namespace

int thread_count() { return g_deterministic ? 1 : g_threads; }

void set_thread_count(int n) {
  g_threads = std::max(1, n);
  apply();
}

bool deterministic() { return g_deterministic; }

void set_deterministic(bool on) {
  g_deterministic = on;
  apply();
}

}  // namespace pancraft
