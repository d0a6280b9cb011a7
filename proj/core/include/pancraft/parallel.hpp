#pragma once

namespace pancraft {

/// Kernel thread count. Defaults to PANCRAFT_THREADS when set, else the
/// hardware concurrency.
int thread_count();
void set_thread_count(int n);

/// Deterministic mode runs every kernel sequentially.
bool deterministic();
void set_deterministic(bool on);

}  // namespace pancraft
