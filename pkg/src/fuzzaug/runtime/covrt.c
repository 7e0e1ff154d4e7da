/* Coverage runtime linked into instrumented targets.
 *
 * Collects the compiler-emitted inline 8-bit counters and, at process
 * exit, folds them into a fixed 65536-byte map written to the file named
 * by the COV_MAP_PATH environment variable. Compiled WITHOUT coverage
 * instrumentation so the dump itself adds no counters.
 */
#include <stdio.h>
#include <stdlib.h>
#include <stdint.h>
#include <string.h>

#define COV_MAP_SIZE 65536

static uint8_t *cov_start, *cov_stop;

void __sanitizer_cov_8bit_counters_init(uint8_t *start, uint8_t *stop) {
  cov_start = start;
  cov_stop = stop;
}

__attribute__((destructor)) static void cov_dump(void) {
  const char *path = getenv("COV_MAP_PATH");
  if (!path || !cov_start) return;
  static uint8_t map[COV_MAP_SIZE];
  memset(map, 0, sizeof(map));
  size_t n = (size_t)(cov_stop - cov_start);
  for (size_t i = 0; i < n; i++) {
    uint8_t c = cov_start[i];
    if (!c) continue;
    size_t idx = i & (COV_MAP_SIZE - 1);
    unsigned v = (unsigned)map[idx] + c;
    map[idx] = v > 255 ? 255 : (uint8_t)v;
  }
  FILE *f = fopen(path, "wb");
  if (!f) return;
  fwrite(map, 1, COV_MAP_SIZE, f);
  fclose(f);
}
