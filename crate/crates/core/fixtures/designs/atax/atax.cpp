// atax: reference kernel used by the bundled example datasets.

#include <cstdint>

void atax(const int32_t *in, int32_t *out) {
  // HLSFORGE_LABEL: A
  int32_t A[4096];
  int32_t acc = 0;
  // HLSFORGE_LABEL: lp1
  for (int i = 0; i < 256; i++) {
    acc += in[i % 64] * 4;
    A[i % 4096] = acc;
  }
  // HLSFORGE_LABEL: lp2
  for (int i = 0; i < 256; i++) {
    acc += in[i % 64] * 4;
    A[i % 4096] = acc;
  }
  out[0] = acc;
}
