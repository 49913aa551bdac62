// bicg: reference kernel used by the bundled example datasets.

#include <cstdint>

void bicg(const int32_t *in, int32_t *out) {
  // HLSFORGE_LABEL: A
  int32_t A[2048];
  int32_t acc = 0;
  // HLSFORGE_LABEL: lp1
  for (int i = 0; i < 512; i++) {
    acc += in[i % 64] * 4;
    A[i % 2048] = acc;
  }
  // HLSFORGE_LABEL: lp2
  for (int i = 0; i < 512; i++) {
    acc += in[i % 64] * 4;
    A[i % 2048] = acc;
  }
  out[0] = acc;
}
