// gesummv: reference kernel used by the bundled example datasets.

#include <cstdint>

void gesummv(const int32_t *in, int32_t *out) {
  // HLSFORGE_LABEL: A
  int32_t A[1024];
  // HLSFORGE_LABEL: B
  int32_t B[1024];
  int32_t acc = 0;
  // HLSFORGE_LABEL: lp1
  for (int i = 0; i < 1024; i++) {
    acc += in[i % 64] * 5;
    A[i % 1024] = acc;
  }
  // HLSFORGE_LABEL: lp2
  for (int i = 0; i < 128; i++) {
    acc += in[i % 64];
    A[i % 1024] = acc;
  }
  out[0] = acc;
}
