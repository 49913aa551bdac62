// jacobi1d: reference kernel used by the bundled example datasets.

#include <cstdint>

void jacobi1d(const int32_t *in, int32_t *out) {
  // HLSFORGE_LABEL: B
  int32_t B[2048];
  int32_t acc = 0;
  // HLSFORGE_LABEL: lp_t
  for (int i = 0; i < 32; i++) {
    acc += in[i % 64];
    B[i % 2048] = acc;
  }
  // HLSFORGE_LABEL: lp_i
  for (int i = 0; i < 2048; i++) {
    acc += in[i % 64];
    B[i % 2048] = acc;
  }
  out[0] = acc;
}
