// gemm: reference kernel used by the bundled example datasets.

#include <cstdint>

void gemm(const int32_t *in, int32_t *out) {
  // HLSFORGE_LABEL: C
  int32_t C[4096];
  // HLSFORGE_LABEL: B
  int32_t B[4096];
  int32_t acc = 0;
  // HLSFORGE_LABEL: lp_i
  for (int i = 0; i < 64; i++) {
    acc += in[i % 64];
    C[i % 4096] = acc;
  }
  // HLSFORGE_LABEL: lp_j
  for (int i = 0; i < 1024; i++) {
    acc += in[i % 64] * 4;
    C[i % 4096] = acc;
  }
  // HLSFORGE_LABEL: lp_k
  for (int i = 0; i < 4096; i++) {
    acc += in[i % 64] * 4;
    C[i % 4096] = acc;
  }
  out[0] = acc;
}
