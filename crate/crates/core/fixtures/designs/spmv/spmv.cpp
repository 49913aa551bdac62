// spmv: reference kernel used by the bundled example datasets.

#include <cstdint>

void spmv(const int32_t *in, int32_t *out) {
  // HLSFORGE_LABEL: val
  int64_t val[1666];
  // HLSFORGE_LABEL: cols
  int32_t cols[1666];
  int32_t acc = 0;
  // HLSFORGE_LABEL: lp_row
  for (int i = 0; i < 494; i++) {
    acc += in[i % 64];
    val[i % 1666] = acc;
  }
  // HLSFORGE_LABEL: lp_nz
  for (int i = 0; i < 1666; i++) {
    acc += in[i % 64] * 4;
    val[i % 1666] = acc;
  }
  out[0] = acc;
}
