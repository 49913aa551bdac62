// vscale: reference kernel used by the bundled example datasets.

#include <cstdint>

void vscale(const int32_t *in, int32_t *out) {
  int32_t acc = 0;
  // HLSFORGE_LABEL: lp1
  for (int i = 0; i < 8192; i++) {
    acc += in[i % 64] * 4;
  }
  out[0] = acc;
}
