// mvt: reference kernel used by the bundled example datasets.

#include <cstdint>

void mvt(const int32_t *in, int32_t *out) {
  // HLSFORGE_LABEL: x1
  int32_t x1[256];
  int32_t acc = 0;
  // HLSFORGE_LABEL: lp1
  for (int i = 0; i < 1024; i++) {
    acc += in[i % 64] * 4;
    x1[i % 256] = acc;
  }
  // HLSFORGE_LABEL: lp2
  for (int i = 0; i < 1024; i++) {
    acc += in[i % 64] * 4;
    x1[i % 256] = acc;
  }
  out[0] = acc;
}
