// k2mm: reference kernel used by the bundled example datasets.

#include <cstdint>

void k2mm(const int32_t *in, int32_t *out) {
  // HLSFORGE_LABEL: tmp
  int32_t tmp[1024];
  int32_t acc = 0;
  // HLSFORGE_LABEL: lp1
  for (int i = 0; i < 64; i++) {
    acc += in[i % 64] * 4;
    tmp[i % 1024] = acc;
  }
  // HLSFORGE_LABEL: lp2
  for (int i = 0; i < 64; i++) {
    acc += in[i % 64] * 4;
    tmp[i % 1024] = acc;
  }
  // HLSFORGE_LABEL: lp3
  for (int i = 0; i < 64; i++) {
    acc += in[i % 64] * 4;
    tmp[i % 1024] = acc;
  }
  out[0] = acc;
}
