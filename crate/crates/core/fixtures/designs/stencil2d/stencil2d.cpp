// stencil2d: reference kernel used by the bundled example datasets.

#include <cstdint>

void stencil2d(const int32_t *in, int32_t *out) {
  // HLSFORGE_LABEL: orig
  int32_t orig[8192];
  // HLSFORGE_LABEL: filt
  int32_t filt[9];
  int32_t acc = 0;
  // HLSFORGE_LABEL: lp_r
  for (int i = 0; i < 126; i++) {
    acc += in[i % 64];
    orig[i % 8192] = acc;
  }
  // HLSFORGE_LABEL: lp_c
  for (int i = 0; i < 16002; i++) {
    acc += in[i % 64] * 5;
    orig[i % 8192] = acc;
  }
  out[0] = acc;
}
