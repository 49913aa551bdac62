// fir: reference kernel used by the bundled example datasets.

#include <cstdint>

void fir(const int32_t *in, int32_t *out) {
  // HLSFORGE_LABEL: taps
  int16_t taps[128];
  int32_t acc = 0;
  // HLSFORGE_LABEL: lp_shift
  for (int i = 0; i < 128; i++) {
    acc += in[i % 64];
    taps[i % 128] = acc;
  }
  // HLSFORGE_LABEL: lp_mac
  for (int i = 0; i < 128; i++) {
    acc += in[i % 64] * 4;
    taps[i % 128] = acc;
  }
  out[0] = acc;
}
