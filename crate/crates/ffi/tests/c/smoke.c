#include <math.h>
#include <stdio.h>
#include "degenlab.h"

int main(void) {
  double centers[1] = {0.0};
  dl_profile *p = NULL;
  if (dl_profile_power_1d(0.5, centers, 1, -4.0, 4.0, &p) != DL_STATUS_OK) return 1;
  dl_verdict v;
  if (dl_profile_classify(p, &v) != DL_STATUS_OK || v != DL_VERDICT_SEPARATING) return 2;
  dl_operator *a = NULL;
  if (dl_operator_assemble(p, 64, 0.0, &a) != DL_STATUS_OK) return 3;
  size_t n = 0;
  dl_operator_size(a, &n);
  double phi[65], out[65], mass = 0.0;
  for (size_t i = 0; i < n; i++) phi[i] = (double)(i % 7);
  if (dl_heat_evolve(a, phi, 0.3, out, n) != DL_STATUS_OK) return 4;
  for (size_t i = 0; i < n; i++) mass += out[i] - phi[i];
  if (fabs(mass) > 1e-9) return 5;
  if (dl_operator_assemble(p, 2, 0.0, &a) != DL_STATUS_ARGUMENT || dl_last_error() == NULL) return 6;
  dl_operator_free(a);
  dl_profile_free(p);
  printf("ok %s\n", dl_version());
  return 0;
}
