#pragma once

namespace oracle {

// Independent scan: evaluate the suppression model by repeated
// multiplication and take the first odd distance that meets the target.
inline int scan_distance(double A, double p_th, double p_P, double p_L) {
  double rate = A * (p_P / p_th);  // exponent 1, i.e. d = 1
  for (int d = 3; d < 10000; d += 2) {
    rate *= p_P / p_th;
    if (rate <= p_L) return d;
  }
  return -1;
}

}  // namespace oracle
