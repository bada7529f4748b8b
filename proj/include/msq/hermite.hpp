// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace msq {

/// Value and first two derivatives (in global units) of a 1-d shape.
struct Shape1D {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

/// Cubic Hermite shapes on an element of width h at local t in [0, 1].
/// code = 2*corner + type: corner 0/1 = left/right node, type 0/1 = value/slope.
inline Shape1D hermite_shape(int code, double t, double h) {
  const double t2 = t * t;
  const double t3 = t2 * t;
  switch (code) {
    case 0:
      return {2 * t3 - 3 * t2 + 1, (6 * t2 - 6 * t) / h, (12 * t - 6) / (h * h)};
    case 1:
      return {h * (t3 - 2 * t2 + t), 3 * t2 - 4 * t + 1, (6 * t - 4) / h};
    case 2:
      return {3 * t2 - 2 * t3, (6 * t - 6 * t2) / h, (6 - 12 * t) / (h * h)};
    default:
      return {h * (t3 - t2), 3 * t2 - 2 * t, (6 * t - 2) / h};
  }
}

/// Reference value basis on [-1, 1]: phi(0)=1, phi(+-1)=0, phi'(0)=0.
inline Shape1D hermite_phi(double s) {
  if (s <= -1.0 || s >= 1.0) return {};
  return s < 0.0 ? hermite_shape(2, s + 1.0, 1.0) : hermite_shape(0, s, 1.0);
}

/// Reference slope basis on [-1, 1]: psi(0)=0, psi'(0)=1.
inline Shape1D hermite_psi(double s) {
  if (s <= -1.0 || s >= 1.0) return {};
  return s < 0.0 ? hermite_shape(3, s + 1.0, 1.0) : hermite_shape(1, s, 1.0);
}

}  // namespace msq
