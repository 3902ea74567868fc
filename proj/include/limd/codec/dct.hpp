#pragma once

namespace limd {

// Separable orthonormal 2D DCT-II over w x h blocks (legal dims 4..64).
// Row-major input/output; double precision so encoder and decoder
// reconstruct bit-identically from the same quantized levels.
void dct2_forward(const double* block, int w, int h, double* coeff);
void dct2_inverse(const double* coeff, int w, int h, double* block);

}  // namespace limd
