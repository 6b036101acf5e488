#pragma once

#include <string>

namespace locreg::detail {

// Symmetric eigensolvers from the system LAPACK, resolved at first use.
// Column-major, lower triangle. Return the LAPACK info value.
int dsyevd(bool vectors, int n, double* a, int lda, double* w);
int dsyevr_smallest(bool vectors, int n, double* a, int lda, int k, int* found, double* w, double* z, int ldz);

// Name of the shared object that provided the routines.
std::string lapack_provider();

}  // namespace locreg::detail
