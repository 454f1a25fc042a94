#pragma once

#include <cstddef>

namespace glms::kern {

// Data-parallel inner loops behind the dense substrate.  A scalar reference
// implementation always exists; on x86-64 an AVX2/FMA variant is selected at
// runtime when the CPU supports it.  The two are equivalence-tested.
enum class Backend { scalar, avx2 };

Backend active();
const char* name(Backend b);
bool supported(Backend b);
// Force a backend (tests, or GLMS_KERNELS=scalar|avx2 in the environment).
void force(Backend b);

// y[i] = <A.row(i), x>, A row-major m x n
void matvec(const double* a, std::size_t m, std::size_t n, const double* x,
            double* y);

double dot(const double* a, const double* b, std::size_t n);
double sumsq(const double* a, std::size_t n);

// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);

// Upper triangle of M += w * a a^T, M row-major n x n.  Callers mirror once
// at the end of an accumulation pass.
void rank1_upper(double* m_mat, const double* a, double w, std::size_t n);

void sym_mirror_lower(double* m_mat, std::size_t n);

}  // namespace glms::kern
