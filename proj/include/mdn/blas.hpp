#pragma once

#include <cblas.h>

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <mutex>
#include <string>
#include <unistd.h>

namespace mdn {

namespace detail {

inline void ensure_single_threaded_blas() {
    // GEMM reductions must run in a fixed order for reproducible training;
    // parallelism happens one level up, across batch images.
    static std::once_flag flag;
    std::call_once(flag, [] { openblas_set_num_threads(1); });
}

}  // namespace detail

/// Row-major C = alpha * op(A) * op(B) + beta * C.
inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
                 const float* a, int lda, const float* b, int ldb, float beta,
                 float* c, int ldc) {
    detail::ensure_single_threaded_blas();
    cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b,
                ldb, beta, c, ldc);
}

inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
                 const double* a, int lda, const double* b, int ldb, double beta,
                 double* c, int ldc) {
    detail::ensure_single_threaded_blas();
    cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b,
                ldb, beta, c, ldc);
}

/// On virtualized CPUs OpenBLAS can fail to recognize the core and fall back
/// to its slowest generic kernels even though AVX2/AVX-512 are available. The
/// core type is chosen in a load-time constructor, so the only reliable fix is
/// to set OPENBLAS_CORETYPE in the environment and re-exec once. Call this at
/// the top of main(); it is a no-op when detection worked or the user already
/// pinned a core type.
inline void fix_blas_core_detection(char** argv) {
    if (std::getenv("OPENBLAS_CORETYPE") != nullptr) return;
    std::string core = openblas_get_corename();
    if (core != "Prescott" && core != "generic" && core != "NORTHWOOD" &&
        core != "Katmai") {
        return;
    }
    std::ifstream cpuinfo("/proc/cpuinfo");
    std::string line;
    std::string flags;
    while (std::getline(cpuinfo, line)) {
        if (line.rfind("flags", 0) == 0) {
            flags = line;
            break;
        }
    }
    auto has = [&flags](const char* f) {
        return flags.find(std::string(" ") + f) != std::string::npos;
    };
    const char* target = nullptr;
    if (has("avx512f") && has("avx512vl") && has("avx512dq") && has("avx512bw"))
        target = "SKYLAKEX";
    else if (has("avx2") && has("fma"))
        target = "HASWELL";
    if (target == nullptr) return;
    ::setenv("OPENBLAS_CORETYPE", target, 1);
    ::execv("/proc/self/exe", argv);
    // execv only returns on failure; keep running with the slow kernels.
}

}  // namespace mdn
