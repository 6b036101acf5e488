#include "lapack_runtime.hpp"

#include "locreg/error.hpp"

#include <dlfcn.h>

#include <cstdlib>
#include <mutex>
#include <vector>

namespace locreg::detail {

namespace {

using syevd_fn = void (*)(const char*, const char*, const int*, double*, const int*, double*, double*, const int*,
                          int*, const int*, int*, std::size_t, std::size_t);
using syevr_fn = void (*)(const char*, const char*, const char*, const int*, double*, const int*, const double*,
                          const double*, const int*, const int*, const double*, int*, double*, double*, const int*,
                          int*, double*, const int*, int*, const int*, int*, std::size_t, std::size_t, std::size_t);
using lamch_fn = double (*)(const char*, std::size_t);

struct Routines {
    syevd_fn syevd = nullptr;
    syevr_fn syevr = nullptr;
    lamch_fn lamch = nullptr;
    std::string provider;
};

// OpenBLAS 0.3.20 picks its Cooperlake kernels on recent AVX-512 parts and
// those return non-orthogonal eigenvectors. The SkylakeX kernels are fine.
// The core type is read once when OpenBLAS loads, hence the late binding.
void pin_openblas_core()
{
    if (std::getenv("OPENBLAS_CORETYPE") != nullptr)
        return;
    __builtin_cpu_init();
    if (__builtin_cpu_supports("avx512f"))
        setenv("OPENBLAS_CORETYPE", "SkylakeX", 0);
}

const Routines& routines()
{
    static Routines r;
    static std::once_flag once;
    std::call_once(once, [] {
        pin_openblas_core();
        for (const char* name : {"libopenblas.so.0", "liblapack.so.3", "libopenblas.so", "liblapack.so"}) {
            void* h = dlopen(name, RTLD_NOW | RTLD_LOCAL);
            if (!h)
                continue;
            auto syevd = reinterpret_cast<syevd_fn>(dlsym(h, "dsyevd_"));
            auto syevr = reinterpret_cast<syevr_fn>(dlsym(h, "dsyevr_"));
            auto lamch = reinterpret_cast<lamch_fn>(dlsym(h, "dlamch_"));
            if (syevd && syevr && lamch) {
                r = {syevd, syevr, lamch, name};
                return;
            }
            dlclose(h);
        }
    });
    if (!r.syevd)
        throw Error(ErrorCode::io_error, "no LAPACK library with dsyevd/dsyevr could be loaded");
    return r;
}

}  // namespace

int dsyevd(bool vectors, int n, double* a, int lda, double* w)
{
    const Routines& lp = routines();
    const char jobz = vectors ? 'V' : 'N', uplo = 'L';
    int info = 0, lwork = -1, liwork = -1, iwork_query = 0;
    double work_query = 0.0;
    lp.syevd(&jobz, &uplo, &n, a, &lda, w, &work_query, &lwork, &iwork_query, &liwork, &info, 1, 1);
    if (info != 0)
        return info;
    lwork = static_cast<int>(work_query);
    liwork = iwork_query;
    std::vector<double> work(static_cast<std::size_t>(lwork));
    std::vector<int> iwork(static_cast<std::size_t>(liwork));
    lp.syevd(&jobz, &uplo, &n, a, &lda, w, work.data(), &lwork, iwork.data(), &liwork, &info, 1, 1);
    return info;
}

int dsyevr_smallest(bool vectors, int n, double* a, int lda, int k, int* found, double* w, double* z, int ldz)
{
    const Routines& lp = routines();
    const char jobz = vectors ? 'V' : 'N', range = 'I', uplo = 'L', safe = 'S';
    const double vl = 0.0, vu = 0.0, abstol = lp.lamch(&safe, 1);
    const int il = 1;
    std::vector<int> support(2 * static_cast<std::size_t>(n));
    int info = 0, lwork = -1, liwork = -1, iwork_query = 0;
    double work_query = 0.0;
    lp.syevr(&jobz, &range, &uplo, &n, a, &lda, &vl, &vu, &il, &k, &abstol, found, w, z, &ldz, support.data(),
             &work_query, &lwork, &iwork_query, &liwork, &info, 1, 1, 1);
    if (info != 0)
        return info;
    lwork = static_cast<int>(work_query);
    liwork = iwork_query;
    std::vector<double> work(static_cast<std::size_t>(lwork));
    std::vector<int> iwork(static_cast<std::size_t>(liwork));
    lp.syevr(&jobz, &range, &uplo, &n, a, &lda, &vl, &vu, &il, &k, &abstol, found, w, z, &ldz, support.data(),
             work.data(), &lwork, iwork.data(), &liwork, &info, 1, 1, 1);
    return info;
}

std::string lapack_provider()
{
    return routines().provider;
}

}  // namespace locreg::detail
