#include "gridsense/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <mutex>

namespace gridsense {
namespace {

// FFTW planning is not thread-safe; execution on fresh aligned buffers is.
struct PlanCache {
    std::mutex mutex;
    std::map<int, fftw_plan> plans;

    ~PlanCache() {
        for (auto& [n, p] : plans) fftw_destroy_plan(p);
    }

    fftw_plan get(int n) {
        std::lock_guard lock(mutex);
        auto it = plans.find(n);
        if (it != plans.end()) return it->second;
        auto* in = fftw_alloc_real(static_cast<std::size_t>(n));
        auto* out = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
        fftw_plan p = fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE);
        fftw_free(in);
        fftw_free(out);
        plans.emplace(n, p);
        return p;
    }
};

PlanCache& cache() {
    static PlanCache c;
    return c;
}

}  // namespace

std::vector<std::complex<double>> real_dft(std::span<const double> x) {
    const int n = static_cast<int>(x.size());
    if (n == 0) return {};
    fftw_plan plan = cache().get(n);
    auto* in = fftw_alloc_real(static_cast<std::size_t>(n));
    auto* out = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    std::copy(x.begin(), x.end(), in);
    fftw_execute_dft_r2c(plan, in, out);
    std::vector<std::complex<double>> result(static_cast<std::size_t>(n / 2 + 1));
    for (std::size_t k = 0; k < result.size(); ++k) result[k] = {out[k][0], out[k][1]};
    fftw_free(in);
    fftw_free(out);
    return result;
}

}  // namespace gridsense
