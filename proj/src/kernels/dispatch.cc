#include <atomic>
#include <cstdlib>
#include <string_view>

#include "kernels_impl.h"

namespace rcpose::kernels {

namespace {

[[maybe_unused]] bool cpu_has_avx2() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

const KernelTable *select_default() {
    const KernelTable *wide = avx2_table();
    if (const char *env = std::getenv("RCPOSE_KERNELS")) {
        const std::string_view want(env);
        if (want == "scalar") return &scalar_table();
        if (want == "avx2" && wide != nullptr) return wide;
    }
    return wide != nullptr ? wide : &scalar_table();
}

std::atomic<const KernelTable *> g_override{nullptr};

}  // namespace

const KernelTable *avx2_table() {
#if defined(RCPOSE_HAVE_AVX2)
    static const bool supported = cpu_has_avx2();
    return supported ? detail::avx2_table_impl() : nullptr;
#else
    return nullptr;
#endif
}

const KernelTable &active() {
    if (const KernelTable *forced = g_override.load(std::memory_order_acquire)) {
        return *forced;
    }
    static const KernelTable *chosen = select_default();
    return *chosen;
}

void set_active(const KernelTable *table) { g_override.store(table, std::memory_order_release); }

}  // namespace rcpose::kernels
