#include <atomic>
#include <cstdlib>
#include <string>

#include "qlp/kernels.hpp"

namespace qlp::kernels {
namespace {

const KernelTable* best_table() {
    if (const char* env = std::getenv("QLP_SIMD"); env != nullptr && std::string(env) == "scalar")
        return &scalar_table();
    if (const auto* t = avx2_table()) return t;
    if (const auto* t = neon_table()) return t;
    return &scalar_table();
}

std::atomic<const KernelTable*>& slot() {
    static std::atomic<const KernelTable*> current{best_table()};
    return current;
}

}  // namespace

const KernelTable& active() { return *slot().load(std::memory_order_relaxed); }

void force(Isa isa) {
    const KernelTable* t = &scalar_table();
    if (isa == Isa::Avx2 && avx2_table() != nullptr) t = avx2_table();
    if (isa == Isa::Neon && neon_table() != nullptr) t = neon_table();
    slot().store(t, std::memory_order_relaxed);
}

std::string_view name(Isa isa) {
    switch (isa) {
        case Isa::Scalar: return "scalar";
        case Isa::Avx2: return "avx2";
        case Isa::Neon: return "neon";
    }
    return "unknown";
}

}  // namespace qlp::kernels
