#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <functional>
#include <future>
#include <string>
#include <thread>
#include <vector>

namespace bubblab {

// Worker cap for batch loops. BRL_THREADS overrides hardware concurrency;
// values below 1 (or garbage) fall back to 1.
inline int thread_budget() {
    if (const char* env = std::getenv("BRL_THREADS")) {
        try {
            const int v = std::stoi(env);
            if (v >= 1) return v;
        } catch (...) {
        }
        return 1;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(i) for i in [0, count) on up to thread_budget() workers and hands the
// results back in index order, so floating-point reductions done by the caller
// are identical no matter how many threads actually ran.
template <typename T>
std::vector<T> run_indexed(std::size_t count, const std::function<T(std::size_t)>& fn) {
    std::vector<T> out(count);
    const int budget = std::min<int>(thread_budget(), static_cast<int>(count ? count : 1));
    if (budget <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) out[i] = fn(i);
        return out;
    }
    std::vector<std::future<void>> workers;
    std::atomic<std::size_t> next{0};
    workers.reserve(static_cast<std::size_t>(budget));
    for (int w = 0; w < budget; ++w) {
        workers.push_back(std::async(std::launch::async, [&] {
            for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) out[i] = fn(i);
        }));
    }
    for (auto& f : workers) f.get();
    return out;
}

}  // namespace bubblab
