#pragma once

#include "irs/classifier.hpp"

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace irs {

/// 0 means one worker per logical core.
inline std::size_t resolve_workers(std::size_t requested) {
    if (requested != 0) return requested;
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Calls fn(index, worker) for every index in [0, count) on up to `workers`
/// threads. Indices are claimed in increasing order; each worker id is used by
/// exactly one thread. The first exception escaping fn stops further claims
/// and is rethrown after all threads join.
template <class Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
    workers = std::min(resolve_workers(workers), std::max<std::size_t>(count, 1));
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&](std::size_t worker) {
        for (;;) {
            if (stop.load()) return;
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i, worker);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                stop.store(true);
            }
        }
    };
    if (workers <= 1) {
        body(0);
    } else {
        std::vector<std::jthread> threads;
        threads.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(body, w);
    }
    if (error) std::rethrow_exception(error);
}

using ClassifierFactory = std::function<ClassifierPtr()>;

/// One lazily created classifier per worker; slot w is only touched by worker w.
class ClassifierPool {
public:
    ClassifierPool(ClassifierFactory factory, std::size_t workers)
        : factory_(std::move(factory)), slots_(resolve_workers(workers)) {}

    const Classifier& get(std::size_t worker) {
        auto& slot = slots_.at(worker);
        if (!slot) slot = factory_();
        return *slot;
    }

private:
    ClassifierFactory factory_;
    std::vector<ClassifierPtr> slots_;
};

}  // namespace irs
