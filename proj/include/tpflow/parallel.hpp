// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

namespace tpflow {

/// Runs body(i) for i in [0, n) on up to hardware_concurrency threads.
/// Bodies must write only to their own slot; results are then independent of
/// the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

/// Stateless seed derivation (splitmix64 finalizer over the mixed inputs).
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b = 0);

}  // namespace tpflow
