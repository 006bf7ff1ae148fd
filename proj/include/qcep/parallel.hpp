/* Copyright 2026 The qcep authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef QCEP_PARALLEL_HPP_
#define QCEP_PARALLEL_HPP_

#include <cstddef>
#include <functional>

namespace qcep {

// Worker cap: min(QC_THREADS, hardware concurrency), at least 1.
std::size_t worker_count();

// Runs fn(i) for i in [0, n) on up to worker_count() threads. Iterations must
// write disjoint state; the partition of indices does not depend on the
// worker count, so any per-index output is reproducible.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace qcep

#endif  // QCEP_PARALLEL_HPP_
