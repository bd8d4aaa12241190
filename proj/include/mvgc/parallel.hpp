/*
 * Copyright (c) 2026, The mvgc Authors. All rights reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <functional>

namespace mvgc {

// Worker count for internal loops: hardware concurrency, capped by the
// MVGC_THREADS environment variable when set to a positive integer.
int thread_count();

// Runs body(row) for row in [0, rows). Rows are split into contiguous blocks,
// one per worker; body must only write state owned by its row.
void parallel_rows(int rows, const std::function<void(int)>& body);

}  // namespace mvgc
