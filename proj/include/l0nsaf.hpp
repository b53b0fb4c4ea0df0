/*
 * Copyright 2026 The l0nsaf Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Convenience header pulling in the whole library except the CLI layer.

#ifndef L0NSAF_L0NSAF_HPP_
#define L0NSAF_L0NSAF_HPP_

#include "l0nsaf/config.hpp"
#include "l0nsaf/engine.hpp"
#include "l0nsaf/error.hpp"
#include "l0nsaf/filterbank.hpp"
#include "l0nsaf/harness.hpp"
#include "l0nsaf/signals.hpp"
#include "l0nsaf/sparsity.hpp"

#endif  // L0NSAF_L0NSAF_HPP_
