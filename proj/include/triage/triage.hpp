// Copyright 2026 The Triage Loop Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

// Umbrella header.

#ifndef TRIAGE_TRIAGE_HPP_
#define TRIAGE_TRIAGE_HPP_

#include "triage/agents.hpp"
#include "triage/backend.hpp"
#include "triage/commands.hpp"
#include "triage/config.hpp"
#include "triage/core.hpp"
#include "triage/dataset.hpp"
#include "triage/error.hpp"
#include "triage/http_backend.hpp"
#include "triage/metrics.hpp"
#include "triage/prompts.hpp"
#include "triage/ranking.hpp"
#include "triage/session.hpp"
#include "triage/text.hpp"

#endif  // TRIAGE_TRIAGE_HPP_
