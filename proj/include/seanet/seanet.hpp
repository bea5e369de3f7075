// Copyright 2026 The seanet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Umbrella header.

#ifndef SEANET_SEANET_HPP_
#define SEANET_SEANET_HPP_

#include "seanet/analysis.hpp"
#include "seanet/binary_io.hpp"
#include "seanet/common.hpp"
#include "seanet/comms.hpp"
#include "seanet/csv.hpp"
#include "seanet/data_io.hpp"
#include "seanet/experiment.hpp"
#include "seanet/gated_net.hpp"
#include "seanet/grad_core.hpp"
#include "seanet/symbolic.hpp"
#include "seanet/trainer.hpp"

#endif  // SEANET_SEANET_HPP_
