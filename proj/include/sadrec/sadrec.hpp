// Copyright 2026 The sadrec Authors.
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

// Umbrella header.

#ifndef SADREC_SADREC_HPP_
#define SADREC_SADREC_HPP_

#include "sadrec/checkpoint.hpp"
#include "sadrec/dataset.hpp"
#include "sadrec/error.hpp"
#include "sadrec/evaluation.hpp"
#include "sadrec/gibbs.hpp"
#include "sadrec/model.hpp"
#include "sadrec/random.hpp"
#include "sadrec/sgd.hpp"
#include "sadrec/simulation.hpp"

#endif  // SADREC_SADREC_HPP_
