/*
 Copyright 2026 The shmpc Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#ifndef SHMPC_SHMPC_HPP
#define SHMPC_SHMPC_HPP

#include "shmpc/adaptation.hpp"
#include "shmpc/box.hpp"
#include "shmpc/common.hpp"
#include "shmpc/condensing.hpp"
#include "shmpc/dynamics.hpp"
#include "shmpc/pgm_solver.hpp"
#include "shmpc/sim_harness.hpp"
#include "shmpc/spectral_analysis.hpp"

#endif // SHMPC_SHMPC_HPP
