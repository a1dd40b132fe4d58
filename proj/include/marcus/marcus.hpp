/*
   Copyright 2026 The marcus-averaging Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include "marcus/averaging.hpp"
#include "marcus/config.hpp"
#include "marcus/csv.hpp"
#include "marcus/cylinder.hpp"
#include "marcus/experiments.hpp"
#include "marcus/geometry.hpp"
#include "marcus/levy_driver.hpp"
#include "marcus/marcus_engine.hpp"
#include "marcus/numerics.hpp"
#include "marcus/parallel.hpp"
#include "marcus/rng.hpp"
