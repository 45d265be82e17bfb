// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------


#ifndef SBEM_SBEM_HPP
#define SBEM_SBEM_HPP

#include <sbem/common.hpp>
#include <sbem/fft.hpp>
#include <sbem/array_channel.hpp>
#include <sbem/beamspace.hpp>
#include <sbem/uplink.hpp>
#include <sbem/downlink.hpp>
#include <sbem/scheduling.hpp>
#include <sbem/experiment.hpp>
#include <sbem/io.hpp>

#endif  // SBEM_SBEM_HPP
