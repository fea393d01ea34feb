// Copyright 2026 The Coplan Authors
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

// The two-node toy supply chain bundled as data/toy.scn.

#ifndef COPLAN_TESTS_TOY_HPP_
#define COPLAN_TESTS_TOY_HPP_

#include <string>

#include "coplan/transport.hpp"

namespace coplan {

inline RetailerSpec ToyRetailer() {
  return RetailerSpec{{40, 60}, {{1, 5}, {2, 3}}, {20, 20}, 1000};
}

inline SupplierSpec ToySupplier() { return SupplierSpec{{100, 10}, {{10, 5}, {1, 2}}, {20, 20}}; }

// Absolute path of a file under data/.
inline std::string DataFile(const std::string& name) {
  return std::string(COPLAN_DATA_DIR) + "/" + name;
}

}  // namespace coplan

#endif  // COPLAN_TESTS_TOY_HPP_
