// SPDX-License-Identifier: Apache-2.0
#include "reorient/rng.hpp"

#include <istream>
#include <ostream>

namespace reorient {

void Rng::serialize(std::ostream& out) const {
  out.write(reinterpret_cast<const char*>(state_), sizeof(state_));
  const char spare_flag = has_spare_ ? 1 : 0;
  out.write(&spare_flag, 1);
  out.write(reinterpret_cast<const char*>(&spare_), sizeof(spare_));
}

void Rng::deserialize(std::istream& in) {
  in.read(reinterpret_cast<char*>(state_), sizeof(state_));
  char spare_flag = 0;
  in.read(&spare_flag, 1);
  has_spare_ = spare_flag != 0;
  in.read(reinterpret_cast<char*>(&spare_), sizeof(spare_));
}

}  // namespace reorient
