#pragma once

#include <json.hpp>

#include "tricir/spice/types.hpp"

namespace tricir::spice {

// JSON form with top-level fields: title, devices, nets, models, subckts.
nlohmann::json to_json(const NetlistIR& ir);

}  // namespace tricir::spice
