#pragma once

#include <string>

#include "thermhe/lstm.hpp"

namespace thermhe {

// JSON weight files hold every matrix as nested row-major arrays together
// with the feature normalization constants. Loading validates dimensions,
// the expected feature order and finiteness before returning.
LstmParams<double> load_weights(const std::string& path);
void save_weights(const std::string& path, const LstmParams<double>& params);

}  // namespace thermhe
