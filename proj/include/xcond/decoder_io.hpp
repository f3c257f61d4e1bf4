#pragma once

#include "xcond/ridge.hpp"

#include <filesystem>

namespace xcond {

// Binary decoder file: consecutive .f64 matrix blocks
//   [1 x |L| lags] [1 x 2 (alpha, condition index)] [G] [1 x F intercept]
// plus a JSON sidecar (<path>.json) describing shapes and training metadata.
void save_decoder(const std::filesystem::path& path, const LinearDecoder& decoder);
LinearDecoder load_decoder(const std::filesystem::path& path);

}  // namespace xcond
