#pragma once

#include "xcond/types.hpp"

#include <filesystem>
#include <string>

namespace xcond {

// JSON manifest:
//   {
//     "freq_centers_hz": [ ... ],            optional, defaults to 1..F
//     "entries": [
//       {"sentence_id": 0, "repetition": 0, "condition": "vocalized",
//        "trial": "trials/s0_r0_v.f64", "spectrogram": "spec/s0_r0_v.f64",
//        "sample_rate_hz": 100.0}
//     ]
//   }
// Relative paths resolve against the manifest's directory.
Dataset load_dataset(const std::filesystem::path& manifest_path);

// Writes every matrix under `dir` with the given extension (".f64" or ".csv") and
// a manifest.json referencing them. Returns the manifest path.
std::filesystem::path write_dataset(const Dataset& dataset, const std::filesystem::path& dir,
                                    const std::string& extension = ".f64");

}  // namespace xcond
