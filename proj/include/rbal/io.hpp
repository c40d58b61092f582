#pragma once

#include <string>
#include <vector>

#include "rbal/bergman.hpp"
#include "rbal/geometry.hpp"

namespace rbal {

// Sampled Variety Format (JSON):
// { "level_k": int, "dim": int, "n_coords": int,
//   "points": [{ "params": [real], "weight": real,
//                "z": [[re,im]], "dz": [[[re,im]]] }],
//   "volume_V": real, "torus_weights": [[int]] (optional) }
// Reals round-trip exactly at 17 significant digits. Ingested frames are
// unstructured: no stencil axes, so potential-based operations are
// unavailable, but embedding/moment-map work is fully supported.
SectionFrame load_sampled_variety(const std::string& path);
void save_sampled_variety(const std::string& path, const SectionFrame& frame);

// InnerProduct file (JSON):
// { "level_k": int, "dim": int, "entries": [[[re,im], ...] row-major] }
InnerProduct load_inner_product(const std::string& path);
void save_inner_product(const std::string& path, const InnerProduct& H);

// Write text atomically: temp file in the same directory, then rename.
void atomic_write_text(const std::string& path, const std::string& content);

// CSV with comma separator, '.' decimal, header row; 17 significant digits.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

}  // namespace rbal
