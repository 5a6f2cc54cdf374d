#pragma once

#include <filesystem>
#include <vector>

#include "spad/eval.hpp"

namespace spad {

/// APCER on x, 1 - BPCER on y, with the chance diagonal.
void plot_roc(const std::vector<RocPoint>& roc, const std::filesystem::path& png);

/// Mean bona fide and attack MSE per epoch (green and red).
void plot_gap_curve(const std::vector<GapRow>& rows, const std::filesystem::path& png);

}  // namespace spad
