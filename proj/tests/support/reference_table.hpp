#pragma once

#include <array>
#include <string_view>

namespace fdc::testing {

// Published five-fold accuracies (%) per augmentation method with the
// rounded mean and STD printed next to them.
struct PublishedRow {
    std::string_view method;
    std::array<double, 5> folds;
    double mean;
    double std;
};

inline constexpr std::array<PublishedRow, 7> kPublishedRows{{
    {"All_Tile", {98.16, 98.51, 98.58, 98.57, 98.38}, 98.44, 0.1756},
    {"All_Repeat", {96.70, 97.04, 97.35, 97.39, 97.26}, 97.15, 0.2847},
    {"All_Flip", {97.61, 97.59, 98.02, 97.54, 97.76}, 97.70, 0.1948},
    {"LR_Flip_Tile", {96.37, 96.94, 96.59, 96.85, 97.13}, 96.78, 0.2988},
    {"LR_Flip_Repeat", {96.67, 97.72, 97.57, 97.72, 97.17}, 97.37, 0.4514},
    {"UD_Flip_Tile", {97.44, 97.63, 97.78, 97.94, 97.89}, 97.74, 0.2038},
    {"UD_Flip_Repeat", {97.50, 97.13, 97.20, 97.57, 97.85}, 97.45, 0.2917},
}};

}  // namespace fdc::testing
