#pragma once

// Reported confusion matrix on the ISPRS Vaihingen test split: rows are
// predicted classes, columns ground truth, each column normalized to 1.

#include <array>

namespace vaihingen {

inline constexpr std::size_t kClasses = 9;

inline constexpr std::array<std::array<double, kClasses>, kClasses> kMatrix{{
    {0.668, 0.000, 0.000, 0.000, 0.000, 0.001, 0.001, 0.000, 0.000},
    {0.002, 0.771, 0.051, 0.042, 0.075, 0.014, 0.053, 0.121, 0.015},
    {0.000, 0.091, 0.946, 0.008, 0.023, 0.001, 0.009, 0.006, 0.002},
    {0.000, 0.001, 0.001, 0.745, 0.020, 0.000, 0.007, 0.009, 0.001},
    {0.000, 0.006, 0.000, 0.013, 0.283, 0.000, 0.003, 0.022, 0.002},
    {0.228, 0.009, 0.001, 0.026, 0.047, 0.937, 0.178, 0.055, 0.026},
    {0.015, 0.003, 0.000, 0.010, 0.017, 0.010, 0.535, 0.019, 0.011},
    {0.008, 0.095, 0.001, 0.156, 0.399, 0.011, 0.148, 0.580, 0.109},
    {0.078, 0.024, 0.000, 0.000, 0.136, 0.026, 0.067, 0.188, 0.834},
}};

// Printed rows under the matrix. The row labeled "Precision" repeats the
// diagonal of the column-normalized matrix, which is per-class recall; the
// row labeled "Recall" is the per-class precision.
inline constexpr std::array<double, kClasses> kPrintedPrecision{0.668, 0.771, 0.946, 0.745, 0.283,
                                                                0.937, 0.535, 0.580, 0.834};
inline constexpr std::array<double, kClasses> kPrintedRecall{0.700, 0.866, 0.910, 0.802, 0.606,
                                                             0.942, 0.690, 0.398, 0.795};
inline constexpr std::array<double, kClasses> kPrintedF1{0.684, 0.816, 0.928, 0.772, 0.386,
                                                         0.939, 0.602, 0.472, 0.814};
inline constexpr double kPrintedOverallAccuracy = 0.839;
inline constexpr double kPrintedAverageF1 = 0.712;

// Test split point counts per class.
inline constexpr std::array<double, kClasses> kTestCounts{600,    98690, 101986, 3708, 7422,
                                                          109048, 11224, 24818,  54226};

}  // namespace vaihingen
