#pragma once

// Generated by tools/derive_twisted_oracle.py (scipy quad on [-6, 6]).
// Do not edit by hand; rerun the script.
namespace recal::twisted_oracle {

inline constexpr double kNormaliser = 1.726616033808306;
inline constexpr double kPosteriorMean = 0.3547677283854077;
inline constexpr double kPosteriorVar = 1.0515237230889616;

} // namespace recal::twisted_oracle
